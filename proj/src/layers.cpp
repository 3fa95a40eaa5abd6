#include "gelgt/layers.hpp"

#include "gelgt/init.hpp"
#include "gelgt/ops.hpp"

namespace gelgt {

Var Linear::apply(Tape& tape, const Var& x) const {
  return affine(x, tape.param(*w), tape.param(*b));
}

Var Norm::apply(Tape& tape, const Var& x) const {
  return layer_norm(x, tape.param(*gain), tape.param(*shift));
}

Var ResBlock::branch(Tape& tape, const Var& x) const {
  return second.apply(tape, gelu(norm.apply(tape, first.apply(tape, x))));
}

Var ResBlock::apply(Tape& tape, const Var& x) const {
  return add(x, branch(tape, x));
}

Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                   std::mt19937_64& rng) {
  Parameter& w = params.add(name + ".w", linear_weight(in, out, rng));
  Parameter& b = params.add(name + ".b", Tensor::zeros(1, out));
  b.weight_decay = false;
  return {&w, &b};
}

Norm make_norm(ParameterSet& params, const std::string& name, std::size_t width) {
  Parameter& g = params.add(name + ".gain", filled_row(width, 1.0));
  Parameter& s = params.add(name + ".shift", Tensor::zeros(1, width));
  g.weight_decay = false;
  s.weight_decay = false;
  return {&g, &s};
}

ResBlock make_block(ParameterSet& params, const std::string& name, std::size_t width, std::mt19937_64& rng) {
  return {make_linear(params, name + ".fc1", width, width, rng), make_norm(params, name + ".norm", width),
          make_linear(params, name + ".fc2", width, width, rng)};
}

}  // namespace gelgt
