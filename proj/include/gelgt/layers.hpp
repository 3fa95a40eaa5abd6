#pragma once

#include <random>
#include <string>

#include "gelgt/tape.hpp"

// Parameter-holding building blocks shared by the encoders, the attention
// and GNN branches and the prediction head.
namespace gelgt {

// x W + b
struct Linear {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  Var apply(Tape& tape, const Var& x) const;
};

struct Norm {
  Parameter* gain = nullptr;
  Parameter* shift = nullptr;
  Var apply(Tape& tape, const Var& x) const;
};

// branch(x) = W2 gelu(norm(W1 x)); apply(x) = x + branch(x).
struct ResBlock {
  Linear first;
  Norm norm;
  Linear second;
  Var branch(Tape& tape, const Var& x) const;
  Var apply(Tape& tape, const Var& x) const;
};

Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                   std::mt19937_64& rng);
Norm make_norm(ParameterSet& params, const std::string& name, std::size_t width);
ResBlock make_block(ParameterSet& params, const std::string& name, std::size_t width, std::mt19937_64& rng);

}  // namespace gelgt
