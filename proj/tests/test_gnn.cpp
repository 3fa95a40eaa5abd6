#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gelgt/errors.hpp"
#include "gelgt/gnn.hpp"

using namespace gelgt;
using namespace gelgt::testing;

namespace {

Tensor random_input(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Tensor t = Tensor::zeros(n, d);
  for (double& v : t.values()) v = g(rng);
  return t;
}

}  // namespace

TEST(SageLayer, TwoNodeHandExample) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  SageLayer layer = make_sage_layer(params, "g", 1, 0.1, rng);
  layer.w_self->value = Tensor::scalar(1.0);
  layer.w_neigh->value = Tensor::scalar(1.0);
  Tape tape;
  const Tensor z =
      layer.preactivation(tape, tape.constant(Tensor::from_rows({{1}, {3}})), mean_adjacency({{1}, {0}})).value();
  EXPECT_EQ(z, Tensor::from_rows({{4}, {4}}));
}

TEST(SageLayer, IsolatedNodeHasNoNeighbourTerm) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  SageLayer layer = make_sage_layer(params, "g", 4, 0.1, rng);
  layer.w_self->value = Tensor::identity(4);
  const Tensor h = random_input(1, 4, 2);
  Tape tape;
  const Var x = tape.constant(h);
  EXPECT_EQ(layer.preactivation(tape, x, mean_adjacency({{}})).value(), h);
  const Tensor expect =
      add(x, gelu(layer_norm(x, tape.param(*layer.norm.gain), tape.param(*layer.norm.shift)))).value();
  const Tensor out = layer.apply(tape, x, mean_adjacency({{}})).value();
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(0, c), expect(0, c), 1e-14);
}

TEST(SageLayer, NeighbourOrderDoesNotMatter) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  SageLayer layer = make_sage_layer(params, "g", 6, 0.1, rng);
  const Tensor h = random_input(4, 6, 3);
  Tape tape;
  const Tensor a = layer.apply(tape, tape.constant(h), mean_adjacency({{1, 2, 3}, {0}, {0, 3}, {0, 2}})).value();
  const Tensor b = layer.apply(tape, tape.constant(h), mean_adjacency({{3, 1, 2}, {0}, {3, 0}, {2, 0}})).value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(SageLayer, ShapeAndIndexErrors) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  SageLayer layer = make_sage_layer(params, "g", 4, 0.1, rng);
  Tape tape;
  EXPECT_THROW(layer.apply(tape, tape.constant(Tensor::zeros(2, 3)), mean_adjacency({{1}, {0}})), ShapeError);
  EXPECT_THROW(layer.apply(tape, tape.constant(Tensor::zeros(3, 4)), mean_adjacency({{1}, {0}})), ShapeError);
  EXPECT_THROW(mean_adjacency({{5}}), ShapeError);
}

TEST(GnnBranch, EdgelessSubgraphIsPerNode) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  GnnBranch gnn("gnn", 6, 3, 0.1, params, rng);
  const Tensor h = random_input(3, 6, 4);
  Tape tape;
  const Tensor all = gnn.forward(tape, tape.constant(h), mean_adjacency({{}, {}, {}})).value();
  for (std::size_t r = 0; r < 3; ++r) {
    const Tensor one = gnn.forward(tape, slice_rows(tape.constant(h), r, 1), mean_adjacency({{}})).value();
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(all(r, c), one(0, c), 1e-14);
  }
}

TEST(GnnBranch, ReceptiveFieldIsExactlyKHops) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  GnnBranch gnn("gnn", 6, 3, 0.1, params, rng);
  // Path 0-1-2-3-4: node 3 is three hops from the seed, node 4 four hops.
  const SparseRows adj = mean_adjacency({{1}, {0, 2}, {1, 3}, {2, 4}, {3}});
  const Tensor h = random_input(5, 6, 5);
  Tape tape;
  const Tensor base = gnn.forward(tape, tape.constant(h), adj).value();
  auto seed_change = [&](std::size_t node) {
    Tensor p = h;
    for (std::size_t c = 0; c < 6; ++c) p(node, c) += 0.5;
    const Tensor out = gnn.forward(tape, tape.constant(p), adj).value();
    double diff = 0.0;
    for (std::size_t c = 0; c < 6; ++c) diff = std::max(diff, std::abs(out(0, c) - base(0, c)));
    return diff;
  };
  EXPECT_GT(seed_change(3), 1e-8);
  EXPECT_EQ(seed_change(4), 0.0);
}

TEST(GnnBranch, GradientMatchesFiniteDifferences) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  GnnBranch gnn("gnn", 5, 3, 0.1, params, rng);
  const SparseRows adj = mean_adjacency({{1, 2}, {0}, {0, 3}, {2}});
  const Tensor h = random_input(4, 5, 6);
  params.add("input", h);
  std::string worst;
  const double err = worst_grad_error(
      params, [&](Tape& t) { return weighted_sum(t, gnn.forward(t, t.param(params.at("input")), adj)); }, &worst);
  EXPECT_LT(err, 1e-5) << worst;
}

TEST(GnnBranch, DropoutOnlyInTraining) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  GnnBranch gnn("gnn", 6, 3, 0.5, params, rng);
  const SparseRows adj = mean_adjacency({{1}, {0}});
  const Tensor h = random_input(2, 6, 7);
  Tape eval_a, eval_b, train(true, 3);
  const Tensor a = gnn.forward(eval_a, eval_a.constant(h), adj).value();
  EXPECT_EQ(a, gnn.forward(eval_b, eval_b.constant(h), adj).value());
  EXPECT_NE(a, gnn.forward(train, train.constant(h), adj).value());
}
