#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gelgt/attention.hpp"

// Brute-force checks of the structural, semantic and temporal guarantees:
// Katz centrality (two independent routes), the relative structural loss of
// truncating walks at 2 hops, per-hop removal sensitivity, the aggregation
// signal-to-noise ratio, the Gaussian-kernel mu gradient and the attention
// ratio factor e.
namespace gelgt {

struct KatzParams {
  double c = 0.1;  // lambda = c / spectral_radius(A) unless lambda is given
  std::optional<double> lambda;
  double tol = 1e-17;  // relative to the running sum of term norms
  std::size_t max_k = 200;
};

// Largest eigenvalue magnitude of a non-negative matrix by power iteration
// on A + I (the shift removes the oscillation on bipartite graphs).
double spectral_radius(const Eigen::MatrixXd& a, std::size_t max_iter = 200, double tol = 1e-10);

double katz_lambda(const Eigen::MatrixXd& a, const KatzParams& params);

// sum_{k>=1} (lambda A)^k 1, truncated once a term no longer registers in
// double precision.
Eigen::VectorXd katz_centrality(const Eigen::MatrixXd& a, const KatzParams& params);
// (I - lambda A)^{-1} 1 - 1 by dense LU.
Eigen::VectorXd katz_linear_solve(const Eigen::MatrixXd& a, double lambda);

// ||sum_{k>=3} (lambda A)^k 1|| / ||sum_{k>=1} (lambda A)^k 1||; 0 for an edgeless graph.
double structural_loss_ratio(const Eigen::MatrixXd& a, const KatzParams& params);

// |Katz(seed) - Katz(seed with `removed` deleted)| at a fixed lambda.
double hop_sensitivity(const Eigen::MatrixXd& a, std::size_t seed, std::size_t removed, double lambda,
                       const KatzParams& params = {});

// (h_norm^2 / sigma_noise^2) (sum w mu)^2 / sum w^2
double snr(const std::vector<double>& w, const std::vector<double>& mu, double sigma_noise, double h_norm);

Eigen::MatrixXd erdos_renyi(std::size_t n, double p, std::mt19937_64& rng);
Eigen::MatrixXd path_graph(std::size_t n);

struct CheckReport {
  std::string check;
  std::size_t trials = 0;
  bool passed = true;
  // Smallest slack to the failing side over all trials (negative = failure).
  double worst_margin = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const CheckReport& r);

CheckReport verify_structural_bound(std::size_t trials, std::mt19937_64& rng);
CheckReport verify_katz_consistency(std::size_t trials, std::mt19937_64& rng);
CheckReport verify_hop_sensitivity();
CheckReport verify_snr_refinement(std::size_t trials, std::mt19937_64& rng);
// `kernel` defaults to the production Gaussian kernel; tests inject
// deliberately wrong kernels to confirm the check can fail.
CheckReport verify_mu_gradient(std::size_t samples, std::mt19937_64& rng, const KernelFn& kernel = {});
CheckReport verify_euler_ratio(std::mt19937_64& rng);

// Runs every check whose group name contains `only` (all when empty).
// Groups: katz, structural, sensitivity, snr, mu_gradient, euler.
std::vector<CheckReport> run_oracle_suite(std::uint64_t seed, const std::string& only = "");

}  // namespace gelgt
