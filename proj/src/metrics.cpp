#include "gelgt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gelgt/errors.hpp"

namespace gelgt {

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("auc: non-finite score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank-sum form: midranks handle ties.
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      const double y = labels[order[k]];
      if (y != 0.0 && y != 1.0) throw DataError("auc: labels must be 0 or 1");
      if (y == 1.0) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double mae(std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size()) throw ShapeError("mae: length mismatch");
  if (scores.empty()) throw DataError("mae: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += std::abs(scores[i] - targets[i]);
  return total / static_cast<double>(scores.size());
}

}  // namespace gelgt
