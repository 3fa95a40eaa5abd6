#pragma once

#include <span>

namespace gelgt {

// Probability that a random positive outscores a random negative, ties
// counted one half. Throws DataError unless both classes are present and
// NumericError on a non-finite score.
double auc(std::span<const double> scores, std::span<const double> labels);

// Mean absolute error; throws on empty or mismatched input.
double mae(std::span<const double> scores, std::span<const double> targets);

}  // namespace gelgt
