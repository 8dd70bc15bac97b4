#pragma once

#include <span>

namespace ocsvdd {

// ROC AUC with out-of-distribution (-1) as the detection-positive class:
// P(score_neg > score_pos) + 0.5 P(score_neg == score_pos), from the
// Mann-Whitney U statistic with average ranks for ties.
// Throws InputError unless both labels occur, DimensionError on size mismatch.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace ocsvdd
