#include "ocsvdd/auc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ocsvdd/error.hpp"

namespace ocsvdd {

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("auc: " + std::to_string(scores.size()) + " scores for " +
                             std::to_string(labels.size()) + " labels");
    }
    std::size_t n_neg = 0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == -1) {
            ++n_neg;
        } else if (labels[i] == 1) {
            ++n_pos;
        } else {
            throw InputError("auc: label " + std::to_string(labels[i]) + " is not +1/-1");
        }
        if (!std::isfinite(scores[i])) throw NumericError("auc: non-finite score at index " + std::to_string(i));
    }
    if (n_neg == 0 || n_pos == 0) throw InputError("auc: need both in- and out-of-distribution samples");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the rank sum of the negatives keeps tied average ranks integral.
    double twice_rank_sum = 0.0;
    for (std::size_t start = 0; start < order.size();) {
        std::size_t stop = start + 1;
        while (stop < order.size() && scores[order[stop]] == scores[order[start]]) ++stop;
        const double twice_avg_rank = static_cast<double>(start + 1 + stop);  // ranks start+1 .. stop
        for (std::size_t k = start; k < stop; ++k)
            if (labels[order[k]] == -1) twice_rank_sum += twice_avg_rank;
        start = stop;
    }
    const double neg = static_cast<double>(n_neg);
    const double u = 0.5 * (twice_rank_sum - neg * (neg + 1.0));
    return u / (neg * static_cast<double>(n_pos));
}

}  // namespace ocsvdd
