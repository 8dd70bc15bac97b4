#include "ocsvdd/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ocsvdd {

GradCheckResult grad_check(const ScalarFn& loss, std::span<const double> params,
                           std::span<const double> analytic, double h) {
    if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");
    if (analytic.size() != params.size()) {
        throw DimensionError("grad_check: gradient has " + std::to_string(analytic.size()) +
                             " entries for " + std::to_string(params.size()) + " parameters");
    }
    std::vector<double> p(params.begin(), params.end());
    auto eval = [&](std::size_t i) {
        const double value = loss(p);
        if (!std::isfinite(value)) {
            throw NumericError("grad_check: non-finite loss while perturbing coordinate " +
                               std::to_string(i));
        }
        return value;
    };

    GradCheckResult result;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double original = p[i];
        p[i] = original + h;
        const double up = eval(i);
        p[i] = original - h;
        const double down = eval(i);
        p[i] = original;

        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i];
        const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        if (rel > result.max_rel_error || i == 0) {
            result = {std::max(rel, result.max_rel_error), i, a, numeric};
        }
    }
    return result;
}

std::vector<double> flatten(std::span<const Matrix* const> tensors) {
    std::vector<double> out;
    for (const Matrix* t : tensors) out.insert(out.end(), t->data().begin(), t->data().end());
    return out;
}

void unflatten(std::span<const double> values, std::span<Matrix* const> tensors) {
    std::size_t total = 0;
    for (const Matrix* t : tensors) total += t->size();
    if (total != values.size()) {
        throw DimensionError("unflatten: " + std::to_string(values.size()) + " values for " +
                             std::to_string(total) + " slots");
    }
    std::size_t offset = 0;
    for (Matrix* t : tensors) {
        auto dst = t->data();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
        offset += dst.size();
    }
}

}  // namespace ocsvdd
