#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ocsvdd/matrix.hpp"

namespace ocsvdd {

using ScalarFn = std::function<double(std::span<const double>)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Compares `analytic` against central differences (f(p+h e_i) - f(p-h e_i)) / 2h
// coordinate by coordinate. Relative error per coordinate is
// |a - n| / max(1e-8, |a| + |n|). Throws NumericError on a non-finite loss.
GradCheckResult grad_check(const ScalarFn& loss, std::span<const double> params,
                           std::span<const double> analytic, double h = 1e-5);

// Concatenates the entries of several matrices, in order.
std::vector<double> flatten(std::span<const Matrix* const> tensors);
// Inverse of flatten: writes values back into the matrices.
void unflatten(std::span<const double> values, std::span<Matrix* const> tensors);

}  // namespace ocsvdd
