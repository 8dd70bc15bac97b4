#pragma once

#include <cstdint>

#include "ocsvdd/grad_check.hpp"

namespace ocsvdd {

struct FidelityReport {
    GradCheckResult ocsvdd;       // one-class loss w.r.t. all encoder parameters
    GradCheckResult ocsvdd_bias;  // same, with a final-layer bias
    GradCheckResult meta;         // meta loss w.r.t. trunk and inference net, noise fixed
    double worst() const;
};

// Finite-difference check of both analytic gradients on small random nets
// (input 8, hidden [16], latent 4; 4 in- and 4 out-of-distribution queries,
// L = 2). All parameters, including the inference output layer, are randomized.
FidelityReport gradient_fidelity(std::uint64_t seed, double h = 1e-5);

}  // namespace ocsvdd
