#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ocsvdd/matrix.hpp"

namespace ocsvdd {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction over a fixed list of parameter matrices.
// Update: p -= lr * m_hat / (sqrt(v_hat) + eps).
class AdamState {
public:
    // One pair of moment buffers per entry of `shapes`, zero initialized.
    AdamState(AdamConfig config, std::span<const Matrix* const> shapes);
    AdamState(AdamConfig config, const Matrix& shape);

    // Applies one step to every tracked matrix. params[i], grads[i] and the
    // i-th moment buffers must share a shape.
    void update(std::span<Matrix* const> params, std::span<const Matrix* const> grads);
    void update(Matrix& params, const Matrix& grads);

    std::uint64_t step() const noexcept { return step_; }
    const AdamConfig& config() const noexcept { return config_; }
    const Matrix& first_moment(std::size_t i) const { return m_.at(i); }
    const Matrix& second_moment(std::size_t i) const { return v_.at(i); }
    Matrix& first_moment(std::size_t i) { return m_.at(i); }
    Matrix& second_moment(std::size_t i) { return v_.at(i); }

private:
    AdamConfig config_;
    std::uint64_t step_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

}  // namespace ocsvdd
