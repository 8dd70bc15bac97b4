#include "ocsvdd/adam.hpp"

#include <cmath>
#include <string>

namespace ocsvdd {

AdamState::AdamState(AdamConfig config, std::span<const Matrix* const> shapes) : config_(config) {
    if (!(config_.lr > 0.0)) throw ConfigError("Adam: learning rate must be positive");
    m_.reserve(shapes.size());
    v_.reserve(shapes.size());
    for (const Matrix* s : shapes) {
        m_.emplace_back(s->rows(), s->cols());
        v_.emplace_back(s->rows(), s->cols());
    }
}

AdamState::AdamState(AdamConfig config, const Matrix& shape) {
    const Matrix* one[] = {&shape};
    *this = AdamState(config, one);
}

void AdamState::update(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw DimensionError("Adam: expected " + std::to_string(m_.size()) + " tensors, got " +
                             std::to_string(params.size()) + " params and " +
                             std::to_string(grads.size()) + " grads");
    }
    for (std::size_t i = 0; i < m_.size(); ++i) {
        if (!params[i]->same_shape(m_[i]) || !grads[i]->same_shape(m_[i])) {
            throw DimensionError("Adam: shape mismatch for tensor " + std::to_string(i));
        }
    }
    ++step_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double t = static_cast<double>(step_);
    const double correction1 = 1.0 - std::pow(b1, t);
    const double correction2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < m_.size(); ++i) {
        auto p = params[i]->data();
        const auto g = grads[i]->data();
        auto m = m_[i].data();
        auto v = v_[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
        require_finite(*params[i], "Adam update");
    }
}

void AdamState::update(Matrix& params, const Matrix& grads) {
    Matrix* p[] = {&params};
    const Matrix* g[] = {&grads};
    update(p, g);
}

}  // namespace ocsvdd
