#include "rcml/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "rcml/errors.hpp"

namespace rcml {

AdamWState AdamWState::zeros(std::span<const NamedTensor> params) {
    AdamWState s;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.tensor.numel(), 0.0);
        s.second_moment.emplace_back(p.tensor.numel(), 0.0);
    }
    return s;
}

void optimizer_step(std::span<const NamedTensor> params, std::span<const std::vector<double>> grads,
                    AdamWState& state, double lr, double weight_decay) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
        throw DimensionError("optimizer_step: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i].tensor.numel() || state.first_moment[i].size() != grads[i].size()) {
            throw DimensionError("optimizer_step: gradient shape mismatch for " + params[i].name);
        }
        for (std::size_t k = 0; k < grads[i].size(); ++k) {
            if (!std::isfinite(grads[i][k])) {
                throw NumericError("non-finite gradient in parameter '" + params[i].name + "' at element " +
                                   std::to_string(k));
            }
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].tensor;
        auto theta = p.mutable_values();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double g = grads[i][k];
            m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g;
            v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g * g;
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            theta[k] -= lr * (m_hat / (std::sqrt(v_hat) + kAdamEpsilon) + weight_decay * theta[k]);
        }
    }
}

double lr_schedule(std::size_t step, std::size_t total_steps, double base_lr) {
    if (total_steps == 0) throw ConfigError("lr_schedule: total_steps must be positive");
    if (step > total_steps) throw BoundsError("lr_schedule: step beyond total_steps");
    const double x = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

std::vector<std::vector<double>> collect_grads(std::span<const NamedTensor> params) {
    std::vector<std::vector<double>> out;
    for (const auto& p : params) {
        if (p.tensor.has_grad()) {
            out.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
        } else {
            out.emplace_back(p.tensor.numel(), 0.0);
        }
    }
    return out;
}

double global_norm(std::span<const std::vector<double>> grads) {
    double s = 0.0;
    for (const auto& g : grads) {
        for (double x : g) s += x * x;
    }
    return std::sqrt(s);
}

double clip_global_norm(std::span<std::vector<double>> grads, double max_norm) {
    const double norm = global_norm(grads);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (auto& g : grads) {
            for (double& x : g) x *= f;
        }
    }
    return norm;
}

}  // namespace rcml
