#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rcml/grad_check.hpp"

namespace rcml {

struct AdamWState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::size_t step = 0;

    static AdamWState zeros(std::span<const NamedTensor> params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One decoupled-decay Adam update in place. `grads[i]` belongs to
/// `params[i]`; throws NumericError naming the first non-finite gradient.
void optimizer_step(std::span<const NamedTensor> params, std::span<const std::vector<double>> grads,
                    AdamWState& state, double lr, double weight_decay);

/// Cosine decay from base_lr at step 0 to zero at total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, double base_lr);

/// Gradients currently stored on the tensors (zeros when none).
std::vector<std::vector<double>> collect_grads(std::span<const NamedTensor> params);

double global_norm(std::span<const std::vector<double>> grads);

/// Scales all gradients so their global norm is at most max_norm; returns
/// the norm before clipping.
double clip_global_norm(std::span<std::vector<double>> grads, double max_norm);

}  // namespace rcml
