#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rcml/tensor.hpp"

namespace rcml {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct ParamGradError {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<ParamGradError> params;

    const ParamGradError& worst() const;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// for every entry of every tensor in `params`. `loss_fn` must build its
/// value from the current parameter values each time it is called.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, std::span<NamedTensor> params,
                           double step = 1e-5);

}  // namespace rcml
