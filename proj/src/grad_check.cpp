#include "rcml/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "rcml/errors.hpp"

namespace rcml {

namespace {

double evaluate_untaped(const std::function<Tensor()>& loss_fn) {
    Tape::Scope no_recording(nullptr);
    const Tensor loss = loss_fn();
    if (loss.numel() != 1) throw DimensionError("grad_check: loss must be scalar, got " + loss.shape().str());
    return loss.item();
}

}  // namespace

const ParamGradError& GradCheckReport::worst() const {
    if (params.empty()) throw ContractError("grad_check report has no parameters");
    return *std::max_element(params.begin(), params.end(), [](const auto& a, const auto& b) {
        return a.max_rel_error < b.max_rel_error;
    });
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, std::span<NamedTensor> params,
                           double step) {
    if (!(step >= 1e-7 && step <= 1e-3)) {
        std::ostringstream os;
        os << "grad_check: step " << step << " outside [1e-7, 1e-3]";
        throw ConfigError(os.str());
    }
    for (auto& p : params) {
        if (!p.tensor.requires_grad()) throw ContractError("grad_check: parameter " + p.name + " does not require grad");
        p.tensor.zero_grad();
    }

    double base = 0.0;
    {
        Tape tape;
        auto scope = tape.activate();
        const Tensor loss = loss_fn();
        base = loss.item();
        tape.backward(loss);
    }
    const double again = evaluate_untaped(loss_fn);
    if (std::bit_cast<std::uint64_t>(base) != std::bit_cast<std::uint64_t>(again)) {
        std::ostringstream os;
        os.precision(17);
        os << "grad_check: loss function is not deterministic (" << base << " then " << again << ")";
        throw DeterminismError(os.str());
    }

    GradCheckReport report;
    for (auto& p : params) {
        ParamGradError entry{p.name};
        const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
        auto values = p.tensor.mutable_values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            values[i] = original + step;
            const double up = evaluate_untaped(loss_fn);
            values[i] = original - step;
            const double down = evaluate_untaped(loss_fn);
            values[i] = original;
            const double numeric = (up - down) / (2.0 * step);
            const double err = relative_error(analytic[i], numeric);
            if (err > entry.max_rel_error || i == 0) {
                entry.max_rel_error = err;
                entry.worst_index = i;
                entry.analytic = analytic[i];
                entry.numeric = numeric;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.params.push_back(entry);
    }
    return report;
}

}  // namespace rcml
