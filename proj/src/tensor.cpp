#include "rcml/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rcml/errors.hpp"

namespace rcml {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

thread_local Tape* g_active_tape = nullptr;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MapConst view(const Tensor& t) {
    return MapConst(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
}

MapConst view(std::span<const double> data, const Shape& s) {
    return MapConst(data.data(), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}

Map grad_view(const Tensor& t) {
    auto g = t.grad_buffer();
    return Map(g.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                             b.shape().str());
    }
}

void require_defined(const Tensor& a, const char* op) {
    if (!a.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
}

}  // namespace

std::string Shape::str() const {
    std::ostringstream os;
    os << "[" << rows << "x" << cols << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
    if (values.size() != shape.numel()) {
        std::ostringstream os;
        os << "tensor data length " << values.size() << " does not match shape " << shape.str();
        throw DimensionError(os.str());
    }
    node_->shape = shape;
    node_->data = std::move(values);
    set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return Tensor(shape, std::vector<double>(shape.numel(), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
    return Tensor(shape, std::vector<double>(shape.numel(), value));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on non-scalar tensor " + shape().str());
    return node_->data[0];
}

void Tensor::set_requires_grad(bool on) {
    node_->requires_grad = on;
    if (on && node_->leaf && node_->grad.size() != node_->data.size()) {
        node_->grad.assign(node_->data.size(), 0.0);
    }
}

std::span<double> Tensor::grad_buffer() const {
    if (node_->grad.size() != node_->data.size()) node_->grad.assign(node_->data.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_->requires_grad || !node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

Tensor Tensor::clone() const { return Tensor(shape(), node_->data, node_->requires_grad); }

// ---------------------------------------------------------------------------
// Tape

Tape::~Tape() { clear(); }

Tape::Scope::Scope(Tape* tape) : previous_(g_active_tape) { g_active_tape = tape; }

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& output, BackwardFn backward) {
    output.node()->tape = this;
    entries_.push_back({output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.numel() != 1) throw DimensionError("backward: loss must be scalar, got " + loss.shape().str());
    if (!loss.requires_grad()) return;
    if (!loss.is_leaf() && loss.node()->tape != this) {
        throw ContractError("backward: loss was not recorded on this tape");
    }
    for (auto& e : entries_) e.output.node()->grad.clear();

    Tensor seed = loss;
    seed.grad_buffer()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->output.has_grad()) it->backward(it->output.grad());
    }
}

void Tape::clear() {
    for (auto& e : entries_) e.output.node()->tape = nullptr;
    entries_.clear();
}

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.numel() != 1) throw DimensionError("backward: loss must be scalar, got " + loss.shape().str());
    if (loss.is_leaf()) {
        if (loss.requires_grad()) {
            Tensor seed = loss;
            seed.grad_buffer()[0] += 1.0;
        }
        return;
    }
    Tape* tape = loss.node()->tape;
    if (tape == nullptr) throw ContractError("backward: loss was not produced under an active tape");
    tape->backward(loss);
}

Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = Tape::active();
    if (tape == nullptr) return nullptr;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return tape;
    }
    return nullptr;
}

Tape* recording_tape(std::span<const Tensor> inputs) {
    Tape* tape = Tape::active();
    if (tape == nullptr) return nullptr;
    for (const Tensor& t : inputs) {
        if (t.requires_grad()) return tape;
    }
    return nullptr;
}

Tensor make_result(Shape shape, std::vector<double> values, Tape* tape, Tape::BackwardFn backward) {
    Tensor out(shape, std::move(values), false);
    if (tape != nullptr) {
        out.node()->leaf = false;
        out.node()->requires_grad = true;
        tape->record(out, std::move(backward));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree " + a.shape().str() + " x " +
                             b.shape().str());
    }
    const Shape out_shape{a.rows(), b.cols()};
    std::vector<double> out(out_shape.numel());
    Map(out.data(), out_shape.rows, out_shape.cols).noalias() = view(a) * view(b);
    Tape* tape = recording_tape({&a, &b});
    return make_result(out_shape, std::move(out), tape, [a, b, out_shape](std::span<const double> g) mutable {
        auto G = view(g, out_shape);
        if (a.requires_grad()) grad_view(a).noalias() += G * view(b).transpose();
        if (b.requires_grad()) grad_view(b).noalias() += view(a).transpose() * G;
    });
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul_transposed");
    require_defined(b, "matmul_transposed");
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_transposed: inner dimensions disagree " + a.shape().str() +
                             " x " + b.shape().str() + "^T");
    }
    const Shape out_shape{a.rows(), b.rows()};
    std::vector<double> out(out_shape.numel());
    Map(out.data(), out_shape.rows, out_shape.cols).noalias() = view(a) * view(b).transpose();
    Tape* tape = recording_tape({&a, &b});
    return make_result(out_shape, std::move(out), tape, [a, b, out_shape](std::span<const double> g) mutable {
        auto G = view(g, out_shape);
        if (a.requires_grad()) grad_view(a).noalias() += G * view(b);
        if (b.requires_grad()) grad_view(b).noalias() += G.transpose() * view(a);
    });
}

Tensor transpose(const Tensor& a) {
    require_defined(a, "transpose");
    const Shape out_shape{a.cols(), a.rows()};
    std::vector<double> out(out_shape.numel());
    Map(out.data(), out_shape.rows, out_shape.cols) = view(a).transpose();
    Tape* tape = recording_tape({&a});
    return make_result(out_shape, std::move(out), tape, [a, out_shape](std::span<const double> g) mutable {
        grad_view(a) += view(g, out_shape).transpose();
    });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    Tape* tape = recording_tape({&a, &b});
    return make_result(a.shape(), std::move(out), tape, [a, b](std::span<const double> g) mutable {
        if (a.requires_grad()) {
            auto ga = a.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            auto gb = b.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    Tape* tape = recording_tape({&a, &b});
    return make_result(a.shape(), std::move(out), tape, [a, b](std::span<const double> g) mutable {
        if (a.requires_grad()) {
            auto ga = a.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            auto gb = b.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    Tape* tape = recording_tape({&a, &b});
    return make_result(a.shape(), std::move(out), tape, [a, b](std::span<const double> g) mutable {
        if (a.requires_grad()) {
            auto ga = a.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.values()[i];
        }
        if (b.requires_grad()) {
            auto gb = b.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.values()[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    require_defined(a, "scale");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
    Tape* tape = recording_tape({&a});
    return make_result(a.shape(), std::move(out), tape, [a, factor](std::span<const double> g) mutable {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& row) {
    require_defined(a, "add_row_broadcast");
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError("add_row_broadcast: row " + row.shape().str() + " does not fit " +
                             a.shape().str());
    }
    const std::size_t n = a.rows(), m = a.cols();
    std::vector<double> out(a.numel());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) out[r * m + c] = a.values()[r * m + c] + row.values()[c];
    }
    Tape* tape = recording_tape({&a, &row});
    return make_result(a.shape(), std::move(out), tape, [a, row, n, m](std::span<const double> g) mutable {
        if (a.requires_grad()) {
            auto ga = a.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (row.requires_grad()) {
            auto gr = row.grad_buffer();
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < m; ++c) gr[c] += g[r * m + c];
            }
        }
    });
}

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    const double total = std::accumulate(a.values().begin(), a.values().end(), 0.0);
    Tape* tape = recording_tape({&a});
    return make_result({1, 1}, {total}, tape, [a](std::span<const double> g) mutable {
        for (double& x : a.grad_buffer()) x += g[0];
    });
}

Tensor mean(const Tensor& a) {
    require_defined(a, "mean");
    if (a.numel() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor gelu(const Tensor& a) {
    require_defined(a, "gelu");
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double c = 0.044715;
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.values()[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x)));
    }
    Tape* tape = recording_tape({&a});
    return make_result(a.shape(), std::move(out), tape, [a](std::span<const double> g) mutable {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = a.values()[i];
            const double u = k * (x + c * x * x * x);
            const double t = std::tanh(u);
            const double du = k * (1.0 + 3.0 * c * x * x);
            ga[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
        }
    });
}

// ---------------------------------------------------------------------------
// Normalisations

Tensor softmax_rows(const Tensor& a) {
    require_defined(a, "softmax");
    const std::size_t n = a.rows(), m = a.cols();
    if (m == 0) throw DimensionError("softmax: empty row");
    std::vector<double> out(a.numel());
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = a.values().data() + r * m;
        double hi = kNegInf;
        for (std::size_t c = 0; c < m; ++c) {
            if (std::isnan(x[c])) throw NumericError("softmax: NaN input");
            if (x[c] == std::numeric_limits<double>::infinity()) throw NumericError("softmax: +inf input");
            hi = std::max(hi, x[c]);
        }
        if (hi == kNegInf) throw NumericError("softmax: every position is masked (empty attention)");
        double z = 0.0;
        double* y = out.data() + r * m;
        for (std::size_t c = 0; c < m; ++c) {
            y[c] = x[c] == kNegInf ? 0.0 : std::exp(x[c] - hi);
            z += y[c];
        }
        for (std::size_t c = 0; c < m; ++c) y[c] /= z;
    }
    Tape* tape = recording_tape({&a});
    if (tape == nullptr) return Tensor(a.shape(), std::move(out));
    std::vector<double> probs = out;
    return make_result(a.shape(), std::move(out), tape,
                       [a, probs = std::move(probs), n, m](std::span<const double> g) mutable {
                           auto ga = a.grad_buffer();
                           for (std::size_t r = 0; r < n; ++r) {
                               const double* y = probs.data() + r * m;
                               const double* gr = g.data() + r * m;
                               double dot = 0.0;
                               for (std::size_t c = 0; c < m; ++c) dot += gr[c] * y[c];
                               for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += y[c] * (gr[c] - dot);
                           }
                       });
}

Tensor softmax(const Tensor& v) {
    if (v.rows() != 1) throw DimensionError("softmax: expected a row vector, got " + v.shape().str());
    return softmax_rows(v);
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
    require_defined(a, "l2_normalize");
    const std::size_t n = a.rows(), m = a.cols();
    std::vector<double> out(a.numel());
    std::vector<double> norms(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = a.values().data() + r * m;
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += x[c] * x[c];
        const double norm = std::sqrt(s);
        if (!(norm > eps)) {
            std::ostringstream os;
            os << "l2_normalize: row " << r << " has norm " << norm << " (degenerate vector)";
            throw DegenerateVectorError(os.str());
        }
        norms[r] = norm;
        for (std::size_t c = 0; c < m; ++c) out[r * m + c] = x[c] / norm;
    }
    Tape* tape = recording_tape({&a});
    if (tape == nullptr) return Tensor(a.shape(), std::move(out));
    std::vector<double> unit = out;
    return make_result(a.shape(), std::move(out), tape,
                       [a, unit = std::move(unit), norms = std::move(norms), n, m](
                           std::span<const double> g) mutable {
                           auto ga = a.grad_buffer();
                           for (std::size_t r = 0; r < n; ++r) {
                               const double* y = unit.data() + r * m;
                               const double* gr = g.data() + r * m;
                               double dot = 0.0;
                               for (std::size_t c = 0; c < m; ++c) dot += gr[c] * y[c];
                               for (std::size_t c = 0; c < m; ++c) {
                                   ga[r * m + c] += (gr[c] - y[c] * dot) / norms[r];
                               }
                           }
                       });
}

Tensor l2_normalize(const Tensor& v, double eps) {
    if (v.rows() != 1) throw DimensionError("l2_normalize: expected a row vector, got " + v.shape().str());
    return l2_normalize_rows(v, eps);
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
    require_defined(a, "layer_norm");
    const std::size_t n = a.rows(), m = a.cols();
    std::vector<double> out(a.numel());
    std::vector<double> inv_std(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = a.values().data() + r * m;
        double mu = 0.0;
        for (std::size_t c = 0; c < m; ++c) mu += x[c];
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t c = 0; c < m; ++c) var += (x[c] - mu) * (x[c] - mu);
        var /= static_cast<double>(m);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < m; ++c) out[r * m + c] = (x[c] - mu) * inv_std[r];
    }
    Tape* tape = recording_tape({&a});
    if (tape == nullptr) return Tensor(a.shape(), std::move(out));
    std::vector<double> normed = out;
    return make_result(a.shape(), std::move(out), tape,
                       [a, normed = std::move(normed), inv_std = std::move(inv_std), n, m](
                           std::span<const double> g) mutable {
                           auto ga = a.grad_buffer();
                           const double inv_m = 1.0 / static_cast<double>(m);
                           for (std::size_t r = 0; r < n; ++r) {
                               const double* y = normed.data() + r * m;
                               const double* gr = g.data() + r * m;
                               double g_mean = 0.0, gy_mean = 0.0;
                               for (std::size_t c = 0; c < m; ++c) {
                                   g_mean += gr[c];
                                   gy_mean += gr[c] * y[c];
                               }
                               g_mean *= inv_m;
                               gy_mean *= inv_m;
                               for (std::size_t c = 0; c < m; ++c) {
                                   ga[r * m + c] += inv_std[r] * (gr[c] - g_mean - y[c] * gy_mean);
                               }
                           }
                       });
}

// ---------------------------------------------------------------------------
// Indexing

Tensor mask_columns(const Tensor& a, const std::vector<bool>& masked) {
    require_defined(a, "mask_columns");
    if (masked.size() != a.cols()) {
        throw DimensionError("mask_columns: mask length does not match " + a.shape().str());
    }
    const std::size_t n = a.rows(), m = a.cols();
    std::vector<double> out(a.values().begin(), a.values().end());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            if (masked[c]) out[r * m + c] = kNegInf;
        }
    }
    Tape* tape = recording_tape({&a});
    return make_result(a.shape(), std::move(out), tape, [a, masked, n, m](std::span<const double> g) mutable {
        auto ga = a.grad_buffer();
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < m; ++c) {
                if (!masked[c]) ga[r * m + c] += g[r * m + c];
            }
        }
    });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
    require_defined(table, "gather_rows");
    const std::size_t m = table.cols();
    std::vector<double> out(indices.size() * m);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= table.rows()) {
            throw BoundsError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                              table.shape().str());
        }
        std::copy_n(table.values().data() + indices[i] * m, m, out.data() + i * m);
    }
    Tape* tape = recording_tape({&table});
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return make_result({indices.size(), m}, std::move(out), tape,
                       [table, idx = std::move(idx), m](std::span<const double> g) mutable {
                           auto gt = table.grad_buffer();
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                               for (std::size_t c = 0; c < m; ++c) gt[idx[i] * m + c] += g[i * m + c];
                           }
                       });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t m = parts.front().cols();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.cols() != m) {
            throw DimensionError("concat_rows: column mismatch " + parts.front().shape().str() + " vs " +
                                 p.shape().str());
        }
        total += p.rows();
    }
    std::vector<double> out;
    out.reserve(total * m);
    for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    Tape* tape = recording_tape(parts);
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return make_result({total, m}, std::move(out), tape, [inputs](std::span<const double> g) mutable {
        std::size_t offset = 0;
        for (Tensor& p : inputs) {
            if (p.requires_grad()) {
                auto gp = p.grad_buffer();
                for (std::size_t i = 0; i < p.numel(); ++i) gp[i] += g[offset + i];
            }
            offset += p.numel();
        }
    });
}

Tensor select_rows(std::span<const Tensor> sources, std::span<const std::size_t> rows) {
    if (sources.size() != rows.size()) throw DimensionError("select_rows: sources and rows differ in length");
    if (sources.empty()) throw DimensionError("select_rows: no inputs");
    const std::size_t m = sources.front().cols();
    std::vector<double> out(sources.size() * m);
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i].cols() != m) throw DimensionError("select_rows: column mismatch");
        if (rows[i] >= sources[i].rows()) throw BoundsError("select_rows: row out of range");
        std::copy_n(sources[i].values().data() + rows[i] * m, m, out.data() + i * m);
    }
    Tape* tape = recording_tape(sources);
    std::vector<Tensor> inputs(sources.begin(), sources.end());
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return make_result({sources.size(), m}, std::move(out), tape,
                       [inputs, idx = std::move(idx), m](std::span<const double> g) mutable {
                           for (std::size_t i = 0; i < inputs.size(); ++i) {
                               if (!inputs[i].requires_grad()) continue;
                               auto gs = inputs[i].grad_buffer();
                               for (std::size_t c = 0; c < m; ++c) gs[idx[i] * m + c] += g[i * m + c];
                           }
                       });
}

Tensor bce_with_logits_mean(const Tensor& logits, std::span<const double> labels) {
    require_defined(logits, "bce_with_logits_mean");
    if (logits.cols() != 1 || logits.rows() != labels.size()) {
        throw DimensionError("bce_with_logits_mean: logits " + logits.shape().str() + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = labels.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = logits.values()[i];
        // log(1 + e^x) - y x, evaluated without overflow.
        total += std::max(x, 0.0) - x * labels[i] + std::log1p(std::exp(-std::abs(x)));
    }
    Tape* tape = recording_tape({&logits});
    std::vector<double> y(labels.begin(), labels.end());
    return make_result({1, 1}, {total / static_cast<double>(n)}, tape,
                       [logits, y = std::move(y), n](std::span<const double> g) mutable {
                           auto gl = logits.grad_buffer();
                           for (std::size_t i = 0; i < n; ++i) {
                               const double p = 1.0 / (1.0 + std::exp(-logits.values()[i]));
                               gl[i] += g[0] * (p - y[i]) / static_cast<double>(n);
                           }
                       });
}

}  // namespace rcml
