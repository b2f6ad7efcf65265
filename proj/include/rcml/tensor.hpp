#pragma once

// Dense row-major matrices with a reverse-mode gradient tape.
//
// Every tensor is two-dimensional (scalars are 1x1, vectors are 1xn rows).
// Operations record themselves on the thread's active Tape when at least one
// input requires a gradient; with no active tape they compute values only.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rcml {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t numel() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

class Tape;

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool leaf = true;
    Tape* tape = nullptr;
};
}  // namespace detail

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor row(std::vector<double> values);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t rows() const { return node_->shape.rows; }
    std::size_t cols() const { return node_->shape.cols; }
    std::size_t numel() const { return node_->shape.numel(); }

    std::span<const double> values() const { return node_->data; }
    // Direct write access; only meaningful for leaves (parameters, inputs).
    std::span<double> mutable_values() { return node_->data; }
    double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on);
    bool is_leaf() const { return node_->leaf; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    // Gradient storage, allocated as zeros on first use.
    std::span<double> grad_buffer() const;
    void zero_grad();

    // Fresh leaf holding a copy of the values; never requires grad.
    Tensor detach() const;
    // Fresh leaf holding a copy of values and the requires_grad flag.
    Tensor clone() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }
    detail::Node* node() const { return node_.get(); }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Ordered record of executed primitives for one forward pass.
class Tape {
public:
    using BackwardFn = std::function<void(std::span<const double> output_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape();

    /// Makes this tape the thread's recording target until the scope ends.
    class Scope {
    public:
        explicit Scope(Tape* tape);
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;
        ~Scope();

    private:
        Tape* previous_;
    };

    [[nodiscard]] Scope activate() { return Scope(this); }
    static Tape* active();

    void record(const Tensor& output, BackwardFn backward);

    /// Propagates d(loss)/d(.) into every requires_grad ancestor. Leaf
    /// gradients accumulate across calls; intermediate gradients are reset.
    void backward(const Tensor& loss);

    /// Drops all recorded intermediates. Leaf tensors are unaffected.
    void clear();
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        Tensor output;
        BackwardFn backward;
    };
    std::vector<Entry> entries_;
};

/// Backward through the tape that recorded `loss`.
void backward(const Tensor& loss);

/// Tape to record on if any of `inputs` requires grad and a tape is active.
Tape* recording_tape(std::initializer_list<const Tensor*> inputs);
Tape* recording_tape(std::span<const Tensor> inputs);

/// Wraps freshly computed values as an op output; records `backward` on
/// `tape` when it is non-null.
Tensor make_result(Shape shape, std::vector<double> values, Tape* tape, Tape::BackwardFn backward);

// Differentiable primitives.

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materialising the transpose.
Tensor matmul_transposed(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Adds a 1 x cols row to every row of `a`.
Tensor add_row_broadcast(const Tensor& a, const Tensor& row);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// tanh-approximated GELU.
Tensor gelu(const Tensor& a);

/// Row-wise softmax. Entries equal to -inf get exactly zero weight.
Tensor softmax_rows(const Tensor& a);
Tensor softmax(const Tensor& v);

inline constexpr double kNormEpsilon = 1e-12;

/// Each row divided by its L2 norm.
Tensor l2_normalize_rows(const Tensor& a, double eps = kNormEpsilon);
Tensor l2_normalize(const Tensor& v, double eps = kNormEpsilon);

/// Parameter-free layer normalisation of each row.
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-5);

/// Sets the flagged columns of every row to -inf; they receive no gradient.
Tensor mask_columns(const Tensor& a, const std::vector<bool>& masked);

/// Rows of `table` picked by index (embedding lookup).
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
/// Vertical concatenation.
Tensor concat_rows(std::span<const Tensor> parts);
/// One row out of each source tensor, stacked in order.
Tensor select_rows(std::span<const Tensor> sources, std::span<const std::size_t> rows);

/// Mean binary cross-entropy between logits (n x 1) and 0/1 labels.
Tensor bce_with_logits_mean(const Tensor& logits, std::span<const double> labels);

}  // namespace rcml
