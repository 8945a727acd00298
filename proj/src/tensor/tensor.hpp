#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ttarag {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes do not conform for an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised on non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first use
    bool requires_grad = false;
    std::uint64_t seq = 0;     // execution order on the creating thread
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

/// Dense row-major float64 array participating in reverse-mode autodiff.
///
/// A Tensor is a cheap handle; copies alias the same storage. Results of
/// operations keep their inputs alive, so the graph is released once the
/// last handle to the loss goes away. Leaves created with `parameter()`
/// accumulate gradients across backward passes until `zero_grad()`.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor parameter(Shape shape, std::vector<double> data) {
        return from_data(std::move(shape), std::move(data), true);
    }
    static Tensor scalar(double v) { return from_data({}, {v}); }
    /// 2-D literal, e.g. `Tensor::matrix({{1, 2}, {3, 4}})`.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const { return data().size(); }
    std::size_t dim(std::size_t i) const;
    bool requires_grad() const;

    std::span<double> data();
    std::span<const double> data() const;
    /// Gradient buffer; empty span if no gradient has been accumulated yet.
    std::span<double> grad();
    std::span<const double> grad() const;
    bool has_grad() const;
    void zero_grad();

    double item() const;
    double at(std::size_t i, std::size_t j) const;

    /// Deep copy of values detached from any graph.
    Tensor detach() const;

    /// Reverse-mode sweep from this scalar. Leaf gradients accumulate.
    void backward() const;

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// Disables graph construction on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

using TokenId = std::uint32_t;

// Forward operations. All operate on rank-1/rank-2 tensors and throw
// ShapeError with the offending dimensions when operands do not conform.

Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m,k)x(n,k)^T
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);  // (m,n) + (n) broadcast
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor embedding(const Tensor& table, std::span<const TokenId> ids);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor softmax(const Tensor& x);
/// Row-wise softmax of a square score matrix with positions j > i excluded.
Tensor causal_softmax(const Tensor& scores);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor sum(const Tensor& x);

/// Raised when a masked loss selects no positions.
class EmptyTargetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Mean over masked rows t of -log softmax(logits[t])[targets[t]].
Tensor masked_cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                            const std::vector<bool>& mask);

/// Global L2 norm over the gradients of `params`.
double global_grad_norm(std::span<const Tensor> params);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the factor applied (1.0 when already within bounds).
double clip_global_norm(std::span<Tensor> params, double max_norm);

}  // namespace ttarag
