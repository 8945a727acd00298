#include "tensor/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace ttarag {

namespace {

thread_local bool t_grad_enabled = true;
thread_local std::uint64_t t_next_seq = 1;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Shape shape, std::vector<double> value) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->seq = t_next_seq++;
    return node;
}

/// Builds an op result; wires the backward closure only when some input
/// needs a gradient and recording is enabled.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward_fn) {
    auto node = make_node(std::move(shape), std::move(value));
    if (t_grad_enabled &&
        std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; })) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

[[noreturn]] void shape_fail(const std::string& op, const std::string& detail) {
    throw ShapeError(op + ": " + detail);
}

void require_rank(const std::string& op, const Tensor& t, std::size_t rank, const char* name) {
    if (!t.defined()) shape_fail(op, std::string(name) + " is undefined");
    if (t.rank() != rank) {
        shape_fail(op, std::string(name) + " must be rank " + std::to_string(rank) + ", got shape " +
                           shape_to_string(t.shape()));
    }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, double beta) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (beta == 0.0) std::fill(c, c + m * n, 0.0);
        return;
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using ConstMap = Eigen::Map<const RowMajor>;
    const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
    const ConstMap ma(a, ei(trans_a ? k : m), ei(trans_a ? m : k));
    const ConstMap mb(b, ei(trans_b ? n : k), ei(trans_b ? k : n));
    Eigen::Map<RowMajor> mc(c, ei(m), ei(n));
    if (beta == 0.0) mc.setZero();
    if (trans_a && trans_b) {
        mc.noalias() += ma.transpose() * mb.transpose();
    } else if (trans_a) {
        mc.noalias() += ma.transpose() * mb;
    } else if (trans_b) {
        mc.noalias() += ma * mb.transpose();
    } else {
        mc.noalias() += ma * mb;
    }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    if (shape.size() == 1) os << ',';
    os << ')';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor: shape " + shape_to_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " + std::to_string(data.size()));
    }
    auto node = make_node(std::move(shape), std::move(data));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("tensor: ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return from_data({r, c}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::dim(std::size_t i) const {
    if (i >= rank()) throw ShapeError("tensor: dimension index " + std::to_string(i) + " out of range");
    return node_->shape[i];
}
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::grad() { return node_->grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size() && !node_->value.empty(); }
void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_to_string(shape()) + " is not a scalar");
    return node_->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    if (rank() != 2 || i >= dim(0) || j >= dim(1)) throw ShapeError("at: index out of range");
    return node_->value[i * dim(1) + j];
}

Tensor Tensor::detach() const { return from_data(shape(), node_->value, false); }

void Tensor::backward() const {
    if (!node_) throw ShapeError("backward: undefined tensor");
    if (numel() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_to_string(shape()));
    }
    if (!node_->requires_grad) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{node_.get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });

    for (Node* n : order) {
        if (n->backward_fn) n->grad.assign(n->value.size(), 0.0);
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (Node* n : order) {
        if (n->backward_fn) n->backward_fn(*n);
    }
    // Interior buffers are scratch; drop them so repeated sweeps start clean.
    for (Node* n : order) {
        if (n->backward_fn) std::vector<double>().swap(n->grad);
    }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

// ---------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2, "lhs");
    require_rank("matmul", b, 2, "rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        shape_fail("matmul", "inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                                 shape_to_string(b.shape()));
    }
    std::vector<double> out(m * n);
    gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data(), 0.0);
    return make_result({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()}, [m, n, k](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
            pa.ensure_grad();
            gemm(false, true, m, k, n, self.grad.data(), pb.value.data(), pa.grad.data(), 1.0);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            gemm(true, false, k, n, m, pa.value.data(), self.grad.data(), pb.grad.data(), 1.0);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank("matmul_nt", a, 2, "lhs");
    require_rank("matmul_nt", b, 2, "rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        shape_fail("matmul_nt", "inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                                    shape_to_string(b.shape()) + "^T");
    }
    std::vector<double> out(m * n);
    gemm(false, true, m, n, k, a.data().data(), b.data().data(), out.data(), 0.0);
    return make_result({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()}, [m, n, k](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
            pa.ensure_grad();
            gemm(false, false, m, k, n, self.grad.data(), pb.value.data(), pa.grad.data(), 1.0);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            gemm(true, false, n, k, m, self.grad.data(), pa.value.data(), pb.grad.data(), 1.0);
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
        shape_fail("add", "operand shapes differ: " + shape_to_string(a.shape()) + " vs " +
                              shape_to_string(b.shape()));
    }
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_result(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            Node& in = parent(self, p);
            if (!in.requires_grad) continue;
            in.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
        }
    });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    require_rank("add_row", a, 2, "lhs");
    require_rank("add_row", row, 1, "row");
    const std::size_t m = a.dim(0), n = a.dim(1);
    if (row.dim(0) != n) {
        shape_fail("add_row", "row of shape " + shape_to_string(row.shape()) + " does not broadcast over " +
                                  shape_to_string(a.shape()));
    }
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] + row.data()[j];
    return make_result(a.shape(), std::move(out), {a.node_ptr(), row.node_ptr()}, [m, n](Node& self) {
        Node& pa = parent(self, 0);
        Node& pr = parent(self, 1);
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < m * n; ++i) pa.grad[i] += self.grad[i];
        }
        if (pr.requires_grad) {
            pr.ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) pr.grad[j] += self.grad[i * n + j];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
        shape_fail("mul", "operand shapes differ: " + shape_to_string(a.shape()) + " vs " +
                              shape_to_string(b.shape()));
    }
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_result(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    return make_result(a.shape(), std::move(out), {a.node_ptr()}, [s](Node& self) {
        Node& pa = parent(self, 0);
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * s;
    });
}

Tensor embedding(const Tensor& table, std::span<const TokenId> ids) {
    require_rank("embedding", table, 2, "table");
    const std::size_t vocab = table.dim(0), d = table.dim(1), t = ids.size();
    std::vector<double> out(t * d);
    for (std::size_t i = 0; i < t; ++i) {
        if (ids[i] >= vocab) {
            shape_fail("embedding", "token id " + std::to_string(ids[i]) + " outside table of " +
                                        std::to_string(vocab) + " rows");
        }
        std::copy_n(table.data().data() + ids[i] * d, d, out.data() + i * d);
    }
    std::vector<TokenId> saved(ids.begin(), ids.end());
    return make_result({t, d}, std::move(out), {table.node_ptr()}, [saved = std::move(saved), d](Node& self) {
        Node& tab = parent(self, 0);
        tab.ensure_grad();
        for (std::size_t i = 0; i < saved.size(); ++i) {
            double* dst = tab.grad.data() + saved[i] * d;
            const double* src = self.grad.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank("layer_norm", x, 2, "input");
    require_rank("layer_norm", gain, 1, "gain");
    require_rank("layer_norm", bias, 1, "bias");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (gain.dim(0) != n || bias.dim(0) != n) {
        shape_fail("layer_norm", "gain/bias " + shape_to_string(gain.shape()) + "/" +
                                     shape_to_string(bias.shape()) + " do not match width " + std::to_string(n));
    }
    std::vector<double> out(m * n), xhat(m * n), rstd(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data().data() + i * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += row[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(n);
        rstd[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (row[j] - mean) * rstd[i];
            out[i * n + j] = xhat[i * n + j] * gain.data()[j] + bias.data()[j];
        }
    }
    return make_result(x.shape(), std::move(out), {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
                       [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                           Node& px = parent(self, 0);
                           Node& pg = parent(self, 1);
                           Node& pb = parent(self, 2);
                           if (pg.requires_grad) pg.ensure_grad();
                           if (pb.requires_grad) pb.ensure_grad();
                           if (px.requires_grad) px.ensure_grad();
                           std::vector<double> dxhat(n);
                           for (std::size_t i = 0; i < m; ++i) {
                               const double* dy = self.grad.data() + i * n;
                               const double* xh = xhat.data() + i * n;
                               double sum_d = 0.0, sum_dx = 0.0;
                               for (std::size_t j = 0; j < n; ++j) {
                                   if (pg.requires_grad) pg.grad[j] += dy[j] * xh[j];
                                   if (pb.requires_grad) pb.grad[j] += dy[j];
                                   dxhat[j] = dy[j] * pg.value[j];
                                   sum_d += dxhat[j];
                                   sum_dx += dxhat[j] * xh[j];
                               }
                               if (!px.requires_grad) continue;
                               const double inv_n = 1.0 / static_cast<double>(n);
                               for (std::size_t j = 0; j < n; ++j) {
                                   px.grad[i * n + j] +=
                                       rstd[i] * (dxhat[j] - inv_n * sum_d - xh[j] * inv_n * sum_dx);
                               }
                           }
                       });
}

namespace {

Tensor row_softmax(const Tensor& x, bool causal, const char* op) {
    if (!x.defined() || x.rank() < 1 || x.rank() > 2 || (causal && x.rank() != 2)) {
        shape_fail(op, "input must be rank " + std::string(causal ? "2" : "1 or 2") + ", got shape " +
                           (x.defined() ? shape_to_string(x.shape()) : std::string("undefined")));
    }
    const std::size_t m = x.rank() == 2 ? x.dim(0) : 1;
    const std::size_t n = x.rank() == 2 ? x.dim(1) : x.dim(0);
    if (causal && m != n) shape_fail(op, "scores must be square, got " + shape_to_string(x.shape()));
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t width = causal ? i + 1 : n;
        const double* row = x.data().data() + i * n;
        double mx = row[0];
        for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            out[i * n + j] = std::exp(row[j] - mx);
            z += out[i * n + j];
        }
        for (std::size_t j = 0; j < width; ++j) out[i * n + j] /= z;
    }
    return make_result(x.shape(), std::move(out), {x.node_ptr()}, [m, n](Node& self) {
        Node& px = parent(self, 0);
        px.ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = self.value.data() + i * n;
            const double* dy = self.grad.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
            for (std::size_t j = 0; j < n; ++j) px.grad[i * n + j] += y[j] * (dy[j] - dot);
        }
    });
}

}  // namespace

Tensor softmax(const Tensor& x) { return row_softmax(x, false, "softmax"); }

Tensor causal_softmax(const Tensor& scores) { return row_softmax(scores, true, "causal_softmax"); }

Tensor gelu(const Tensor& x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double a = 0.044715;
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.data()[i];
        out[i] = 0.5 * v * (1.0 + std::tanh(c * (v + a * v * v * v)));
    }
    return make_result(x.shape(), std::move(out), {x.node_ptr()}, [](Node& self) {
        Node& px = parent(self, 0);
        px.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double v = px.value[i];
            const double t = std::tanh(c * (v + a * v * v * v));
            const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * a * v * v);
            px.grad[i] += self.grad[i] * d;
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.data()[i]);
    return make_result(x.shape(), std::move(out), {x.node_ptr()}, [](Node& self) {
        Node& px = parent(self, 0);
        px.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (px.value[i] > 0.0) px.grad[i] += self.grad[i];
        }
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) shape_fail("concat_cols", "no operands");
    const std::size_t m = parts[0].defined() && parts[0].rank() == 2 ? parts[0].dim(0) : 0;
    std::vector<std::size_t> widths;
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        require_rank("concat_cols", p, 2, "operand");
        if (p.dim(0) != m) {
            shape_fail("concat_cols", "row counts differ: " + std::to_string(m) + " vs " + std::to_string(p.dim(0)));
        }
        widths.push_back(p.dim(1));
        parents.push_back(p.node_ptr());
    }
    const std::size_t n = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
    std::vector<double> out(m * n);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(parts[k].data().data() + i * widths[k], widths[k], out.data() + i * n + offset);
        offset += widths[k];
    }
    return make_result({m, n}, std::move(out), std::move(parents), [m, n, widths](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            Node& p = parent(self, k);
            if (p.requires_grad) {
                p.ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j)
                        p.grad[i * widths[k] + j] += self.grad[i * n + off + j];
            }
            off += widths[k];
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
    require_rank("slice_cols", x, 2, "input");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (begin > end || end > n) {
        shape_fail("slice_cols", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                     ") outside " + std::to_string(n) + " columns");
    }
    const std::size_t w = end - begin;
    std::vector<double> out(m * w);
    for (std::size_t i = 0; i < m; ++i) std::copy_n(x.data().data() + i * n + begin, w, out.data() + i * w);
    return make_result({m, w}, std::move(out), {x.node_ptr()}, [m, n, w, begin](Node& self) {
        Node& px = parent(self, 0);
        px.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) px.grad[i * n + begin + j] += self.grad[i * w + j];
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    require_rank("slice_rows", x, 2, "input");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (begin > end || end > m) {
        shape_fail("slice_rows", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                     ") outside " + std::to_string(m) + " rows");
    }
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                            x.data().begin() + static_cast<std::ptrdiff_t>(end * n));
    return make_result({end - begin, n}, std::move(out), {x.node_ptr()}, [n, begin](Node& self) {
        Node& px = parent(self, 0);
        px.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[begin * n + i] += self.grad[i];
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_result({}, {s}, {x.node_ptr()}, [](Node& self) {
        Node& px = parent(self, 0);
        px.ensure_grad();
        for (double& g : px.grad) g += self.grad[0];
    });
}

Tensor masked_cross_entropy(const Tensor& logits, std::span<const TokenId> targets, const std::vector<bool>& mask) {
    require_rank("masked_cross_entropy", logits, 2, "logits");
    const std::size_t t = logits.dim(0), v = logits.dim(1);
    if (targets.size() != t || mask.size() != t) {
        shape_fail("masked_cross_entropy", "logits have " + std::to_string(t) + " rows but " +
                                               std::to_string(targets.size()) + " targets and " +
                                               std::to_string(mask.size()) + " mask entries");
    }
    const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    if (count == 0) throw EmptyTargetError("masked_cross_entropy: mask selects no positions");

    std::vector<double> probs(t * v, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        if (!mask[i]) continue;
        if (targets[i] >= v) {
            shape_fail("masked_cross_entropy", "target " + std::to_string(targets[i]) + " outside " +
                                                   std::to_string(v) + " classes");
        }
        const double* row = logits.data().data() + i * v;
        const double mx = *std::max_element(row, row + v);
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j) {
            probs[i * v + j] = std::exp(row[j] - mx);
            z += probs[i * v + j];
        }
        for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= z;
        total += (mx + std::log(z)) - row[targets[i]];
    }
    const double inv = 1.0 / static_cast<double>(count);
    std::vector<TokenId> tgt(targets.begin(), targets.end());
    return make_result({}, {total * inv}, {logits.node_ptr()},
                       [t, v, inv, mask, tgt = std::move(tgt), probs = std::move(probs)](Node& self) {
                           Node& pl = parent(self, 0);
                           pl.ensure_grad();
                           const double g = self.grad[0] * inv;
                           for (std::size_t i = 0; i < t; ++i) {
                               if (!mask[i]) continue;
                               for (std::size_t j = 0; j < v; ++j) pl.grad[i * v + j] += g * probs[i * v + j];
                               pl.grad[i * v + tgt[i]] -= g;
                           }
                       });
}

double global_grad_norm(std::span<const Tensor> params) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (double g : p.grad()) sq += g * g;
    }
    return std::sqrt(sq);
}

double clip_global_norm(std::span<Tensor> params, double max_norm) {
    if (!(max_norm >= 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be >= 0");
    for (const auto& p : params) {
        for (double g : p.grad()) {
            if (!std::isfinite(g)) throw NumericError("clip_global_norm: non-finite gradient value");
        }
    }
    const double norm = global_grad_norm(params);
    if (!(norm > max_norm)) return 1.0;
    const double factor = max_norm / norm;
    for (auto& p : params) {
        for (double& g : p.grad()) g *= factor;
    }
    return factor;
}

}  // namespace ttarag
