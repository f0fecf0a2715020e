#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pcdm/core/param_store.hpp"
#include "pcdm/core/tensor.hpp"

namespace pcdm {

enum class OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    AddScalar,
    MulScalar,
    MatMul,
    Exp,
    Log,
    Sigmoid,
    Softplus,
    LeakyRelu,
    Sin,
    Cos,
    Square,
    Sqrt,
    Reciprocal,
    ClampMin,
    Sum,
    Mean,
    SumRows,
    L2NormRows,
    SoftmaxRows,
    ConcatRows,
    ConcatCols,
    GatherRows,
    ScatterAddRows,
    BroadcastRows,
    BroadcastCols,
    Reshape,
    CumsumRowsExcl,
};

/// One recorded operation. The tape is append-only within a forward pass and
/// node ids are strictly increasing, so walking ids in decreasing order is a
/// reverse topological traversal.
struct TapeNode {
    OpKind kind = OpKind::Leaf;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;  // allocated on demand during backward
    bool requires_grad = false;
    double scalar = 0.0;  // op-specific constant (slope, bound, addend, factor)
    std::shared_ptr<const std::vector<int>> index;  // gather/scatter row ids
    std::string param_name;                         // non-empty for parameter leaves
};

class Graph;

/// Handle to a node on a Graph's tape.
struct Val {
    Graph* g = nullptr;
    int id = -1;

    bool valid() const { return g != nullptr && id >= 0; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    int rows() const { return value().rows(); }
    int cols() const { return value().cols(); }
    double item() const { return value().item(); }
};

/// Define-by-run tape. Rebuilt every step; one Graph is single-writer.
class Graph {
public:
    Val constant(Tensor t) { return push(OpKind::Leaf, {}, std::move(t), false); }

    Val input(Tensor t, bool requires_grad) {
        return push(OpKind::Leaf, {}, std::move(t), requires_grad);
    }

    /// Parameter leaf. The same name always maps to the same node within one
    /// graph so gradient contributions accumulate in one place.
    Val param(ParamStore& store, const std::string& name) {
        auto it = param_nodes_.find(name);
        if (it != param_nodes_.end()) return Val{this, it->second};
        Val v = push(OpKind::Leaf, {}, store.at(name), true);
        nodes_[v.id].param_name = name;
        param_nodes_.emplace(name, v.id);
        return v;
    }

    std::size_t size() const { return nodes_.size(); }
    const Tensor& value(int id) const { return nodes_[id].value; }
    const TapeNode& node(int id) const { return nodes_[id]; }

    /// Gradient of the last backward() w.r.t. node id; empty tensor if the
    /// node was not reached.
    Tensor grad_of(Val v) const {
        const TapeNode& n = nodes_[v.id];
        return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
    }

    // ---- elementwise ----

    Val add(Val a, Val b) {
        binary_check(a, b, "add");
        Tensor out(va(a).shape());
        const double* pa = va(a).data();
        const double* pb = va(b).data();
        double* po = out.data();
        for (std::size_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] + pb[i];
        return push(OpKind::Add, {a.id, b.id}, std::move(out));
    }

    Val sub(Val a, Val b) {
        binary_check(a, b, "sub");
        Tensor out(va(a).shape());
        const double* pa = va(a).data();
        const double* pb = va(b).data();
        double* po = out.data();
        for (std::size_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] - pb[i];
        return push(OpKind::Sub, {a.id, b.id}, std::move(out));
    }

    Val mul(Val a, Val b) {
        binary_check(a, b, "mul");
        Tensor out(va(a).shape());
        const double* pa = va(a).data();
        const double* pb = va(b).data();
        double* po = out.data();
        for (std::size_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] * pb[i];
        return push(OpKind::Mul, {a.id, b.id}, std::move(out));
    }

    Val neg(Val a) { return unary(a, OpKind::Neg, [](double x) { return -x; }); }

    Val add_scalar(Val a, double c) {
        Val v = unary(a, OpKind::AddScalar, [c](double x) { return x + c; });
        nodes_[v.id].scalar = c;
        return v;
    }

    Val mul_scalar(Val a, double c) {
        Val v = unary(a, OpKind::MulScalar, [c](double x) { return x * c; });
        nodes_[v.id].scalar = c;
        return v;
    }

    // ---- transcendental / nonlinear ----

    Val exp(Val a) { return unary(a, OpKind::Exp, [](double x) { return std::exp(x); }); }

    Val log(Val a) {
        for (std::size_t i = 0; i < va(a).numel(); ++i)
            if (va(a)[i] <= 0.0) throw DomainError("log of non-positive value");
        return unary(a, OpKind::Log, [](double x) { return std::log(x); });
    }

    Val sigmoid(Val a) {
        return unary(a, OpKind::Sigmoid, [](double x) { return sigmoid_val(x); });
    }

    Val softplus(Val a) {
        return unary(a, OpKind::Softplus, [](double x) {
            return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        });
    }

    Val leaky_relu(Val a, double slope = 0.01) {
        Val v = unary(a, OpKind::LeakyRelu,
                      [slope](double x) { return x > 0.0 ? x : slope * x; });
        nodes_[v.id].scalar = slope;
        return v;
    }

    Val sin(Val a) { return unary(a, OpKind::Sin, [](double x) { return std::sin(x); }); }
    Val cos(Val a) { return unary(a, OpKind::Cos, [](double x) { return std::cos(x); }); }
    Val square(Val a) { return unary(a, OpKind::Square, [](double x) { return x * x; }); }

    Val sqrt(Val a) {
        for (std::size_t i = 0; i < va(a).numel(); ++i)
            if (va(a)[i] < 0.0) throw DomainError("sqrt of negative value");
        return unary(a, OpKind::Sqrt, [](double x) { return std::sqrt(x); });
    }

    Val reciprocal(Val a) {
        return unary(a, OpKind::Reciprocal, [](double x) { return 1.0 / x; });
    }

    /// max(x, bound); gradient is zero at and below the bound.
    Val clamp_min(Val a, double bound) {
        Val v = unary(a, OpKind::ClampMin,
                      [bound](double x) { return x > bound ? x : bound; });
        nodes_[v.id].scalar = bound;
        return v;
    }

    // ---- matrix ----

    Val matmul(Val a, Val b) {
        const Tensor& ta = va(a);
        const Tensor& tb = va(b);
        if (ta.cols() != tb.rows())
            throw ContractError("matmul: inner dims differ, " + shape_str(ta.shape()) +
                                " vs " + shape_str(tb.shape()));
        const int n = ta.rows(), k = ta.cols(), m = tb.cols();
        Tensor out({n, m});
        matmul_into(out.data(), ta.data(), tb.data(), n, k, m);
        return push(OpKind::MatMul, {a.id, b.id}, std::move(out));
    }

    // ---- reductions ----

    Val sum(Val a) {
        double s = 0.0;
        for (std::size_t i = 0; i < va(a).numel(); ++i) s += va(a)[i];
        return push(OpKind::Sum, {a.id}, Tensor::scalar(s));
    }

    Val mean(Val a) {
        double s = 0.0;
        const std::size_t n = va(a).numel();
        for (std::size_t i = 0; i < n; ++i) s += va(a)[i];
        return push(OpKind::Mean, {a.id}, Tensor::scalar(s / static_cast<double>(n)));
    }

    Val sum_rows(Val a) {
        const Tensor& t = va(a);
        const int n = t.rows(), d = t.cols();
        Tensor out({n, 1});
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += t.at(i, j);
            out[i] = s;
        }
        return push(OpKind::SumRows, {a.id}, std::move(out));
    }

    Val l2_norm_rows(Val a) {
        const Tensor& t = va(a);
        const int n = t.rows(), d = t.cols();
        Tensor out({n, 1});
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += t.at(i, j) * t.at(i, j);
            out[i] = std::sqrt(s);
        }
        return push(OpKind::L2NormRows, {a.id}, std::move(out));
    }

    Val softmax_rows(Val a) {
        const Tensor& t = va(a);
        const int n = t.rows(), d = t.cols();
        Tensor out(t.shape());
        for (int i = 0; i < n; ++i) {
            double mx = t.at(i, 0);
            for (int j = 1; j < d; ++j) mx = std::max(mx, t.at(i, j));
            double s = 0.0;
            for (int j = 0; j < d; ++j) {
                const double e = std::exp(t.at(i, j) - mx);
                out.at(i, j) = e;
                s += e;
            }
            for (int j = 0; j < d; ++j) out.at(i, j) /= s;
        }
        return push(OpKind::SoftmaxRows, {a.id}, std::move(out));
    }

    // ---- structure ----

    Val concat_rows(const std::vector<Val>& parts) {
        if (parts.empty()) throw ContractError("concat_rows: empty input list");
        const int d = va(parts[0]).cols();
        int n = 0;
        for (Val p : parts) {
            if (va(p).cols() != d)
                throw ContractError("concat_rows: column mismatch " +
                                    shape_str(va(parts[0]).shape()) + " vs " +
                                    shape_str(va(p).shape()));
            n += va(p).rows();
        }
        Tensor out({n, d});
        double* po = out.data();
        std::vector<int> ids;
        for (Val p : parts) {
            std::memcpy(po, va(p).data(), va(p).numel() * sizeof(double));
            po += va(p).numel();
            ids.push_back(p.id);
        }
        return push(OpKind::ConcatRows, std::move(ids), std::move(out));
    }

    Val concat_cols(const std::vector<Val>& parts) {
        if (parts.empty()) throw ContractError("concat_cols: empty input list");
        const int n = va(parts[0]).rows();
        int d = 0;
        for (Val p : parts) {
            if (va(p).rows() != n)
                throw ContractError("concat_cols: row mismatch " +
                                    shape_str(va(parts[0]).shape()) + " vs " +
                                    shape_str(va(p).shape()));
            d += va(p).cols();
        }
        Tensor out({n, d});
        std::vector<int> ids;
        int col0 = 0;
        for (Val p : parts) {
            const Tensor& t = va(p);
            const int dk = t.cols();
            for (int i = 0; i < n; ++i)
                std::memcpy(&out.at(i, col0), &t.at(i, 0), dk * sizeof(double));
            col0 += dk;
            ids.push_back(p.id);
        }
        return push(OpKind::ConcatCols, std::move(ids), std::move(out));
    }

    Val gather_rows(Val a, std::vector<int> idx) {
        const Tensor& t = va(a);
        const int n = t.rows(), d = t.cols();
        for (int i : idx)
            if (i < 0 || i >= n)
                throw ContractError("gather_rows: index " + std::to_string(i) +
                                    " outside " + shape_str(t.shape()));
        Tensor out({static_cast<int>(idx.size()), d});
        for (std::size_t r = 0; r < idx.size(); ++r)
            std::memcpy(&out.at(static_cast<int>(r), 0), &t.at(idx[r], 0),
                        d * sizeof(double));
        Val v = push(OpKind::GatherRows, {a.id}, std::move(out));
        nodes_[v.id].index = std::make_shared<const std::vector<int>>(std::move(idx));
        return v;
    }

    /// Rows of `a` added into a zero (n_out x d) tensor at positions idx.
    Val scatter_add_rows(Val a, std::vector<int> idx, int n_out) {
        const Tensor& t = va(a);
        const int d = t.cols();
        if (static_cast<int>(idx.size()) != t.rows())
            throw ContractError("scatter_add_rows: " + std::to_string(idx.size()) +
                                " indices for " + shape_str(t.shape()));
        for (int i : idx)
            if (i < 0 || i >= n_out)
                throw ContractError("scatter_add_rows: index " + std::to_string(i) +
                                    " outside target of " + std::to_string(n_out) + " rows");
        Tensor out({n_out, d});
        for (int r = 0; r < t.rows(); ++r)
            for (int j = 0; j < d; ++j) out.at(idx[r], j) += t.at(r, j);
        Val v = push(OpKind::ScatterAddRows, {a.id}, std::move(out));
        nodes_[v.id].index = std::make_shared<const std::vector<int>>(std::move(idx));
        return v;
    }

    /// Tile a 1 x d row n times.
    Val broadcast_rows(Val a, int n) {
        const Tensor& t = va(a);
        if (t.rows() != 1)
            throw ContractError("broadcast_rows: expected one row, got " +
                                shape_str(t.shape()));
        const int d = t.cols();
        Tensor out({n, d});
        for (int i = 0; i < n; ++i)
            std::memcpy(&out.at(i, 0), t.data(), d * sizeof(double));
        return push(OpKind::BroadcastRows, {a.id}, std::move(out));
    }

    /// Tile an n x 1 column d times.
    Val broadcast_cols(Val a, int d) {
        const Tensor& t = va(a);
        if (t.cols() != 1)
            throw ContractError("broadcast_cols: expected one column, got " +
                                shape_str(t.shape()));
        const int n = t.rows();
        Tensor out({n, d});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) out.at(i, j) = t[i];
        return push(OpKind::BroadcastCols, {a.id}, std::move(out));
    }

    Val reshape(Val a, Shape shape) {
        if (shape_numel(shape) != va(a).numel())
            throw ContractError("reshape: " + shape_str(va(a).shape()) + " to " +
                                shape_str(shape) + " changes element count");
        Tensor out = Tensor::uninit(std::move(shape), va(a).vec());
        return push(OpKind::Reshape, {a.id}, std::move(out));
    }

    /// Per row: y_j = sum of x_k for k < j (y_0 = 0).
    Val cumsum_rows_exclusive(Val a) {
        const Tensor& t = va(a);
        const int n = t.rows(), m = t.cols();
        Tensor out(t.shape());
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j) {
                out.at(i, j) = acc;
                acc += t.at(i, j);
            }
        }
        return push(OpKind::CumsumRowsExcl, {a.id}, std::move(out));
    }

    // ---- backward ----

    /// Reverse sweep from a scalar loss. Gradients land in each reached
    /// node's grad tensor; parameter leaves are collected via grads().
    void backward(Val loss) {
        if (loss.g != this) throw ContractError("backward: loss from another graph");
        TapeNode& ln = nodes_[loss.id];
        if (ln.value.numel() != 1)
            throw ContractError("backward: loss must be scalar, got " +
                                shape_str(ln.value.shape()));
        if (!ln.requires_grad) return;
        ensure_grad(loss.id)[0] += 1.0;
        for (int id = loss.id; id >= 0; --id) {
            TapeNode& n = nodes_[id];
            if (!n.requires_grad || n.grad.empty()) continue;
            step_backward(n);
        }
    }

    /// Per-parameter gradients from the last backward(); unreached
    /// parameters get zero tensors.
    GradMap grads(const ParamStore& store) const {
        GradMap out = store.zero_grads();
        for (const auto& [name, id] : param_nodes_) {
            const TapeNode& n = nodes_[id];
            if (!n.grad.empty()) out.at(name) = n.grad.clone();
        }
        return out;
    }

    static double sigmoid_val(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    static void matmul_into(double* out, const double* a, const double* b, int n,
                            int k, int m) {
        for (int i = 0; i < n; ++i) {
            double* orow = out + static_cast<std::size_t>(i) * m;
            const double* arow = a + static_cast<std::size_t>(i) * k;
            for (int p = 0; p < k; ++p) {
                const double av = arow[p];
                const double* brow = b + static_cast<std::size_t>(p) * m;
                for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
            }
        }
    }

private:
    const Tensor& va(Val v) const {
        if (v.g != this) throw ContractError("op argument from another graph");
        return nodes_[v.id].value;
    }

    void binary_check(Val a, Val b, const char* op) {
        require_same_shape(va(a), va(b), op);
    }

    template <class F>
    Val unary(Val a, OpKind kind, F f) {
        const Tensor& t = va(a);
        Tensor out(t.shape());
        const double* pi = t.data();
        double* po = out.data();
        for (std::size_t i = 0, n = t.numel(); i < n; ++i) po[i] = f(pi[i]);
        return push(kind, {a.id}, std::move(out));
    }

    Val push(OpKind kind, std::vector<int> inputs, Tensor value,
             bool leaf_requires = false) {
        TapeNode n;
        n.kind = kind;
        n.inputs = std::move(inputs);
        n.value = std::move(value);
        if (kind == OpKind::Leaf) {
            n.requires_grad = leaf_requires;
        } else {
            for (int i : n.inputs) n.requires_grad |= nodes_[i].requires_grad;
        }
        nodes_.push_back(std::move(n));
        return Val{this, static_cast<int>(nodes_.size()) - 1};
    }

    Tensor& ensure_grad(int id) {
        TapeNode& n = nodes_[id];
        if (n.grad.empty()) n.grad = Tensor(n.value.shape());
        return n.grad;
    }

    // Accumulate into input i's grad only if that input participates.
    bool wants(int id) const { return nodes_[id].requires_grad; }

    void step_backward(TapeNode& n);

    std::vector<TapeNode> nodes_;
    std::map<std::string, int> param_nodes_;
};

inline const Tensor& Val::value() const { return g->value(id); }

inline void Graph::step_backward(TapeNode& n) {
    const Tensor& g = n.grad;
    const Tensor& y = n.value;
    auto in = [&](int k) -> TapeNode& { return nodes_[n.inputs[k]]; };
    auto gin = [&](int k) -> Tensor& { return ensure_grad(n.inputs[k]); };

    switch (n.kind) {
        case OpKind::Leaf:
            break;
        case OpKind::Add: {
            for (int k = 0; k < 2; ++k) {
                if (!wants(n.inputs[k])) continue;
                Tensor& d = gin(k);
                for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
            }
            break;
        }
        case OpKind::Sub: {
            if (wants(n.inputs[0])) {
                Tensor& d = gin(0);
                for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
            }
            if (wants(n.inputs[1])) {
                Tensor& d = gin(1);
                for (std::size_t i = 0; i < g.numel(); ++i) d[i] -= g[i];
            }
            break;
        }
        case OpKind::Mul: {
            const Tensor& a = in(0).value;
            const Tensor& b = in(1).value;
            if (wants(n.inputs[0])) {
                Tensor& d = gin(0);
                for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * b[i];
            }
            if (wants(n.inputs[1])) {
                Tensor& d = gin(1);
                for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * a[i];
            }
            break;
        }
        case OpKind::Neg: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] -= g[i];
            break;
        }
        case OpKind::AddScalar: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
            break;
        }
        case OpKind::MulScalar: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * n.scalar;
            break;
        }
        case OpKind::MatMul: {
            const Tensor& a = in(0).value;
            const Tensor& b = in(1).value;
            const int rows = a.rows(), inner = a.cols(), colsb = b.cols();
            if (wants(n.inputs[0])) {
                Tensor& d = gin(0);  // g (n x m) * b^T (m x k)
                for (int i = 0; i < rows; ++i) {
                    const double* grow = g.data() + static_cast<std::size_t>(i) * colsb;
                    double* drow = d.data() + static_cast<std::size_t>(i) * inner;
                    for (int p = 0; p < inner; ++p) {
                        const double* brow = b.data() + static_cast<std::size_t>(p) * colsb;
                        double s = 0.0;
                        for (int j = 0; j < colsb; ++j) s += grow[j] * brow[j];
                        drow[p] += s;
                    }
                }
            }
            if (wants(n.inputs[1])) {
                Tensor& d = gin(1);  // a^T (k x n) * g (n x m)
                for (int i = 0; i < rows; ++i) {
                    const double* arow = a.data() + static_cast<std::size_t>(i) * inner;
                    const double* grow = g.data() + static_cast<std::size_t>(i) * colsb;
                    for (int p = 0; p < inner; ++p) {
                        const double av = arow[p];
                        double* drow = d.data() + static_cast<std::size_t>(p) * colsb;
                        for (int j = 0; j < colsb; ++j) drow[j] += av * grow[j];
                    }
                }
            }
            break;
        }
        case OpKind::Exp: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * y[i];
            break;
        }
        case OpKind::Log: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] / a[i];
            break;
        }
        case OpKind::Sigmoid: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                d[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
        }
        case OpKind::Softplus: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                d[i] += g[i] * sigmoid_val(a[i]);
            break;
        }
        case OpKind::LeakyRelu: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                d[i] += g[i] * (a[i] > 0.0 ? 1.0 : n.scalar);
            break;
        }
        case OpKind::Sin: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * std::cos(a[i]);
            break;
        }
        case OpKind::Cos: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] -= g[i] * std::sin(a[i]);
            break;
        }
        case OpKind::Square: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * 2.0 * a[i];
            break;
        }
        case OpKind::Sqrt: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (y[i] > 1e-300) d[i] += g[i] * 0.5 / y[i];
            break;
        }
        case OpKind::Reciprocal: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] -= g[i] * y[i] * y[i];
            break;
        }
        case OpKind::ClampMin: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (a[i] > n.scalar) d[i] += g[i];
            break;
        }
        case OpKind::Sum: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const double gv = g[0];
            for (std::size_t i = 0; i < d.numel(); ++i) d[i] += gv;
            break;
        }
        case OpKind::Mean: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const double gv = g[0] / static_cast<double>(d.numel());
            for (std::size_t i = 0; i < d.numel(); ++i) d[i] += gv;
            break;
        }
        case OpKind::SumRows: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const int rows = d.rows(), colsd = d.cols();
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < colsd; ++j) d.at(i, j) += g[i];
            break;
        }
        case OpKind::L2NormRows: {
            if (!wants(n.inputs[0])) break;
            const Tensor& a = in(0).value;
            Tensor& d = gin(0);
            const int rows = a.rows(), colsd = a.cols();
            for (int i = 0; i < rows; ++i) {
                if (y[i] <= 1e-300) continue;
                const double s = g[i] / y[i];
                for (int j = 0; j < colsd; ++j) d.at(i, j) += s * a.at(i, j);
            }
            break;
        }
        case OpKind::SoftmaxRows: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const int rows = y.rows(), colsd = y.cols();
            for (int i = 0; i < rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < colsd; ++j) dot += g.at(i, j) * y.at(i, j);
                for (int j = 0; j < colsd; ++j)
                    d.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
            }
            break;
        }
        case OpKind::ConcatRows: {
            std::size_t off = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                const std::size_t cnt = nodes_[n.inputs[k]].value.numel();
                if (wants(n.inputs[k])) {
                    Tensor& d = ensure_grad(n.inputs[k]);
                    for (std::size_t i = 0; i < cnt; ++i) d[i] += g[off + i];
                }
                off += cnt;
            }
            break;
        }
        case OpKind::ConcatCols: {
            const int rows = y.rows();
            int col0 = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                const int dk = nodes_[n.inputs[k]].value.cols();
                if (wants(n.inputs[k])) {
                    Tensor& d = ensure_grad(n.inputs[k]);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < dk; ++j) d.at(i, j) += g.at(i, col0 + j);
                }
                col0 += dk;
            }
            break;
        }
        case OpKind::GatherRows: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const std::vector<int>& idx = *n.index;
            const int colsd = d.cols();
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < colsd; ++j)
                    d.at(idx[r], j) += g.at(static_cast<int>(r), j);
            break;
        }
        case OpKind::ScatterAddRows: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const std::vector<int>& idx = *n.index;
            const int colsd = d.cols();
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < colsd; ++j)
                    d.at(static_cast<int>(r), j) += g.at(idx[r], j);
            break;
        }
        case OpKind::BroadcastRows: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const int rows = y.rows(), colsd = y.cols();
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < colsd; ++j) d[j] += g.at(i, j);
            break;
        }
        case OpKind::BroadcastCols: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const int rows = y.rows(), colsd = y.cols();
            for (int i = 0; i < rows; ++i) {
                double s = 0.0;
                for (int j = 0; j < colsd; ++j) s += g.at(i, j);
                d[i] += s;
            }
            break;
        }
        case OpKind::Reshape: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
            break;
        }
        case OpKind::CumsumRowsExcl: {
            if (!wants(n.inputs[0])) break;
            Tensor& d = gin(0);
            const int rows = y.rows(), colsd = y.cols();
            for (int i = 0; i < rows; ++i) {
                double acc = 0.0;
                for (int j = colsd - 1; j >= 0; --j) {
                    d.at(i, j) += acc;
                    acc += g.at(i, j);
                }
            }
            break;
        }
    }
}

// Operator sugar for same-shape arithmetic.
inline Val operator+(Val a, Val b) { return a.g->add(a, b); }
inline Val operator-(Val a, Val b) { return a.g->sub(a, b); }
inline Val operator*(Val a, Val b) { return a.g->mul(a, b); }
inline Val operator-(Val a) { return a.g->neg(a); }

/// x (n x k) * W (k x m) + b (1 x m), b broadcast across rows.
inline Val linear(Val x, Val w, Val b) {
    Graph& g = *x.g;
    Val y = g.matmul(x, w);
    return g.add(y, g.broadcast_rows(b, y.rows()));
}

/// Mean of elementwise squared difference.
inline Val mse(Val a, Val b) {
    Graph& g = *a.g;
    return g.mean(g.square(g.sub(a, b)));
}

/// backward(loss) then gather gradients for every parameter in the store
/// (zeros for parameters the loss never touched).
inline GradMap backward(Val loss, const ParamStore& store) {
    loss.g->backward(loss);
    return loss.g->grads(store);
}

}  // namespace pcdm
