#include "caum/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace caum {

namespace {

std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

bool any_grad(std::initializer_list<Tensor> ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

Tensor make_result(std::size_t rows, std::size_t cols,
                   std::initializer_list<Tensor> parents) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(rows * cols, 0.0);
    n->requires_grad = any_grad(parents);
    if (n->requires_grad) {
        for (const auto& p : parents) n->parents.push_back(p.node());
    }
    return Tensor(n);
}

} // namespace

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(rows * cols, 0.0);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
    if (values.size() != rows * cols)
        throw ShapeError("tensor init: " + std::to_string(values.size()) +
                         " values for shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->data = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v) { return from(1, 1, {v}); }

double Tensor::item() const {
    if (size() != 1)
        throw ContractError("item() on non-scalar tensor " + std::to_string(rows()) +
                            "x" + std::to_string(cols()));
    return n_->data[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a) +
                         " vs " + shape_str(b));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_result(m, n, {a, b});
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = out.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* crow = pc + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, bn, cn, m, k, n]() {
            const double* dc = cn->grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double* dcrow = dc + i * n;
                        const double* brow = bn->data.data() + kk * n;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
                        an->grad[i * k + kk] += acc;
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                // dB = A^T * dC
                for (std::size_t i = 0; i < m; ++i) {
                    const double* arow = an->data.data() + i * k;
                    const double* dcrow = dc + i * n;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        if (av == 0.0) continue;
                        double* dbrow = bn->grad.data() + kk * n;
                        for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
                    }
                }
            }
        };
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_result(n, m, {a});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.at(j, i) = a.at(i, j);
    if (out.requires_grad()) {
        auto an = a.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, cn, m, n]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    an->grad[i * n + j] += cn->grad[j * m + i];
        };
    }
    return out;
}

namespace {

enum class BroadcastKind { Same, Row, Scalar };

BroadcastKind broadcast_kind(const Tensor& a, const Tensor& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return BroadcastKind::Same;
    if (b.rows() == 1 && b.cols() == a.cols()) return BroadcastKind::Row;
    if (b.rows() == 1 && b.cols() == 1) return BroadcastKind::Scalar;
    throw ShapeError("add/sub: incompatible shapes " + shape_str(a) + " vs " +
                     shape_str(b));
}

Tensor add_impl(const Tensor& a, const Tensor& b, double sign) {
    const BroadcastKind kind = broadcast_kind(a, b);
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_result(m, n, {a, b});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double bv = kind == BroadcastKind::Same ? b.at(i, j)
                      : kind == BroadcastKind::Row  ? b.at(0, j)
                                                    : b.at(0, 0);
            out.at(i, j) = a.at(i, j) + sign * bv;
        }
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, bn, cn, kind, sign, m, n]() {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < m * n; ++i) an->grad[i] += cn->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double g = sign * cn->grad[i * n + j];
                        if (kind == BroadcastKind::Same)
                            bn->grad[i * n + j] += g;
                        else if (kind == BroadcastKind::Row)
                            bn->grad[j] += g;
                        else
                            bn->grad[0] += g;
                    }
            }
        };
    }
    return out;
}

Tensor unary(const Tensor& a, const std::function<double(double)>& f,
             const std::function<double(double, double)>& df_from_xy) {
    Tensor out = make_result(a.rows(), a.cols(), {a});
    for (std::size_t i = 0; i < a.size(); ++i)
        out.values()[i] = f(a.values()[i]);
    if (out.requires_grad()) {
        auto an = a.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, cn, df_from_xy]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < an->data.size(); ++i)
                an->grad[i] += cn->grad[i] * df_from_xy(an->data[i], cn->data[i]);
        };
    }
    return out;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_impl(a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_impl(a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("mul: shapes differ, " + shape_str(a) + " vs " + shape_str(b));
    Tensor out = make_result(a.rows(), a.cols(), {a, b});
    for (std::size_t i = 0; i < a.size(); ++i)
        out.values()[i] = a.values()[i] * b.values()[i];
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, bn, cn]() {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < an->data.size(); ++i)
                    an->grad[i] += cn->grad[i] * bn->data[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < bn->data.size(); ++i)
                    bn->grad[i] += cn->grad[i] * an->data[i];
            }
        };
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = make_result(a.rows(), a.cols(), {a});
    for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = s * a.values()[i];
    if (out.requires_grad()) {
        auto an = a.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, cn, s]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < an->data.size(); ++i)
                an->grad[i] += s * cn->grad[i];
        };
    }
    return out;
}

Tensor tanh(const Tensor& a) {
    return unary(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        a,
        [](double x) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
    return unary(
        a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor sum(const Tensor& a) {
    Tensor out = make_result(1, 1, {a});
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    out.values()[0] = acc;
    if (out.requires_grad()) {
        auto an = a.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, cn]() {
            an->ensure_grad();
            for (double& g : an->grad) g += cn->grad[0];
        };
    }
    return out;
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ContractError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const std::size_t m = parts.front().rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != m)
            throw ShapeError("concat_cols: row counts differ (" + shape_str(parts.front()) +
                             " vs " + shape_str(p) + ")");
        total += p.cols();
    }
    auto n = std::make_shared<TensorNode>();
    n->rows = m;
    n->cols = total;
    n->data.assign(m * total, 0.0);
    for (const auto& p : parts)
        if (p.requires_grad()) {
            n->requires_grad = true;
            break;
        }
    Tensor out(n);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j)
                out.at(i, off + j) = p.at(i, j);
        off += p.cols();
    }
    if (n->requires_grad) {
        std::vector<std::shared_ptr<TensorNode>> pn;
        for (const auto& p : parts) pn.push_back(p.node());
        n->parents = pn;
        TensorNode* cn = n.get(); // raw: the closure lives on this node
        n->backward = [pn, cn, m, total]() {
            std::size_t off = 0;
            for (auto& p : pn) {
                const std::size_t pc = p->cols;
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < pc; ++j)
                            p->grad[i * pc + j] += cn->grad[i * total + off + j];
                }
                off += pc;
            }
        };
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const std::size_t n_cols = parts.front().cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.cols() != n_cols)
            throw ShapeError("concat_rows: column counts differ (" +
                             shape_str(parts.front()) + " vs " + shape_str(p) + ")");
        total += p.rows();
    }
    auto n = std::make_shared<TensorNode>();
    n->rows = total;
    n->cols = n_cols;
    n->data.assign(total * n_cols, 0.0);
    for (const auto& p : parts)
        if (p.requires_grad()) {
            n->requires_grad = true;
            break;
        }
    Tensor out(n);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.rows(); ++i)
            for (std::size_t j = 0; j < n_cols; ++j)
                out.at(off + i, j) = p.at(i, j);
        off += p.rows();
    }
    if (n->requires_grad) {
        std::vector<std::shared_ptr<TensorNode>> pn;
        for (const auto& p : parts) pn.push_back(p.node());
        n->parents = pn;
        TensorNode* cn = n.get(); // raw: the closure lives on this node
        n->backward = [pn, cn, n_cols]() {
            std::size_t off = 0;
            for (auto& p : pn) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->rows; ++i)
                        for (std::size_t j = 0; j < n_cols; ++j)
                            p->grad[i * n_cols + j] += cn->grad[(off + i) * n_cols + j];
                }
                off += p->rows;
            }
        };
    }
    return out;
}

Tensor shift_rows(const Tensor& a, int offset) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_result(m, n, {a});
    for (std::size_t i = 0; i < m; ++i) {
        const long long src = static_cast<long long>(i) + offset;
        if (src < 0 || src >= static_cast<long long>(m)) continue;
        for (std::size_t j = 0; j < n; ++j)
            out.at(i, j) = a.at(static_cast<std::size_t>(src), j);
    }
    if (out.requires_grad()) {
        auto an = a.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, cn, offset, m, n]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const long long src = static_cast<long long>(i) + offset;
                if (src < 0 || src >= static_cast<long long>(m)) continue;
                for (std::size_t j = 0; j < n; ++j)
                    an->grad[static_cast<std::size_t>(src) * n + j] += cn->grad[i * n + j];
            }
        };
    }
    return out;
}

Tensor repeat_rows(const Tensor& a, std::size_t n_rows) {
    if (a.rows() != 1)
        throw ShapeError("repeat_rows expects a 1xd tensor, got " + shape_str(a));
    const std::size_t d = a.cols();
    Tensor out = make_result(n_rows, d, {a});
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = a.at(0, j);
    if (out.requires_grad()) {
        auto an = a.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, cn, n_rows, d]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < n_rows; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    an->grad[j] += cn->grad[i * d + j];
        };
    }
    return out;
}

Tensor softmax_rows(const Tensor& a, const Mask* key_mask) {
    const std::size_t m = a.rows(), n = a.cols();
    if (n == 0) throw ContractError("softmax over empty row");
    if (key_mask) {
        if (key_mask->size() != n)
            throw ShapeError("softmax mask length " + std::to_string(key_mask->size()) +
                             " vs row width " + std::to_string(n));
        bool any = false;
        for (auto v : *key_mask) any = any || v;
        if (!any) throw ContractError("softmax: mask row with no valid entry");
    }
    Tensor out = make_result(m, n, {a});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j)
            if (!key_mask || (*key_mask)[j])
                mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (key_mask && !(*key_mask)[j]) continue;
            const double e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (std::size_t j = 0; j < n; ++j)
            if (!key_mask || (*key_mask)[j]) out.at(i, j) /= z;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [an, cn, m, n]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* y = cn->data.data() + i * n;
                const double* dy = cn->grad.data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
                for (std::size_t j = 0; j < n; ++j)
                    an->grad[i * n + j] += y[j] * (dy[j] - dot);
            }
        };
    }
    return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::uint32_t>& ids) {
    const std::size_t v = table.rows(), d = table.cols();
    for (auto id : ids)
        if (id >= v)
            throw IndexError("embedding id " + std::to_string(id) +
                             " outside table of " + std::to_string(v) + " rows");
    Tensor out = make_result(ids.size(), d, {table});
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            out.at(i, j) = table.at(ids[i], j);
    if (out.requires_grad()) {
        auto tn = table.node();
        TensorNode* cn = out.node().get(); // raw: the closure lives on this node
        out.node()->backward = [tn, cn, ids, d]() {
            tn->ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (std::size_t j = 0; j < d; ++j)
                    tn->grad[ids[i] * d + j] += cn->grad[i * d + j];
        };
    }
    return out;
}

void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ShapeError("backward requires a scalar loss, got " +
                            std::to_string(loss.rows()) + "x" +
                            std::to_string(loss.cols()));
    // Iterative post-order over the parent DAG; visits each node once.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx++].get();
            if (!seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // Interior adjoints are scratch for this pass; only leaves (parameters
    // and inputs, no backward fn) accumulate across calls.
    for (TensorNode* n : order)
        if (n->backward) n->grad.assign(n->data.size(), 0.0);
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward) (*it)->backward();
}

} // namespace caum
