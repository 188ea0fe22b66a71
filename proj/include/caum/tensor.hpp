#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "caum/errors.hpp"

namespace caum {

// Reverse-mode tape over dense 2-D arrays (row-major doubles).
// Vectors are 1xd, scalars 1x1. The op set is exactly what the
// recommendation graph needs; no general broadcasting beyond
// row/scalar broadcast in add().

struct TensorNode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<double> grad; // lazily allocated, same extent as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backward; // accumulates into parents' grad

    std::size_t size() const { return rows * cols; }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() : n_(std::make_shared<TensorNode>()) {}
    explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v);

    std::size_t rows() const { return n_->rows; }
    std::size_t cols() const { return n_->cols; }
    std::size_t size() const { return n_->size(); }

    double& at(std::size_t i, std::size_t j) { return n_->data[i * n_->cols + j]; }
    double at(std::size_t i, std::size_t j) const { return n_->data[i * n_->cols + j]; }
    double item() const;

    std::vector<double>& values() { return n_->data; }
    const std::vector<double>& values() const { return n_->data; }
    const std::vector<double>& grad() const { return n_->grad; }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }
    void zero_grad() { n_->grad.assign(n_->data.size(), 0.0); }

    const std::shared_ptr<TensorNode>& node() const { return n_; }

private:
    std::shared_ptr<TensorNode> n_;
};

// Key mask shared by every row of a softmax: true = position participates.
using Mask = std::vector<std::uint8_t>;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// b may match a, or be 1xcols (row broadcast), or 1x1 (scalar broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b); // elementwise, same shape
Tensor scale(const Tensor& a, double s);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);

Tensor sum(const Tensor& a);  // 1x1
Tensor mean(const Tensor& a); // 1x1

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

// out[i] = a[i + offset] when in range, zero row otherwise.
Tensor shift_rows(const Tensor& a, int offset);

// a is 1xd; result is n copies of that row. Backward sums rows.
Tensor repeat_rows(const Tensor& a, std::size_t n);

// Row-wise stabilized softmax; masked-out columns are exactly zero in
// value and receive zero gradient. A mask with no true entry is a
// ContractError.
Tensor softmax_rows(const Tensor& a, const Mask* key_mask = nullptr);

// Rows of `table` gathered by id; gradient flows to the gathered rows only.
Tensor embedding_lookup(const Tensor& table, const std::vector<std::uint32_t>& ids);

// Reverse pass from a scalar loss. Gradients accumulate across calls;
// callers zero grads explicitly between steps.
void backward(const Tensor& loss);

} // namespace caum
