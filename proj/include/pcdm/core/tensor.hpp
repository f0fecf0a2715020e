#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcdm {

/// Thrown when an operation is called outside its contract (shape mismatch,
/// bad argument, missing key).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown for math-domain violations (log/sqrt of a negative, non-finite
/// input data).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ContractError("tensor extent must be positive, got shape " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

/// Dense row-major tensor of 64-bit reals. Value semantics with shared
/// storage; all mutation goes through data() and is confined to owners
/// (parameter updates, gradient accumulators).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<double>>(shape_numel(shape_), 0.0)) {}

    /// Construct from external values. Rejects NaN/Inf.
    static Tensor from_data(Shape shape, std::vector<double> values) {
        Tensor t = uninit(std::move(shape), std::move(values));
        for (double v : *t.data_) {
            if (!std::isfinite(v))
                throw DomainError("non-finite value in tensor " + shape_str(t.shape_));
        }
        return t;
    }

    /// Construct without the finiteness check. For op outputs whose inputs
    /// were already validated.
    static Tensor uninit(Shape shape, std::vector<double> values) {
        if (shape_numel(shape) != values.size())
            throw ContractError("shape " + shape_str(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<double>>(std::move(values));
        return t;
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : *t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return full({1}, v); }

    bool empty() const { return !data_; }
    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return data_ ? data_->size() : 0; }

    /// Leading extent; tensors are treated as (rows x cols) matrices with
    /// cols = numel / rows.
    int rows() const { return shape_.empty() ? 0 : shape_[0]; }
    int cols() const {
        if (shape_.empty()) return 0;
        return static_cast<int>(numel() / static_cast<std::size_t>(shape_[0]));
    }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }
    std::vector<double>& vec() { return *data_; }
    const std::vector<double>& vec() const { return *data_; }

    double operator[](std::size_t i) const { return (*data_)[i]; }
    double& operator[](std::size_t i) { return (*data_)[i]; }

    const double& at(int r, int c) const {
        return (*data_)[static_cast<std::size_t>(r) * cols() + c];
    }
    double& at(int r, int c) {
        return (*data_)[static_cast<std::size_t>(r) * cols() + c];
    }

    double item() const {
        if (numel() != 1) throw ContractError("item() on tensor " + shape_str(shape_));
        return (*data_)[0];
    }

    /// Deep copy (fresh storage).
    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<double>>(*data_);
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : *data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
}

}  // namespace pcdm
