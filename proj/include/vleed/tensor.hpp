#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vleed/errors.hpp"

namespace vleed {

// Dense row-major tensor of 64-bit floats. Rank is 1 or 2 in practice.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(numel_of(shape_), fill) {}

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
    static Tensor scalar(double v) {
        Tensor t({1});
        t.data_[0] = v;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-D accessors; a rank-1 tensor behaves as a single row.
    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const {
        if (shape_.empty()) return 0;
        return shape_.size() == 2 ? shape_[1] : shape_[0];
    }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    double item() const {
        if (data_.size() != 1) throw ContractViolation("Tensor::item: not a scalar");
        return data_[0];
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw ContractViolation("Tensor: zero dimension");
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

    static std::string shape_str(const Tensor& t) {
        std::string s = "[";
        for (std::size_t i = 0; i < t.shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(t.shape_[i]);
        }
        return s + "]";
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw ContractViolation(std::string(where) + ": shape mismatch " + Tensor::shape_str(a) +
                                " vs " + Tensor::shape_str(b));
}

inline void require_finite(const Tensor& t, const std::string& where) {
    if (!t.all_finite()) throw NumericError(where + ": non-finite value");
}

inline double l2_norm(const double* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

// In-place l2 normalization of one vector; errors on ~zero norm.
inline void normalize_inplace(double* v, std::size_t n, double min_norm = 1e-12) {
    const double r = l2_norm(v, n);
    if (r < min_norm) throw NumericError("normalize: vector norm below " + std::to_string(min_norm));
    for (std::size_t i = 0; i < n; ++i) v[i] /= r;
}

}  // namespace vleed
