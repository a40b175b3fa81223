#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "xflowdg/rng.hpp"

namespace xflowdg {

/// Dense real tensor of rank 0, 1 or 2. 64-bit values, row-major.
/// Rank 0 holds exactly one value (empty shape, product = 1).
class Tensor {
public:
    Tensor() : shape_{0} {}  // empty rank-1 tensor

    static Tensor scalar(double v);
    static Tensor zeros(const std::vector<std::size_t>& shape);
    static Tensor full(const std::vector<std::size_t>& shape, double v);
    static Tensor vector(std::initializer_list<double> v);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);
    static Tensor normal(const std::vector<std::size_t>& shape, Rng& rng, double stddev = 1.0);
    static Tensor uniform(const std::vector<std::size_t>& shape, Rng& rng, double lo, double hi);
    /// n x n identity.
    static Tensor eye(std::size_t n);

    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    /// Rows/cols of a rank-2 tensor; a rank-1 tensor counts as one row.
    std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 1); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

    /// Scalar value of a single-element tensor.
    double item() const;

    Tensor& operator+=(const Tensor& o);
    Tensor& operator*=(double s);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Value-level kernels shared by the forward and backward passes.
// matmul treats ta/tb as implicit transposes of a and b.
Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);
Tensor add(const Tensor& a, const Tensor& b);      // equal shapes, or matrix + row vector
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);      // elementwise
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sum(const Tensor& a);                       // all elements -> rank 0
Tensor mean(const Tensor& a);
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor row_l2_norm(const Tensor& a);               // [N x D] -> [N x 1]
Tensor log_sum_exp(const Tensor& a);               // rank 1 -> rank 0, rank 2 -> [N x 1] per row

double l2_norm(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);

}  // namespace xflowdg
