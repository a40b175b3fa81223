#include "xflowdg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "xflowdg/errors.hpp"

namespace xflowdg {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_rank(const std::vector<std::size_t>& shape) {
    if (shape.size() > 2) throw DimensionError("tensor rank > 2 not supported");
}

}  // namespace

Tensor Tensor::scalar(double v) { return from_data({}, {v}); }

Tensor Tensor::zeros(const std::vector<std::size_t>& shape) {
    check_rank(shape);
    Tensor t;
    t.shape_ = shape;
    t.data_.assign(shape_product(shape), 0.0);
    return t;
}

Tensor Tensor::full(const std::vector<std::size_t>& shape, double v) {
    Tensor t = zeros(shape);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
}

Tensor Tensor::vector(std::initializer_list<double> v) {
    Tensor t;
    t.shape_ = {v.size()};
    t.data_.assign(v.begin(), v.end());
    return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    Tensor t;
    const std::size_t r = rows.size();
    const std::size_t c = rows.begin()->size();
    t.shape_ = {r, c};
    t.data_.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix initializer");
        t.data_.insert(t.data_.end(), row.begin(), row.end());
    }
    return t;
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
    check_rank(shape);
    if (shape_product(shape) != data.size())
        throw DimensionError("data length does not match shape product");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::normal(const std::vector<std::size_t>& shape, Rng& rng, double stddev) {
    Tensor t = zeros(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.normal();
    return t;
}

Tensor Tensor::uniform(const std::vector<std::size_t>& shape, Rng& rng, double lo, double hi) {
    Tensor t = zeros(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::eye(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

double Tensor::item() const {
    if (data_.size() != 1) throw DimensionError("item() on tensor of size " + std::to_string(size()));
    return data_[0];
}

Tensor& Tensor::operator+=(const Tensor& o) {
    if (!same_shape(o)) throw DimensionError("+= shape mismatch " + shape_str() + " vs " + o.shape_str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

namespace {

void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw DimensionError(std::string(what) + " requires rank-2 tensor, got " + t.shape_str());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = ta ? a.cols() : a.rows();
    const std::size_t k = ta ? a.rows() : a.cols();
    const std::size_t kb = tb ? b.cols() : b.rows();
    const std::size_t n = tb ? b.rows() : b.cols();
    if (k != kb)
        throw DimensionError("matmul inner dimension mismatch " + a.shape_str() + " vs " + b.shape_str());

    Tensor c = Tensor::zeros({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    const std::size_t lda = a.cols();
    const std::size_t ldb = b.cols();

    if (!ta && !tb) {
        // C[i,:] += A[i,k] * B[k,:]
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = pc + i * n;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = pa[i * lda + kk];
                const double* brow = pb + kk * ldb;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!ta && tb) {
        // C[i,j] = dot(A[i,:], B[j,:])
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = pa + i * lda;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = pb + j * ldb;
                double acc = 0.0;
                for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                crow[j] = acc;
            }
        }
    } else if (ta && !tb) {
        // C[i,:] += A[k,i] * B[k,:]
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double* arow = pa + kk * lda;
            const double* brow = pb + kk * ldb;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = arow[i];
                double* crow = pc + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        // C[i,j] = sum_k A[k,i] * B[j,k]
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = pb + j * ldb;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double bv = brow[kk];
                const double* arow = pa + kk * lda;
                for (std::size_t i = 0; i < m; ++i) pc[i * n + j] += arow[i] * bv;
            }
        }
    }
    return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.same_shape(b)) {
        Tensor c = a;
        c += b;
        return c;
    }
    // row-vector-over-matrix broadcast (bias add)
    if (a.rank() == 2 && b.rank() == 1 && b.size() == a.cols()) {
        Tensor c = a;
        const std::size_t n = a.cols();
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += b[j];
        }
        return c;
    }
    throw DimensionError("add shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("sub shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("mul shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
    return c;
}

Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    c *= s;
    return c;
}

Tensor relu(const Tensor& a) {
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = c[i] > 0.0 ? c[i] : 0.0;
    return c;
}

Tensor tanh_t(const Tensor& a) {
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::tanh(c[i]);
    return c;
}

Tensor exp_t(const Tensor& a) {
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::exp(c[i]);
    return c;
}

Tensor log_t(const Tensor& a) {
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!(c[i] > 0.0))
            throw NumericError("log: non-positive input " + std::to_string(c[i]));
        c[i] = std::log(c[i]);
    }
    return c;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
    return Tensor::scalar(acc);
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw DimensionError("mean of empty tensor");
    return Tensor::scalar(sum(a).item() / static_cast<double>(a.size()));
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    if (a.rank() == 1 && b.rank() == 1) {
        if (axis != 0) throw DimensionError("concat of rank-1 tensors requires axis 0");
        Tensor c = Tensor::zeros({a.size() + b.size()});
        std::copy(a.data(), a.data() + a.size(), c.data());
        std::copy(b.data(), b.data() + b.size(), c.data() + a.size());
        return c;
    }
    require_rank2(a, "concat");
    require_rank2(b, "concat");
    if (axis == 0) {
        if (a.cols() != b.cols())
            throw DimensionError("concat axis 0 column mismatch " + a.shape_str() + " vs " + b.shape_str());
        Tensor c = Tensor::zeros({a.rows() + b.rows(), a.cols()});
        std::copy(a.data(), a.data() + a.size(), c.data());
        std::copy(b.data(), b.data() + b.size(), c.data() + a.size());
        return c;
    }
    if (axis == 1) {
        if (a.rows() != b.rows())
            throw DimensionError("concat axis 1 row mismatch " + a.shape_str() + " vs " + b.shape_str());
        Tensor c = Tensor::zeros({a.rows(), a.cols() + b.cols()});
        for (std::size_t i = 0; i < a.rows(); ++i) {
            std::copy(a.data() + i * a.cols(), a.data() + (i + 1) * a.cols(), c.data() + i * c.cols());
            std::copy(b.data() + i * b.cols(), b.data() + (i + 1) * b.cols(),
                      c.data() + i * c.cols() + a.cols());
        }
        return c;
    }
    throw DimensionError("concat axis must be 0 or 1");
}

Tensor row_l2_norm(const Tensor& a) {
    require_rank2(a, "row_l2_norm");
    Tensor c = Tensor::zeros({a.rows(), 1});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        const double* row = a.data() + i * a.cols();
        for (std::size_t j = 0; j < a.cols(); ++j) acc += row[j] * row[j];
        c[i] = std::sqrt(acc);
    }
    return c;
}

Tensor log_sum_exp(const Tensor& a) {
    if (a.rank() == 1) {
        if (a.size() == 0) throw DimensionError("log_sum_exp of empty tensor");
        double mx = a[0];
        for (std::size_t i = 1; i < a.size(); ++i) mx = std::max(mx, a[i]);
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::exp(a[i] - mx);
        return Tensor::scalar(mx + std::log(acc));
    }
    require_rank2(a, "log_sum_exp");
    Tensor c = Tensor::zeros({a.rows(), 1});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.data() + i * a.cols();
        double mx = row[0];
        for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, row[j]);
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += std::exp(row[j] - mx);
        c[i] = mx + std::log(acc);
    }
    return c;
}

double l2_norm(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * a[i];
    return std::sqrt(acc);
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("dot size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace xflowdg
