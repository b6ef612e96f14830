#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "creadiff/errors.hpp"

namespace creadiff {

// Dense row-major tensor of doubles. Images use NHWC order
// (batch, height, width, channels); matrices are (rows, cols).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // NHWC element access for 4-D tensors.
    double& at(int n, int y, int x, int c) {
        return data_[idx4(n, y, x, c)];
    }
    const double& at(int n, int y, int x, int c) const {
        return data_[idx4(n, y, x, c)];
    }
    std::size_t idx4(int n, int y, int x, int c) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c;
    }

    double& at2(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
    double at2(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    Tensor reshaped(std::vector<int> new_shape) const;

    void fill(double v);
    bool all_finite() const;
    double min() const;
    double max() const;

    std::string shape_str() const;

    // Returns image i of an NHWC batch as a (1, H, W, C) tensor.
    Tensor slice_batch(int i) const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& where);

// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y);

// Matrix helpers on (rows, cols) tensors.
Tensor matmul(const Tensor& a, const Tensor& b);       // a(m,k) * b(k,n)
Tensor matmul_tb(const Tensor& a, const Tensor& b);    // a(m,k) * b(n,k)^T
Tensor matmul_ta(const Tensor& a, const Tensor& b);    // a(k,m)^T * b(k,n)

// Numerically stable softmax / log-sum-exp over a plain vector.
std::vector<double> softmax(const std::vector<double>& logits);
double log_sum_exp(const std::vector<double>& logits);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& a);
double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace creadiff
