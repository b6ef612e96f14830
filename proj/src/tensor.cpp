#include "creadiff/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace creadiff {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (int d : shape_) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
        n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, fill);
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
    std::size_t n = 1;
    for (int d : new_shape) n *= static_cast<std::size_t>(d);
    if (n != data_.size()) {
        throw ShapeError("reshape from " + shape_str() + " changes element count");
    }
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Tensor::max() const { return *std::max_element(data_.begin(), data_.end()); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << ")";
    return os.str();
}

Tensor Tensor::slice_batch(int i) const {
    if (ndim() != 4) throw ShapeError("slice_batch expects a 4-D tensor, got " + shape_str());
    if (i < 0 || i >= shape_[0]) throw RangeError("batch index " + std::to_string(i) + " out of range");
    Tensor out({1, shape_[1], shape_[2], shape_[3]});
    const std::size_t stride = out.size();
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(stride) * i,
              data_.begin() + static_cast<std::ptrdiff_t>(stride) * (i + 1), out.data());
    return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& where) {
    if (!a.same_shape(b)) {
        throw ShapeError(where + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
    require_same_shape(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw ShapeError("matmul: " + a.shape_str() + " * " + b.shape_str());
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = a.at2(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out.at2(i, j) += av * b.at2(p, j);
        }
    }
    return out;
}

Tensor matmul_tb(const Tensor& a, const Tensor& b) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) throw ShapeError("matmul_tb: " + a.shape_str() + " * " + b.shape_str() + "^T");
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a.at2(i, p) * b.at2(j, p);
            out.at2(i, j) = s;
        }
    }
    return out;
}

Tensor matmul_ta(const Tensor& a, const Tensor& b) {
    const int k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw ShapeError("matmul_ta: " + a.shape_str() + "^T * " + b.shape_str());
    Tensor out({m, n});
    for (int p = 0; p < k; ++p) {
        for (int i = 0; i < m; ++i) {
            const double av = a.at2(p, i);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out.at2(i, j) += av * b.at2(p, j);
        }
    }
    return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

double log_sum_exp(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    return m + std::log(z);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw ShapeError("euclidean_distance: dimension mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw DomainError("cosine_similarity: zero-norm vector");
    return dot(a, b) / (na * nb);
}

}  // namespace creadiff
