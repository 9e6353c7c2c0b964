// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "flowsteer/errors.hpp"

namespace flowsteer {

std::size_t element_count(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_to_string(const Dims& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Dims dims, double fill) : dims_(std::move(dims)) {
    for (auto d : dims_) {
        if (d == 0) throw ShapeError("tensor extents must be positive, got " + dims_to_string(dims_));
    }
    data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(Dims dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
    for (auto d : dims_) {
        if (d == 0) throw ShapeError("tensor extents must be positive, got " + dims_to_string(dims_));
    }
    if (element_count(dims_) != data_.size()) {
        throw ShapeError("tensor dims " + dims_to_string(dims_) + " do not match " +
                         std::to_string(data_.size()) + " values");
    }
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Dims dims) const {
    return Tensor(std::move(dims), data_);
}

Tensor& Tensor::operator+=(const Tensor& rhs) {
    require_same_shape(*this, rhs, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& rhs) {
    require_same_shape(*this, rhs, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) noexcept {
    for (auto& v : data_) v *= s;
    return *this;
}

Tensor operator+(Tensor lhs, const Tensor& rhs) { return lhs += rhs; }
Tensor operator-(Tensor lhs, const Tensor& rhs) { return lhs -= rhs; }
Tensor operator*(Tensor lhs, double s) { return lhs *= s; }
Tensor operator*(double s, Tensor rhs) { return rhs *= s; }

void require_dims(const Tensor& t, const Dims& expected, const char* what) {
    if (t.dims() != expected) {
        throw ShapeError(std::string(what) + ": expected dims " + dims_to_string(expected) + ", got " +
                         dims_to_string(t.dims()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": dims " + dims_to_string(a.dims()) + " vs " +
                         dims_to_string(b.dims()));
    }
}

Tensor lincomb(double a, const Tensor& x, double b, const Tensor& z) {
    require_same_shape(x, z, "lincomb");
    Tensor out(x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * z[i];
    return out;
}

double norm_l2(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    return std::sqrt(s);
}

double norm_linf(const Tensor& t) {
    double m = 0.0;
    for (double v : t.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double mean(const Tensor& t) {
    if (t.empty()) return 0.0;
    return std::accumulate(t.values().begin(), t.values().end(), 0.0) / static_cast<double>(t.size());
}

}  // namespace flowsteer
