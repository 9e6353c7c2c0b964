// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace flowsteer {

using Dims = std::vector<std::size_t>;

std::size_t element_count(const Dims& dims);
std::string dims_to_string(const Dims& dims);

/// Dense row-major array of doubles. Images use dims {channels, height, width}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Dims dims, double fill = 0.0);
    Tensor(Dims dims, std::vector<double> data);

    static Tensor image(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0) {
        return Tensor(Dims{channels, height, width}, fill);
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // Image accessors; valid for rank-3 tensors only.
    std::size_t channels() const { return dims_.at(0); }
    std::size_t height() const { return dims_.at(1); }
    std::size_t width() const { return dims_.at(2); }
    double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }

    bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
    bool is_image() const noexcept { return dims_.size() == 3 && (dims_[0] == 1 || dims_[0] == 3); }
    bool all_finite() const noexcept;

    Tensor reshaped(Dims dims) const;

    Tensor& operator+=(const Tensor& rhs);
    Tensor& operator-=(const Tensor& rhs);
    Tensor& operator*=(double s) noexcept;

    bool operator==(const Tensor& rhs) const noexcept = default;

private:
    Dims dims_;
    std::vector<double> data_;
};

Tensor operator+(Tensor lhs, const Tensor& rhs);
Tensor operator-(Tensor lhs, const Tensor& rhs);
Tensor operator*(Tensor lhs, double s);
Tensor operator*(double s, Tensor rhs);

/// Throws ShapeError naming `what` when the dims differ.
void require_dims(const Tensor& t, const Dims& expected, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// a*x + b*z, elementwise.
Tensor lincomb(double a, const Tensor& x, double b, const Tensor& z);

double norm_l2(const Tensor& t);
double norm_linf(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean(const Tensor& t);

}  // namespace flowsteer
