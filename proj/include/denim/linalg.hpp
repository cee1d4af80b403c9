// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace denim {

/// Raised on any shape or dimension contract violation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    Matrix transposed() const;
    std::string shape_string() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// H x W image holding N white-balance renditions (3N channels per pixel).
/// Channels are interleaved per pixel: setting 0 (R,G,B), setting 1 (R,G,B), ...
struct ImageStack {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t settings = 0;
    std::vector<double> data;

    ImageStack() = default;
    ImageStack(std::size_t h, std::size_t w, std::size_t n, double fill = 0.0);
    ImageStack(std::size_t h, std::size_t w, std::size_t n, std::vector<double> values);

    std::size_t channels() const { return 3 * settings; }
    std::size_t pixels() const { return height * width; }

    double& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * channels() + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * width + x) * channels() + c]; }

    void validate() const;
    bool operator==(const ImageStack& other) const = default;
};

/// HW x C matrix, one row per pixel in row-major pixel order.
using PixelMatrix = Matrix;

Matrix matmul(const Matrix& a, const Matrix& b, unsigned threads = 1);

/// c = a * b into preallocated storage; c must already be (a.rows x b.cols).
void matmul_into(const Matrix& a, const Matrix& b, Matrix& c, unsigned threads = 1);

Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

PixelMatrix unfold(const ImageStack& img);
ImageStack fold(const PixelMatrix& pm, std::size_t height, std::size_t width, std::size_t settings);
ImageStack fold(PixelMatrix&& pm, std::size_t height, std::size_t width, std::size_t settings);

/// Standard normal CDF.
double normal_cdf(double x);

/// Exact GeLU, x * Phi(x).
double gelu(double x);
/// Tanh approximation of GeLU. Only used to bound its distance from the exact form.
double gelu_tanh(double x);
/// d/dx of the exact GeLU.
double gelu_derivative(double x);

Matrix gelu(const Matrix& x);

struct MatShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Scalar multiplications needed to evaluate a matrix chain left to right.
std::uint64_t mul_count(std::span<const MatShape> chain);
std::uint64_t mul_count(std::initializer_list<MatShape> chain);

/// Matmul that tallies the scalar multiplications it performs.
class CountingMatmul {
public:
    Matrix operator()(const Matrix& a, const Matrix& b);
    std::uint64_t count() const { return count_; }
    void reset() { count_ = 0; }

private:
    std::uint64_t count_ = 0;
};

unsigned default_threads();

/// Runs fn(begin, end) over [0, n) split into contiguous ranges, one per worker.
/// Each index belongs to exactly one range.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn);

}  // namespace denim

#include "denim/parallel.ipp"
