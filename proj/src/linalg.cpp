// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/linalg.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace denim {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw ShapeError("Matrix: dimensions must be positive");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw ShapeError("Matrix: dimensions must be positive");
    if (data_.size() != rows * cols) {
        std::ostringstream os;
        os << "Matrix: " << data_.size() << " values for shape " << rows << "x" << cols;
        throw ShapeError(os.str());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

std::string Matrix::shape_string() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

ImageStack::ImageStack(std::size_t h, std::size_t w, std::size_t n, double fill)
    : height(h), width(w), settings(n), data(h * w * 3 * n, fill) {
    validate();
}

ImageStack::ImageStack(std::size_t h, std::size_t w, std::size_t n, std::vector<double> values)
    : height(h), width(w), settings(n), data(std::move(values)) {
    validate();
}

void ImageStack::validate() const {
    if (height == 0 || width == 0) throw ShapeError("ImageStack: empty spatial extent");
    if (settings == 0) throw ShapeError("ImageStack: at least one setting required");
    if (data.size() != height * width * 3 * settings) {
        std::ostringstream os;
        os << "ImageStack: " << data.size() << " values for " << height << "x" << width << "x" << 3 * settings;
        throw ShapeError(os.str());
    }
}

void matmul_into(const Matrix& a, const Matrix& b, Matrix& c, unsigned threads) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
    if (c.rows() != a.rows() || c.cols() != b.cols())
        throw ShapeError("matmul: output is " + c.shape_string() + ", expected " + std::to_string(a.rows()) + "x" +
                         std::to_string(b.cols()));
    const std::size_t inner = a.cols();
    const std::size_t n = b.cols();
    const double* bp = b.data().data();
    // Each output row is accumulated by a single worker in ascending inner
    // index order, so the result does not depend on the thread count.
    parallel_for(a.rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double* ai = a.row(i).data();
            double* ci = c.row(i).data();
            for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
            for (std::size_t p = 0; p < inner; ++p) {
                const double s = ai[p];
                const double* bk = bp + p * n;
                for (std::size_t j = 0; j < n; ++j) ci[j] += s * bk[j];
            }
        }
    });
}

Matrix matmul(const Matrix& a, const Matrix& b, unsigned threads) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
    Matrix c(a.rows(), b.cols());
    matmul_into(a, b, c, threads);
    return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("add: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.storage()[i] += b.storage()[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.storage()) v *= s;
    return c;
}

PixelMatrix unfold(const ImageStack& img) {
    img.validate();
    return Matrix(img.pixels(), img.channels(), img.data);
}

ImageStack fold(const PixelMatrix& pm, std::size_t height, std::size_t width, std::size_t settings) {
    return fold(PixelMatrix(pm), height, width, settings);
}

ImageStack fold(PixelMatrix&& pm, std::size_t height, std::size_t width, std::size_t settings) {
    if (pm.rows() != height * width || pm.cols() != 3 * settings) {
        std::ostringstream os;
        os << "fold: pixel matrix " << pm.shape_string() << " does not fit " << height << "x" << width << " with "
           << settings << " settings";
        throw ShapeError(os.str());
    }
    return ImageStack(height, width, settings, std::move(pm.storage()));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gelu(double x) { return x * normal_cdf(x); }

double gelu_tanh(double x) {
    const double c = std::sqrt(2.0 / std::numbers::pi);
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

double gelu_derivative(double x) {
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return normal_cdf(x) + x * pdf;
}

Matrix gelu(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.storage()) v = gelu(v);
    return y;
}

std::uint64_t mul_count(std::span<const MatShape> chain) {
    if (chain.size() < 2) throw ShapeError("mul_count: chain needs at least two matrices");
    std::uint64_t total = 0;
    const std::size_t rows = chain.front().rows;
    std::size_t cols = chain.front().cols;
    for (std::size_t i = 1; i < chain.size(); ++i) {
        if (chain[i].rows != cols) {
            std::ostringstream os;
            os << "mul_count: link " << i << " is " << chain[i].rows << "x" << chain[i].cols << " but running product has "
               << cols << " columns";
            throw ShapeError(os.str());
        }
        total += static_cast<std::uint64_t>(rows) * cols * chain[i].cols;
        cols = chain[i].cols;
    }
    return total;
}

std::uint64_t mul_count(std::initializer_list<MatShape> chain) {
    return mul_count(std::span<const MatShape>(chain.begin(), chain.size()));
}

Matrix CountingMatmul::operator()(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) {
                acc += a(i, p) * b(p, j);
                ++count_;
            }
            c(i, j) = acc;
        }
    return c;
}

unsigned default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

}  // namespace denim
