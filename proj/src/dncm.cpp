// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/dncm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "denim/rng.hpp"

namespace denim {

namespace {

constexpr std::size_t kTilePixels = 1024;

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << "DncmParams: " << name << " is " << m.shape_string() << ", expected " << rows << "x" << cols;
        throw ShapeError(os.str());
    }
}

// Evaluates in_row * chain[0] * chain[1] * ... left to right for every pixel,
// tile by tile. A pixel's result depends only on its own row, never on the
// tiling or the thread count.
void chain_pixels(std::span<const double> in, std::size_t pixels, std::size_t in_channels,
                  std::span<const Matrix* const> chain, std::span<double> out, unsigned threads) {
    const std::size_t tiles = (pixels + kTilePixels - 1) / kTilePixels;
    parallel_for(tiles, threads, [&](std::size_t t0, std::size_t t1) {
        for (std::size_t t = t0; t < t1; ++t) {
            const std::size_t begin = t * kTilePixels;
            const std::size_t count = std::min(kTilePixels, pixels - begin);
            Matrix cur(count, in_channels,
                       std::vector<double>(in.begin() + begin * in_channels, in.begin() + (begin + count) * in_channels));
            for (const Matrix* m : chain) cur = matmul(cur, *m);
            std::copy(cur.storage().begin(), cur.storage().end(), out.begin() + begin * cur.cols());
        }
    });
}

void map_pixels(std::span<const double> in, std::size_t pixels, std::size_t in_channels, const Matrix& map,
                std::span<double> out, unsigned threads) {
    if (map.rows() != in_channels || map.cols() != 3)
        throw ShapeError("apply_color_map: map is " + map.shape_string() + " but input has " +
                         std::to_string(in_channels) + " channels");
    const double* m = map.data().data();
    parallel_for(pixels, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const double* x = in.data() + p * in_channels;
            double r = 0.0, g = 0.0, b = 0.0;
            for (std::size_t c = 0; c < in_channels; ++c) {
                const double v = x[c];
                r += v * m[3 * c];
                g += v * m[3 * c + 1];
                b += v * m[3 * c + 2];
            }
            double* y = out.data() + 3 * p;
            y[0] = r;
            y[1] = g;
            y[2] = b;
        }
    });
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    const double a = std::sqrt(1.0 / static_cast<double>(rows));
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = rng.uniform(-a, a);
    return m;
}

}  // namespace

CanonicalImage::CanonicalImage(std::size_t h, std::size_t w, double fill) : height(h), width(w), data(h * w * 3, fill) {
    validate();
}

CanonicalImage::CanonicalImage(std::size_t h, std::size_t w, std::vector<double> values)
    : height(h), width(w), data(std::move(values)) {
    validate();
}

void CanonicalImage::validate() const {
    if (height == 0 || width == 0) throw ShapeError("CanonicalImage: empty spatial extent");
    if (data.size() != height * width * 3) {
        std::ostringstream os;
        os << "CanonicalImage: " << data.size() << " values for " << height << "x" << width << "x3";
        throw ShapeError(os.str());
    }
}

ImageStack CanonicalImage::to_stack() const { return ImageStack(height, width, 1, data); }

CanonicalImage CanonicalImage::from_stack(const ImageStack& s) {
    if (s.settings != 1) throw ShapeError("CanonicalImage: stack has " + std::to_string(s.channels()) + " channels");
    return CanonicalImage(s.height, s.width, s.data);
}

LatentCode::LatentCode(Matrix m) : d(std::move(m)) {
    if (d.rows() != d.cols()) throw ShapeError("LatentCode: d must be square, got " + d.shape_string());
}

void DncmParams::validate() const {
    if (k == 0 || n_settings == 0) throw ShapeError("DncmParams: k and N must be positive");
    expect_shape(pc, 3 * n_settings, k, "Pc");
    expect_shape(qc, k, k, "Qc");
    expect_shape(rc, k, 3, "Rc");
    expect_shape(pa, 3, k, "Pa");
    expect_shape(qa, k, k, "Qa");
    expect_shape(ra, k, 3, "Ra");
}

std::size_t DncmParams::parameter_count() const {
    return pc.size() + qc.size() + rc.size() + pa.size() + qa.size() + ra.size();
}

DncmParams init_params(std::size_t k, std::size_t n_settings, std::uint64_t seed) {
    if (k < 3) throw std::invalid_argument("init_params: k must be at least 3, got " + std::to_string(k));
    if (n_settings == 0) throw std::invalid_argument("init_params: at least one setting required");
    DncmParams p;
    p.k = k;
    p.n_settings = n_settings;
    p.pc = random_matrix(3 * n_settings, k, seed, 0);
    p.qc = random_matrix(k, k, seed, 1);
    p.rc = random_matrix(k, 3, seed, 2);
    p.pa = random_matrix(3, k, seed, 3);
    p.qa = random_matrix(k, k, seed, 4);
    p.ra = random_matrix(k, 3, seed, 5);
    return p;
}

DncmParams identity_params(std::size_t k, std::size_t n_settings) {
    if (k < 3) throw std::invalid_argument("identity_params: k must be at least 3");
    DncmParams p;
    p.k = k;
    p.n_settings = n_settings;
    p.pc = Matrix(3 * n_settings, k);
    p.rc = Matrix(k, 3);
    p.pa = Matrix(3, k);
    p.ra = Matrix(k, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        p.pc(i, i) = 1.0;
        p.rc(i, i) = 1.0;
        p.pa(i, i) = 1.0;
        p.ra(i, i) = 1.0;
    }
    p.qc = Matrix::identity(k);
    p.qa = Matrix::identity(k);
    return p;
}

CanonicalImage dncm_c(const ImageStack& img, const LatentCode& d, const DncmParams& params, unsigned threads) {
    img.validate();
    if (img.settings != params.n_settings || params.pc.rows() != img.channels())
        throw ShapeError("dncm_c: stack has " + std::to_string(img.channels()) + " channels but Pc is " +
                         params.pc.shape_string());
    if (d.k() != params.k)
        throw ShapeError("dncm_c: latent code is " + d.d.shape_string() + " but k = " + std::to_string(params.k));
    CanonicalImage out(img.height, img.width);
    const Matrix* chain[] = {&params.pc, &d.d, &params.qc, &params.rc};
    chain_pixels(img.data, img.pixels(), img.channels(), chain, out.data, threads);
    return out;
}

CanonicalImage dncm_a(const CanonicalImage& canon, const DncmParams& params, unsigned threads) {
    canon.validate();
    if (params.pa.rows() != 3) throw ShapeError("dncm_a: Pa is " + params.pa.shape_string());
    CanonicalImage out(canon.height, canon.width);
    const Matrix* chain[] = {&params.pa, &params.qa, &params.ra};
    chain_pixels(canon.data, canon.pixels(), 3, chain, out.data, threads);
    return out;
}

Matrix precompose_c(const LatentCode& d, const DncmParams& params) {
    if (d.k() != params.k)
        throw ShapeError("precompose_c: latent code is " + d.d.shape_string() + " but k = " + std::to_string(params.k));
    return matmul(matmul(matmul(params.pc, d.d), params.qc), params.rc);
}

Matrix precompose_a(const DncmParams& params) { return matmul(matmul(params.pa, params.qa), params.ra); }

CanonicalImage apply_color_map(const ImageStack& img, const Matrix& map, unsigned threads) {
    img.validate();
    CanonicalImage out(img.height, img.width);
    map_pixels(img.data, img.pixels(), img.channels(), map, out.data, threads);
    return out;
}

CanonicalImage apply_color_map(const CanonicalImage& img, const Matrix& map, unsigned threads) {
    img.validate();
    CanonicalImage out(img.height, img.width);
    map_pixels(img.data, img.pixels(), 3, map, out.data, threads);
    return out;
}

std::uint64_t naive_c_muls_per_pixel(std::size_t k, std::size_t n_settings) {
    return mul_count({{1, 3 * n_settings}, {3 * n_settings, k}, {k, k}, {k, k}, {k, 3}});
}

std::uint64_t precomposed_c_muls_per_pixel(std::size_t n_settings) {
    return mul_count({{1, 3 * n_settings}, {3 * n_settings, 3}});
}

std::uint64_t naive_a_muls_per_pixel(std::size_t k) { return mul_count({{1, 3}, {3, k}, {k, k}, {k, 3}}); }

std::uint64_t precomposed_a_muls_per_pixel() { return mul_count({{1, 3}, {3, 3}}); }

}  // namespace denim
