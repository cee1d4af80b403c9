// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <cstdint>

#include "denim/linalg.hpp"

namespace denim {

/// Three-channel RGB image, channel-interleaved, row-major pixels.
/// Values are not clamped; clamping happens only when encoding to 8 bits.
struct CanonicalImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    CanonicalImage() = default;
    CanonicalImage(std::size_t h, std::size_t w, double fill = 0.0);
    CanonicalImage(std::size_t h, std::size_t w, std::vector<double> values);

    std::size_t pixels() const { return height * width; }
    double& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * 3 + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * width + x) * 3 + c]; }

    /// View as a single-setting stack (copies).
    ImageStack to_stack() const;
    static CanonicalImage from_stack(const ImageStack& s);

    void validate() const;
    bool operator==(const CanonicalImage& other) const = default;
};

/// The k x k image-adaptive matrix injected between the canonical projections.
struct LatentCode {
    Matrix d;

    LatentCode() = default;
    explicit LatentCode(Matrix m);
    std::size_t k() const { return d.rows(); }
};

/// Learnable projections of both mapping stages. The canonical set (pc, qc, rc)
/// and the AWB set (pa, qa, ra) never share storage.
struct DncmParams {
    std::size_t k = 0;
    std::size_t n_settings = 0;
    Matrix pc;  // 3N x k
    Matrix qc;  // k x k
    Matrix rc;  // k x 3
    Matrix pa;  // 3 x k
    Matrix qa;  // k x k
    Matrix ra;  // k x 3

    void validate() const;
    std::size_t parameter_count() const;
    bool operator==(const DncmParams& other) const = default;
};

/// Uniform(-a, a), a = sqrt(1 / fan_in), fan_in = rows, one CounterRng stream
/// per matrix (streams 0..5 in the order pc, qc, rc, pa, qa, ra).
DncmParams init_params(std::size_t k, std::size_t n_settings, std::uint64_t seed);

/// Parameters for which both stages pass setting 0 through unchanged.
DncmParams identity_params(std::size_t k, std::size_t n_settings);

/// Canonical-form mapping, evaluated as the full chain x * Pc * d * Qc * Rc per pixel.
CanonicalImage dncm_c(const ImageStack& img, const LatentCode& d, const DncmParams& params, unsigned threads = 1);

/// AWB mapping, evaluated as the full chain x * Pa * Qa * Ra per pixel.
CanonicalImage dncm_a(const CanonicalImage& canon, const DncmParams& params, unsigned threads = 1);

/// Pc * d * Qc * Rc, a 3N x 3 matrix.
Matrix precompose_c(const LatentCode& d, const DncmParams& params);

/// Pa * Qa * Ra, a 3 x 3 matrix.
Matrix precompose_a(const DncmParams& params);

/// Per-pixel x * map for a (3N x 3) map.
CanonicalImage apply_color_map(const ImageStack& img, const Matrix& map, unsigned threads = 1);
CanonicalImage apply_color_map(const CanonicalImage& img, const Matrix& map, unsigned threads = 1);

/// Per-pixel multiplication counts of both evaluation routes.
std::uint64_t naive_c_muls_per_pixel(std::size_t k, std::size_t n_settings);
std::uint64_t precomposed_c_muls_per_pixel(std::size_t n_settings);
std::uint64_t naive_a_muls_per_pixel(std::size_t k);
std::uint64_t precomposed_a_muls_per_pixel();

}  // namespace denim
