// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "denim/dncm.hpp"

namespace denim {

using Rgb = std::array<double, 3>;
using Lab = std::array<double, 3>;
using Xyz = std::array<double, 3>;

// sRGB (IEC 61966-2-1) with a D65 white.
double srgb_to_linear(double v);
double linear_to_srgb(double v);
Xyz srgb_to_xyz(const Rgb& rgb);
Rgb xyz_to_srgb(const Xyz& xyz);
Lab xyz_to_lab(const Xyz& xyz);
Xyz lab_to_xyz(const Lab& lab);
Lab srgb_to_lab(const Rgb& rgb);
Rgb lab_to_srgb(const Lab& lab);

/// CIEDE2000 with kL = kC = kH = 1.
double ciede2000(const Lab& a, const Lab& b);

/// Mean squared error on 8-bit-scaled values (inputs x 255).
double mse_image(const CanonicalImage& a, const CanonicalImage& b);

/// Mean per-pixel angle in degrees between RGB vectors; pixels where either
/// vector has norm below 1e-12 count as 0 degrees.
double mae_image(const CanonicalImage& a, const CanonicalImage& b);

/// Angle in degrees between two RGB vectors.
double angular_error_deg(const Rgb& a, const Rgb& b);

/// Mean CIEDE2000 over pixels of two sRGB images in [0, 1].
double de2000_image(const CanonicalImage& a, const CanonicalImage& b);

struct ImageMetrics {
    std::string name;
    double mse = 0.0;
    double mae_degrees = 0.0;
    double de2000 = 0.0;
};

struct Summary {
    double mean = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double q3 = 0.0;
};

/// Mean and type-7 (linear interpolation) quartiles.
Summary aggregate(std::span<const double> values);

/// Type-7 quantile at probability q in [0, 1].
double quantile(std::span<const double> values, double q);

struct MetricsReport {
    std::vector<ImageMetrics> per_image;
    Summary mse;
    Summary mae;
    Summary de2000;
};

ImageMetrics evaluate_pair(std::string name, const CanonicalImage& pred, const CanonicalImage& gt);
MetricsReport make_report(std::vector<ImageMetrics> per_image);

/// "image,mse,mae_deg,de2000" rows followed by a commented summary block.
std::string report_csv(const MetricsReport& report);
/// Aggregates as a JSON document.
std::string report_json(const MetricsReport& report);

}  // namespace denim
