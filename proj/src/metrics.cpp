// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace denim {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kRad = std::numbers::pi / 180.0;

constexpr double kRgbToXyz[3][3] = {
    {0.4124, 0.3576, 0.1805},
    {0.2126, 0.7152, 0.0722},
    {0.0193, 0.1192, 0.9505},
};

struct Inverse3 {
    double m[3][3];
};

Inverse3 invert(const double (&a)[3][3]) {
    Inverse3 r{};
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    r.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    r.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    r.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    r.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    r.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    r.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    r.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    r.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    r.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
    return r;
}

const Inverse3& xyz_to_rgb_matrix() {
    static const Inverse3 inv = invert(kRgbToXyz);
    return inv;
}

// Reference white is the image of RGB (1, 1, 1), so white maps to L=100, a=b=0.
constexpr Xyz kWhite = {0.4124 + 0.3576 + 0.1805, 0.2126 + 0.7152 + 0.0722, 0.0193 + 0.1192 + 0.9505};

constexpr double kEpsilon = 216.0 / 24389.0;  // (6/29)^3
constexpr double kKappa = 24389.0 / 27.0;

double lab_f(double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }

double lab_f_inv(double f) {
    const double t = f * f * f;
    return t > kEpsilon ? t : (116.0 * f - 16.0) / kKappa;
}

void check_dims(const CanonicalImage& a, const CanonicalImage& b, const char* what) {
    a.validate();
    b.validate();
    if (a.height != b.height || a.width != b.width)
        throw ShapeError(std::string(what) + ": image dimensions differ (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                         ")");
}

Rgb pixel(const CanonicalImage& img, std::size_t p) { return {img.data[3 * p], img.data[3 * p + 1], img.data[3 * p + 2]}; }

double hue_deg(double b, double a) {
    if (a == 0.0 && b == 0.0) return 0.0;
    double h = std::atan2(b, a) * kDeg;
    if (h < 0.0) h += 360.0;
    return h;
}

}  // namespace

double srgb_to_linear(double v) { return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4); }

double linear_to_srgb(double v) { return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055; }

Xyz srgb_to_xyz(const Rgb& rgb) {
    const Rgb lin = {srgb_to_linear(rgb[0]), srgb_to_linear(rgb[1]), srgb_to_linear(rgb[2])};
    Xyz out{};
    for (int i = 0; i < 3; ++i) out[i] = kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] + kRgbToXyz[i][2] * lin[2];
    return out;
}

Rgb xyz_to_srgb(const Xyz& xyz) {
    const auto& m = xyz_to_rgb_matrix().m;
    Rgb out{};
    for (int i = 0; i < 3; ++i) out[i] = linear_to_srgb(m[i][0] * xyz[0] + m[i][1] * xyz[1] + m[i][2] * xyz[2]);
    return out;
}

Lab xyz_to_lab(const Xyz& xyz) {
    const double fx = lab_f(xyz[0] / kWhite[0]);
    const double fy = lab_f(xyz[1] / kWhite[1]);
    const double fz = lab_f(xyz[2] / kWhite[2]);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Xyz lab_to_xyz(const Lab& lab) {
    const double fy = (lab[0] + 16.0) / 116.0;
    const double fx = fy + lab[1] / 500.0;
    const double fz = fy - lab[2] / 200.0;
    return {kWhite[0] * lab_f_inv(fx), kWhite[1] * lab_f_inv(fy), kWhite[2] * lab_f_inv(fz)};
}

Lab srgb_to_lab(const Rgb& rgb) { return xyz_to_lab(srgb_to_xyz(rgb)); }

Rgb lab_to_srgb(const Lab& lab) { return xyz_to_srgb(lab_to_xyz(lab)); }

double ciede2000(const Lab& lab1, const Lab& lab2) {
    const auto [L1, a1, b1] = lab1;
    const auto [L2, a2, b2] = lab2;
    const double pow25_7 = 6103515625.0;  // 25^7

    const double c1 = std::hypot(a1, b1);
    const double c2 = std::hypot(a2, b2);
    const double c_bar7 = std::pow(0.5 * (c1 + c2), 7.0);
    const double g = 0.5 * (1.0 - std::sqrt(c_bar7 / (c_bar7 + pow25_7)));
    const double a1p = (1.0 + g) * a1;
    const double a2p = (1.0 + g) * a2;
    const double c1p = std::hypot(a1p, b1);
    const double c2p = std::hypot(a2p, b2);
    const double h1p = hue_deg(b1, a1p);
    const double h2p = hue_deg(b2, a2p);

    const double dLp = L2 - L1;
    const double dCp = c2p - c1p;
    const double cc = c1p * c2p;
    double dhp = 0.0;
    if (cc != 0.0) {
        dhp = h2p - h1p;
        if (dhp > 180.0)
            dhp -= 360.0;
        else if (dhp < -180.0)
            dhp += 360.0;
    }
    const double dHp = 2.0 * std::sqrt(cc) * std::sin(0.5 * dhp * kRad);

    const double l_bar = 0.5 * (L1 + L2);
    const double c_bar_p = 0.5 * (c1p + c2p);
    double h_bar = h1p + h2p;
    if (cc != 0.0) {
        if (std::abs(h1p - h2p) <= 180.0)
            h_bar *= 0.5;
        else if (h1p + h2p < 360.0)
            h_bar = 0.5 * (h1p + h2p + 360.0);
        else
            h_bar = 0.5 * (h1p + h2p - 360.0);
    }

    const double t = 1.0 - 0.17 * std::cos((h_bar - 30.0) * kRad) + 0.24 * std::cos(2.0 * h_bar * kRad) +
                     0.32 * std::cos((3.0 * h_bar + 6.0) * kRad) - 0.20 * std::cos((4.0 * h_bar - 63.0) * kRad);
    const double d_theta = 30.0 * std::exp(-std::pow((h_bar - 275.0) / 25.0, 2.0));
    const double c_bar_p7 = std::pow(c_bar_p, 7.0);
    const double rc = 2.0 * std::sqrt(c_bar_p7 / (c_bar_p7 + pow25_7));
    const double l50 = (l_bar - 50.0) * (l_bar - 50.0);
    const double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
    const double sc = 1.0 + 0.045 * c_bar_p;
    const double sh = 1.0 + 0.015 * c_bar_p * t;
    const double rt = -std::sin(2.0 * d_theta * kRad) * rc;

    const double l_term = dLp / sl;
    const double c_term = dCp / sc;
    const double h_term = dHp / sh;
    return std::sqrt(l_term * l_term + c_term * c_term + h_term * h_term + rt * c_term * h_term);
}

double mse_image(const CanonicalImage& a, const CanonicalImage& b) {
    check_dims(a, b, "mse_image");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double diff = 255.0 * a.data[i] - 255.0 * b.data[i];
        acc += diff * diff;
    }
    return acc / static_cast<double>(a.data.size());
}

double angular_error_deg(const Rgb& a, const Rgb& b) {
    const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    // atan2(|a x b|, a . b) equals arccos of the normalized dot product but
    // stays accurate for nearly parallel vectors.
    const double cx = a[1] * b[2] - a[2] * b[1];
    const double cy = a[2] * b[0] - a[0] * b[2];
    const double cz = a[0] * b[1] - a[1] * b[0];
    const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot) * kDeg;
}

double mae_image(const CanonicalImage& a, const CanonicalImage& b) {
    check_dims(a, b, "mae_image");
    double acc = 0.0;
    for (std::size_t p = 0; p < a.pixels(); ++p) acc += angular_error_deg(pixel(a, p), pixel(b, p));
    return acc / static_cast<double>(a.pixels());
}

double de2000_image(const CanonicalImage& a, const CanonicalImage& b) {
    check_dims(a, b, "de2000_image");
    double acc = 0.0;
    for (std::size_t p = 0; p < a.pixels(); ++p) acc += ciede2000(srgb_to_lab(pixel(a, p)), srgb_to_lab(pixel(b, p)));
    return acc / static_cast<double>(a.pixels());
}

double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: no values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary aggregate(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("aggregate: empty list");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    return {sum / static_cast<double>(sorted.size()), quantile(sorted, 0.25), quantile(sorted, 0.5),
            quantile(sorted, 0.75)};
}

ImageMetrics evaluate_pair(std::string name, const CanonicalImage& pred, const CanonicalImage& gt) {
    return {std::move(name), mse_image(pred, gt), mae_image(pred, gt), de2000_image(pred, gt)};
}

MetricsReport make_report(std::vector<ImageMetrics> per_image) {
    if (per_image.empty()) throw std::invalid_argument("make_report: no images");
    MetricsReport r;
    std::vector<double> mse, mae, de;
    for (const auto& m : per_image) {
        mse.push_back(m.mse);
        mae.push_back(m.mae_degrees);
        de.push_back(m.de2000);
    }
    r.mse = aggregate(mse);
    r.mae = aggregate(mae);
    r.de2000 = aggregate(de);
    r.per_image = std::move(per_image);
    return r;
}

std::string report_csv(const MetricsReport& report) {
    std::ostringstream os;
    os.precision(10);
    os << "image,mse,mae_deg,de2000\n";
    for (const auto& m : report.per_image) os << m.name << ',' << m.mse << ',' << m.mae_degrees << ',' << m.de2000 << '\n';
    os << "\nstatistic,mse,mae_deg,de2000\n";
    auto row = [&](const char* label, auto field) {
        os << label << ',' << report.mse.*field << ',' << report.mae.*field << ',' << report.de2000.*field << '\n';
    };
    row("mean", &Summary::mean);
    row("q1", &Summary::q1);
    row("q2", &Summary::q2);
    row("q3", &Summary::q3);
    return os.str();
}

std::string report_json(const MetricsReport& report) {
    auto summary = [](const Summary& s) {
        return nlohmann::json{{"mean", s.mean}, {"q1", s.q1}, {"q2", s.q2}, {"q3", s.q3}};
    };
    nlohmann::json doc;
    doc["images"] = report.per_image.size();
    doc["mse"] = summary(report.mse);
    doc["mae_deg"] = summary(report.mae);
    doc["de2000"] = summary(report.de2000);
    return doc.dump(2) + "\n";
}

}  // namespace denim
