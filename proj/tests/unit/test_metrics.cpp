// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "denim/metrics.hpp"
#include "support/oracles.hpp"

using namespace denim;
using namespace denim::testing;

namespace {

struct ConformancePair {
    Lab a, b;
    double expected;
};

std::vector<ConformancePair> conformance_pairs() {
    std::ifstream in(DENIM_TEST_DATA_DIR "/ciede2000_conformance.txt");
    REQUIRE(in.good());
    std::vector<ConformancePair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ConformancePair p{};
        ls >> p.a[0] >> p.a[1] >> p.a[2] >> p.b[0] >> p.b[1] >> p.b[2] >> p.expected;
        pairs.push_back(p);
    }
    return pairs;
}

}  // namespace

TEST_CASE("mse: hand values and scalar oracle") {
    const CanonicalImage black(1, 1, 0.0), white(1, 1, 1.0);
    CHECK(mse_image(black, black) == 0.0);
    CHECK(mse_image(black, white) == 65025.0);

    std::mt19937_64 rng(40);
    const CanonicalImage a = random_image(6, 4, rng), b = random_image(6, 4, rng);
    double ref = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) ref += std::pow(255.0 * (a.data[i] - b.data[i]), 2);
    ref /= static_cast<double>(a.data.size());
    CHECK(std::abs(mse_image(a, b) - ref) <= 1e-9);
    CHECK_THROWS_AS(mse_image(a, random_image(4, 6, rng)), ShapeError);
}

TEST_CASE("mae: spot checks") {
    auto one = [](double r, double g, double b) { return CanonicalImage(1, 1, std::vector<double>{r, g, b}); };
    CHECK(mae_image(one(0.3, 0.5, 0.2), one(0.3, 0.5, 0.2)) == 0.0);
    CHECK(std::abs(mae_image(one(1, 0, 0), one(0, 1, 0)) - 90.0) <= 1e-9);
    CHECK(std::abs(mae_image(one(1, 1, 0), one(1, 0, 0)) - 45.0) <= 1e-9);
    // Zero-norm pixels contribute zero instead of NaN.
    CHECK(mae_image(one(0, 0, 0), one(1, 0, 0)) == 0.0);
    // Parallel vectors of different length.
    CHECK(mae_image(one(0.2, 0.4, 0.1), one(0.4, 0.8, 0.2)) <= 1e-6);
}

TEST_CASE("mae: scale invariance") {
    std::mt19937_64 rng(41);
    const CanonicalImage a = random_image(5, 5, rng, 0.05, 1.0), b = random_image(5, 5, rng, 0.05, 1.0);
    CanonicalImage a2 = a;
    for (double& v : a2.data) v *= 3.7;
    CHECK(std::abs(mae_image(a, b) - mae_image(a2, b)) <= 1e-9);
}

TEST_CASE("ciede2000: published conformance pairs") {
    const auto pairs = conformance_pairs();
    REQUIRE(pairs.size() == 34);
    CHECK(std::abs(ciede2000({50, 2.6772, -79.7751}, {50, 0, -82.7485}) - 2.0425) <= 5e-4);
    for (const auto& p : pairs) {
        CHECK(std::abs(ciede2000(p.a, p.b) - p.expected) <= 5e-4);
        CHECK(std::abs(ciede2000(p.b, p.a) - p.expected) <= 5e-4);
    }
}

TEST_CASE("de2000: zero on identical images and symmetric") {
    std::mt19937_64 rng(42);
    const CanonicalImage a = random_image(6, 6, rng), b = random_image(6, 6, rng);
    CHECK(de2000_image(a, a) == 0.0);
    CHECK(de2000_image(a, b) > 0.0);
    CHECK(std::abs(de2000_image(a, b) - de2000_image(b, a)) <= 1e-9);
    CHECK(std::abs(mse_image(a, b) - mse_image(b, a)) <= 1e-9);
    CHECK(std::abs(mae_image(a, b) - mae_image(b, a)) <= 1e-9);
}

TEST_CASE("metrics: strictly positive when one pixel differs") {
    std::mt19937_64 rng(43);
    const CanonicalImage a = random_image(4, 4, rng, 0.1, 0.9);
    CanonicalImage b = a;
    b.at(2, 1, 0) += 0.05;
    CHECK(mse_image(a, b) > 0.0);
    CHECK(mae_image(a, b) > 0.0);
    CHECK(de2000_image(a, b) > 0.0);
}

TEST_CASE("color conversion: white point and round trip") {
    const Lab white = srgb_to_lab({1.0, 1.0, 1.0});
    CHECK(std::abs(white[0] - 100.0) <= 1e-9);
    CHECK(std::abs(white[1]) <= 1e-9);
    CHECK(std::abs(white[2]) <= 1e-9);

    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const Rgb rgb{u(rng), u(rng), u(rng)};
        const Rgb back = lab_to_srgb(srgb_to_lab(rgb));
        for (int c = 0; c < 3; ++c) CHECK(std::abs(back[c] - rgb[c]) < 1e-6);
    }
    for (double v : {0.0, 0.001, 0.04, 0.05, 0.5, 1.0}) CHECK(std::abs(linear_to_srgb(srgb_to_linear(v)) - v) <= 1e-12);
}

TEST_CASE("aggregate: quantiles") {
    const std::vector<double> single{4.2};
    const Summary s = aggregate(single);
    CHECK(s.mean == 4.2);
    CHECK(s.q1 == 4.2);
    CHECK(s.q2 == 4.2);
    CHECK(s.q3 == 4.2);

    const std::vector<double> four{1, 2, 3, 4};
    const Summary f = aggregate(four);
    CHECK(f.mean == 2.5);
    CHECK(f.q1 == 1.75);
    CHECK(f.q2 == 2.5);
    CHECK(f.q3 == 3.25);

    std::vector<double> shuffled{3, 1, 4, 2};
    const Summary g = aggregate(shuffled);
    CHECK(g.q1 == f.q1);
    CHECK(g.q3 == f.q3);

    CHECK_THROWS_AS(aggregate(std::vector<double>{}), std::invalid_argument);

    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(1 + t);
        for (double& x : v) x = u(rng);
        const Summary r = aggregate(v);
        CHECK(r.q1 <= r.q2);
        CHECK(r.q2 <= r.q3);
    }
}

TEST_CASE("report: CSV and JSON layout") {
    const CanonicalImage a(2, 2, 0.4), b(2, 2, 0.5);
    MetricsReport r = make_report({evaluate_pair("x.ppm", a, b), evaluate_pair("y.ppm", a, a)});
    CHECK(r.per_image.size() == 2);
    CHECK(r.mse.q1 <= r.mse.q3);
    const std::string csv = report_csv(r);
    CHECK(csv.rfind("image,mse,mae_deg,de2000\n", 0) == 0);
    CHECK(csv.find("y.ppm,0,0,0\n") != std::string::npos);
    CHECK(csv.find("statistic,mse,mae_deg,de2000\n") != std::string::npos);
    const auto doc = nlohmann::json::parse(report_json(r));
    CHECK(doc["images"] == 2);
    CHECK(doc["mse"]["mean"].get<double>() == doctest::Approx(r.mse.mean));
    CHECK(doc.contains("de2000"));
    CHECK_THROWS_AS(make_report({}), std::invalid_argument);
}
