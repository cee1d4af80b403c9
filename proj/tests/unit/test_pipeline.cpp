// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include <doctest.h>

#include <chrono>
#include <random>

#include "denim/pipeline.hpp"
#include "support/oracles.hpp"

using namespace denim;
using namespace denim::testing;

namespace {

Model identity_model(std::size_t k, std::size_t n) {
    Model m;
    m.dncm = identity_params(k, n);
    // No conv stages; head emits gelu(bias) with zero weights. Solve gelu(b) = 1
    // on the diagonal so d = I.
    m.encoder = init_encoder(3 * n, k, 0, {});
    std::fill(m.encoder->head_weights.storage().begin(), m.encoder->head_weights.storage().end(), 0.0);
    double one = 1.0;
    for (int i = 0; i < 60; ++i) one -= (gelu(one) - 1.0) / gelu_derivative(one);
    for (std::size_t j = 0; j < k * k; ++j) m.encoder->head_bias[j] = (j % (k + 1) == 0) ? one : 0.0;
    return m;
}

}  // namespace

TEST_CASE("settings validation") {
    CHECK_NOTHROW(validate_settings("tfdcs"));
    CHECK_NOTHROW(validate_settings("tds"));
    CHECK_THROWS_AS(validate_settings(""), std::invalid_argument);
    CHECK_THROWS_AS(validate_settings("tt"), std::invalid_argument);
    CHECK_THROWS_AS(validate_settings("tx"), std::invalid_argument);
}

TEST_CASE("assemble_stack: order, shapes and errors") {
    std::mt19937_64 rng(60);
    const CanonicalImage a = random_image(3, 2, rng), b = random_image(3, 2, rng);
    const std::vector<CanonicalImage> one{a};
    CHECK(assemble_stack(one, "d").data == a.data);

    const CanonicalImage p(1, 1, std::vector<double>{0.1, 0.2, 0.3}), q(1, 1, std::vector<double>{0.4, 0.5, 0.6});
    const std::vector<CanonicalImage> pq{p, q};
    const ImageStack s = assemble_stack(pq, "ts");
    CHECK(s.settings == 2);
    CHECK(s.data == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});

    const std::vector<CanonicalImage> ab{a, b};
    const PixelMatrix pm = unfold(assemble_stack(ab, "td"));
    for (std::size_t px = 0; px < 6; ++px)
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(pm(px, c) == a.data[px * 3 + c]);
            CHECK(pm(px, 3 + c) == b.data[px * 3 + c]);
        }
    CHECK(extract_setting(assemble_stack(ab, "td"), 1) == b);

    const std::vector<CanonicalImage> mismatched{a, random_image(2, 3, rng)};
    CHECK_THROWS_AS(assemble_stack(mismatched, "td"), ShapeError);
    CHECK_THROWS_AS(assemble_stack(ab, "t"), std::invalid_argument);
}

TEST_CASE("run_pipeline: identity model returns setting 0") {
    std::mt19937_64 rng(61);
    const Model m = identity_model(8, 3);
    const ImageStack stack = random_stack(12, 10, 3, rng);
    PipelineConfig cfg;
    cfg.k = 8;
    cfg.settings = "tds";
    cfg.low_res_side = 8;
    const CanonicalImage first = extract_setting(stack, 0);
    for (bool pre : {true, false}) {
        cfg.use_precompose = pre;
        const PipelineOutput out = run_pipeline(stack, m, cfg);
        for (std::size_t i = 0; i < first.data.size(); ++i) CHECK(std::abs(out.awb.data[i] - first.data[i]) <= 1e-14);
    }
}

TEST_CASE("run_pipeline: precompose on and off agree") {
    std::mt19937_64 rng(62);
    Model m;
    m.dncm = init_params(16, 3, 4);
    m.encoder = init_encoder(9, 16, 4, {8, 8});
    const ImageStack stack = random_stack(40, 33, 3, rng);
    PipelineConfig cfg;
    cfg.low_res_side = 16;
    cfg.use_precompose = true;
    const auto fast = run_pipeline(stack, m, cfg);
    cfg.use_precompose = false;
    const auto slow = run_pipeline(stack, m, cfg);
    CHECK(fast.latent.d == slow.latent.d);
    double scale = 0.0;
    for (double v : slow.awb.data) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < slow.awb.data.size(); ++i)
        CHECK(std::abs(fast.awb.data[i] - slow.awb.data[i]) <= 1e-9 * scale);
}

TEST_CASE("run_pipeline: doubling resolution quadruples pixel work with a fixed latent") {
    std::mt19937_64 rng(63);
    Model m;
    m.dncm = init_params(32, 5, 4);
    m.encoder = init_encoder(15, 32, 4, {4, 4});
    const ImageStack small = random_stack(8, 8, 5, rng);
    const ImageStack big = random_stack(16, 16, 5, rng);
    const LatentCode d = encode(downsample(small, 8), *m.encoder);
    const auto a = run_mapping(small, d, m.dncm, false, 1);
    const auto b = run_mapping(big, d, m.dncm, false, 1);
    CHECK(a.latent.d == b.latent.d);
    const std::uint64_t per_pixel = naive_c_muls_per_pixel(32, 5) + naive_a_muls_per_pixel(32);
    CHECK(per_pixel * big.pixels() == 4 * per_pixel * small.pixels());

    // Counting execution of one pixel's chain agrees with the closed form.
    CountingMatmul counter;
    Matrix row(1, 15, std::vector<double>(small.data.begin(), small.data.begin() + 15));
    Matrix cur = counter(counter(counter(counter(row, m.dncm.pc), d.d), m.dncm.qc), m.dncm.rc);
    CHECK(counter.count() == naive_c_muls_per_pixel(32, 5));
    counter.reset();
    counter(counter(counter(cur, m.dncm.pa), m.dncm.qa), m.dncm.ra);
    CHECK(counter.count() == naive_a_muls_per_pixel(32));
}

TEST_CASE("bench: report fields") {
    Model m;
    m.dncm = init_params(32, 5, 1);
    m.encoder = init_encoder(15, 32, 1, {4, 4});
    PipelineConfig cfg;
    cfg.low_res_side = 16;
    const std::vector<Resolution> res{{32, 32}, {48, 40}};
    BenchOptions opts;
    opts.warmups = 1;
    opts.runs = 3;
    const BenchReport r = bench(res, m, cfg, opts);
    REQUIRE(r.variants.size() == 4);
    for (const auto& v : r.variants) {
        CHECK(v.wall_time_seconds > 0.0);
        CHECK(v.pixels_per_second > 0.0);
        CHECK(v.mul_count > 0);
        CHECK(v.parameter_count == m.dncm.parameter_count() + m.encoder->parameter_count());
    }
    CHECK(r.variants[0].variant == "naive");
    CHECK(r.variants[0].mul_count_canonical == 2624);
    CHECK(r.variants[1].mul_count_canonical == 45);
    CHECK(r.variants[0].mul_count == 2624 + 1216);
    CHECK(r.variants[1].mul_count == 45 + 9);
    CHECK(bench_csv(r).rfind("variant,height,width,wall_time_seconds", 0) == 0);
    CHECK_THROWS_AS(bench(std::vector<Resolution>{}, m, cfg), std::invalid_argument);
}

TEST_CASE("run_pipeline: thread count does not change outputs") {
    std::mt19937_64 rng(64);
    Model m;
    m.dncm = init_params(8, 2, 4);
    m.encoder = init_encoder(6, 8, 4, {4});
    const ImageStack stack = random_stack(37, 29, 2, rng);
    PipelineConfig cfg;
    cfg.low_res_side = 8;
    for (bool pre : {true, false}) {
        cfg.use_precompose = pre;
        cfg.threads = 1;
        const auto one = run_pipeline(stack, m, cfg);
        cfg.threads = 4;
        const auto four = run_pipeline(stack, m, cfg);
        CHECK(one.awb == four.awb);
        CHECK(one.canonical == four.canonical);
    }
}

TEST_CASE("naive mapping time scales with pixel count") {
    const DncmParams p = init_params(32, 5, 2);
    const LatentCode d(Matrix::identity(32));
    auto fastest = [&](std::size_t side) {
        const ImageStack stack = random_stack(side, side, 5, 9);
        double best = INFINITY;
        for (int i = 0; i < 5; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            run_mapping(stack, d, p, false, 1);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    const double ratio = fastest(768) / fastest(384);
    MESSAGE("naive time ratio for 2x sides: " << ratio);
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}
