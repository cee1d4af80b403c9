// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "denim/encoder.hpp"
#include "denim/rng.hpp"

namespace denim {

void validate_settings(std::string_view settings) {
    if (settings.empty()) throw std::invalid_argument("settings: at least one letter required");
    for (std::size_t i = 0; i < settings.size(); ++i) {
        if (kSettingLetters.find(settings[i]) == std::string_view::npos)
            throw std::invalid_argument(std::string("settings: unknown letter '") + settings[i] + "'");
        if (settings.find(settings[i]) != i)
            throw std::invalid_argument(std::string("settings: duplicate letter '") + settings[i] + "'");
    }
}

void PipelineConfig::validate() const {
    validate_settings(settings);
    if (k < 3) throw std::invalid_argument("PipelineConfig: k must be at least 3");
    if (low_res_side < 8) throw std::invalid_argument("PipelineConfig: low_res_side must be at least 8");
}

ImageStack assemble_stack(std::span<const CanonicalImage> images, std::string_view order) {
    if (images.empty()) throw std::invalid_argument("assemble_stack: no images");
    if (images.size() != order.size())
        throw std::invalid_argument("assemble_stack: " + std::to_string(images.size()) + " images for " +
                                    std::to_string(order.size()) + " settings");
    validate_settings(order);
    const std::size_t h = images.front().height, w = images.front().width, n = images.size();
    for (const auto& img : images) {
        img.validate();
        if (img.height != h || img.width != w) throw ShapeError("assemble_stack: images differ in size");
    }
    ImageStack stack(h, w, n);
    for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < 3; ++c) stack.data[p * 3 * n + 3 * j + c] = images[j].data[p * 3 + c];
    return stack;
}

CanonicalImage extract_setting(const ImageStack& stack, std::size_t j) {
    if (j >= stack.settings) throw std::out_of_range("extract_setting: no setting " + std::to_string(j));
    CanonicalImage img(stack.height, stack.width);
    const std::size_t C = stack.channels();
    for (std::size_t p = 0; p < stack.pixels(); ++p)
        for (std::size_t c = 0; c < 3; ++c) img.data[p * 3 + c] = stack.data[p * C + 3 * j + c];
    return img;
}

PipelineOutput run_mapping(const ImageStack& stack, const LatentCode& d, const DncmParams& params,
                           bool use_precompose, unsigned threads) {
    if (use_precompose) {
        CanonicalImage canon = apply_color_map(stack, precompose_c(d, params), threads);
        CanonicalImage awb = apply_color_map(canon, precompose_a(params), threads);
        return {d, std::move(canon), std::move(awb)};
    }
    CanonicalImage canon = dncm_c(stack, d, params, threads);
    CanonicalImage awb = dncm_a(canon, params, threads);
    return {d, std::move(canon), std::move(awb)};
}

PipelineOutput run_pipeline(const ImageStack& stack, const Model& model, const PipelineConfig& cfg) {
    if (!model.encoder) throw std::invalid_argument("run_pipeline: parameter file has no encoder section");
    if (stack.settings != model.dncm.n_settings)
        throw ShapeError("run_pipeline: stack has " + std::to_string(stack.settings) + " settings, model expects " +
                         std::to_string(model.dncm.n_settings));
    const LatentCode d = encode(downsample(stack, cfg.low_res_side), *model.encoder);
    return run_mapping(stack, d, model.dncm, cfg.use_precompose, cfg.threads);
}

ImageStack random_stack(std::size_t height, std::size_t width, std::size_t settings, std::uint64_t seed) {
    ImageStack s(height, width, settings);
    CounterRng rng(seed, 11);
    for (double& v : s.data) v = rng.uniform();
    return s;
}

BenchReport bench(std::span<const Resolution> resolutions, const Model& model, const PipelineConfig& cfg,
                  const BenchOptions& opts) {
    if (resolutions.empty()) throw std::invalid_argument("bench: no resolutions");
    if (opts.runs == 0) throw std::invalid_argument("bench: at least one timed run required");
    if (!model.encoder) throw std::invalid_argument("bench: parameter file has no encoder section");
    const DncmParams& p = model.dncm;
    const std::size_t n = p.n_settings, k = p.k;
    const std::size_t params = p.parameter_count() + model.encoder->parameter_count();

    BenchReport report;
    for (const auto& res : resolutions) {
        const ImageStack stack = random_stack(res.height, res.width, n, opts.seed);
        const LatentCode d = encode(downsample(stack, cfg.low_res_side), *model.encoder);
        for (bool pre : {false, true}) {
            auto once = [&] {
                const auto t0 = std::chrono::steady_clock::now();
                PipelineOutput out = run_mapping(stack, d, p, pre, cfg.threads);
                const auto t1 = std::chrono::steady_clock::now();
                return std::chrono::duration<double>(t1 - t0).count();
            };
            for (std::size_t i = 0; i < opts.warmups; ++i) once();
            std::vector<double> times;
            for (std::size_t i = 0; i < opts.runs; ++i) times.push_back(once());
            std::sort(times.begin(), times.end());
            const std::size_t m = times.size();
            const double median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);

            BenchVariant v;
            v.variant = pre ? "precomposed" : "naive";
            v.height = res.height;
            v.width = res.width;
            v.wall_time_seconds = median;
            v.pixels_per_second = static_cast<double>(stack.pixels()) / median;
            if (pre) {
                v.mul_count_canonical = precomposed_c_muls_per_pixel(n);
                v.mul_count = v.mul_count_canonical + precomposed_a_muls_per_pixel();
                v.mul_count_setup = mul_count({{3 * n, k}, {k, k}, {k, k}, {k, 3}}) + mul_count({{3, k}, {k, k}, {k, 3}});
            } else {
                v.mul_count_canonical = naive_c_muls_per_pixel(k, n);
                v.mul_count = v.mul_count_canonical + naive_a_muls_per_pixel(k);
            }
            v.parameter_count = params;
            report.variants.push_back(v);
        }
    }
    return report;
}

std::string bench_csv(const BenchReport& report) {
    std::ostringstream os;
    os.precision(9);
    os << "variant,height,width,wall_time_seconds,pixels_per_second,mul_count,mul_count_canonical,mul_count_setup,"
          "parameter_count\n";
    for (const auto& v : report.variants)
        os << v.variant << ',' << v.height << ',' << v.width << ',' << v.wall_time_seconds << ',' << v.pixels_per_second
           << ',' << v.mul_count << ',' << v.mul_count_canonical << ',' << v.mul_count_setup << ','
           << v.parameter_count << '\n';
    return os.str();
}

}  // namespace denim
