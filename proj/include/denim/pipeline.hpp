// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "denim/dncm.hpp"
#include "denim/params_io.hpp"

namespace denim {

inline constexpr std::string_view kSettingLetters = "tfdcs";

struct PipelineConfig {
    std::string params_path;
    std::size_t k = 32;
    std::string settings = "tfdcs";
    std::size_t low_res_side = 256;
    bool use_precompose = true;
    unsigned threads = 1;

    void validate() const;
};

/// Letters must come from {t,f,d,c,s}, be non-empty and unique.
void validate_settings(std::string_view settings);

/// Channel-interleaves per-setting images in the given order.
ImageStack assemble_stack(std::span<const CanonicalImage> images, std::string_view order);

/// Setting block j of a stack as an RGB image.
CanonicalImage extract_setting(const ImageStack& stack, std::size_t j);

struct PipelineOutput {
    LatentCode latent;
    CanonicalImage canonical;
    CanonicalImage awb;
};

/// downsample -> encode -> d; canonical = dncm_c(stack, d); awb = dncm_a(canonical).
PipelineOutput run_pipeline(const ImageStack& stack, const Model& model, const PipelineConfig& cfg);

/// Same as run_pipeline with a caller-supplied latent code.
PipelineOutput run_mapping(const ImageStack& stack, const LatentCode& d, const DncmParams& params,
                           bool use_precompose, unsigned threads);

struct BenchOptions {
    std::size_t warmups = 2;
    std::size_t runs = 5;
    std::uint64_t seed = 0;
};

struct BenchVariant {
    std::string variant;  // "naive" or "precomposed"
    std::size_t height = 0;
    std::size_t width = 0;
    double wall_time_seconds = 0.0;  // median over runs
    double pixels_per_second = 0.0;
    std::uint64_t mul_count = 0;          // per pixel, both mapping stages
    std::uint64_t mul_count_canonical = 0;  // per pixel, canonical stage only
    std::uint64_t mul_count_setup = 0;    // one-off per image (precomposition)
    std::size_t parameter_count = 0;
};

struct BenchReport {
    std::vector<BenchVariant> variants;
};

struct Resolution {
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Times naive-chain and precomposed high-resolution mapping on synthetic stacks.
/// The latent code is computed once per resolution and excluded from timing.
BenchReport bench(std::span<const Resolution> resolutions, const Model& model, const PipelineConfig& cfg,
                  const BenchOptions& opts = {});

std::string bench_csv(const BenchReport& report);

/// Uniform random stack in [0, 1].
ImageStack random_stack(std::size_t height, std::size_t width, std::size_t settings, std::uint64_t seed);

}  // namespace denim
