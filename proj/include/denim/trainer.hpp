// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "denim/dncm.hpp"
#include "denim/encoder.hpp"
#include "denim/params_io.hpp"

namespace denim {

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
    std::size_t batch_size = 16;
    std::size_t steps = 0;
    std::size_t low_res_side = 256;
    std::size_t k = 32;
    std::uint64_t seed = 0;
    bool freeze_encoder = false;
    unsigned threads = 1;

    void validate() const;
};

struct TrainSample {
    ImageStack stack;
    CanonicalImage target;
};

/// Per-setting diagonal RGB gains keyed by setting letter.
struct WbSimConfig {
    std::map<char, std::array<double, 3>> gains;

    /// Gains for {t, f, d, c, s} approximating each color temperature relative
    /// to a daylight-balanced base image.
    static WbSimConfig standard();
    void validate() const;
};

/// Scales base by each requested setting's gains (clamped to [0, 1]) and uses
/// base itself as the target.
TrainSample synthesize_sample(const CanonicalImage& base, const WbSimConfig& sim, std::string_view settings);

/// Smooth random scene with values in [0.05, 0.95]; used to build synthetic datasets.
CanonicalImage random_scene(std::size_t height, std::size_t width, std::uint64_t seed);

/// Squared Frobenius norm of pred - gt.
double loss(const CanonicalImage& pred, const CanonicalImage& gt);

/// Gradients for every trainable tensor. encoder is empty when frozen.
struct Gradients {
    Matrix pc, qc, rc, pa, qa, ra;
    std::optional<EncoderGrads> encoder;
};

struct BackwardResult {
    double loss_sum = 0.0;
    std::size_t pixels = 0;
    Gradients grads;
};

/// Forward pass of the full model on one stack, returning the AWB output.
CanonicalImage forward(const ImageStack& stack, const Model& model, std::size_t low_res_side, unsigned threads = 1);

/// Latent code for a stack: downsample then encode.
LatentCode latent_for(const ImageStack& stack, const EncoderParams& enc, std::size_t low_res_side);

/// Exact gradients of the summed batch loss. When freeze_encoder is set the
/// encoder is treated as a constant and its gradients are absent. A supplied
/// latent cache (one entry per sample) skips the encoder forward pass; it is
/// only honoured when the encoder is frozen.
BackwardResult backward(std::span<const TrainSample> batch, const Model& model, std::size_t low_res_side,
                        bool freeze_encoder, std::span<const LatentCode> latent_cache = {});

struct AdamState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

/// One decoupled-weight-decay Adam update of every trainable tensor.
/// Tensors whose gradient is absent are left untouched.
void adamw_step(Model& model, const Gradients& grads, AdamState& state, const TrainConfig& cfg);

/// Update rule on a single flat tensor; exposed for testing.
void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                  std::uint64_t step, const TrainConfig& cfg);

struct LossPoint {
    std::size_t step = 0;
    double loss_sum = 0.0;
    double loss_per_pixel = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<LossPoint> curve;
};

/// Runs cfg.steps AdamW steps over seeded-shuffled mini-batches. Batches are
/// drawn from a stream of per-epoch permutations, so a batch larger than the
/// dataset wraps around.
TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg);
TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg, Model initial);

/// Fresh model for cfg: init_params(cfg.k, N, seed) and init_encoder(3N, k, seed).
Model init_model(std::size_t n_settings, const TrainConfig& cfg);

/// Mean over the dataset of loss / pixel count.
double dataset_loss_per_pixel(std::span<const TrainSample> dataset, const Model& model, std::size_t low_res_side);

std::string loss_curve_csv(std::span<const LossPoint> curve);

}  // namespace denim
