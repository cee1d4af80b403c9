// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <cstdint>
#include <vector>

#include "denim/dncm.hpp"
#include "denim/linalg.hpp"

namespace denim {

/// One 3x3, stride-2, zero-padded convolution followed by GeLU.
/// weights are laid out [ky][kx][cin][cout].
struct ConvStage {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    double& w(std::size_t ky, std::size_t kx, std::size_t ci, std::size_t co) {
        return weights[((ky * 3 + kx) * in_channels + ci) * out_channels + co];
    }
    double w(std::size_t ky, std::size_t kx, std::size_t ci, std::size_t co) const {
        return weights[((ky * 3 + kx) * in_channels + ci) * out_channels + co];
    }
    bool operator==(const ConvStage&) const = default;
};

/// Convolutional backbone plus the 1x1 vectorizer head that emits k*k channels.
struct EncoderParams {
    std::vector<ConvStage> stages;
    Matrix head_weights;  // C_last x k^2
    std::vector<double> head_bias;

    std::size_t in_channels() const { return stages.empty() ? head_weights.rows() : stages.front().in_channels; }
    std::size_t latent_k() const;
    std::size_t parameter_count() const;
    void validate() const;
    bool operator==(const EncoderParams&) const = default;
};

/// Same structure as EncoderParams, holding gradients.
using EncoderGrads = EncoderParams;

inline const std::vector<std::size_t> kDefaultEncoderWidths = {16, 32, 64};

/// Conv weights ~ U(-a, a) with a = sqrt(1 / (9 * cin)), conv biases zero.
/// Head weights ~ U(-a, a) with a = 0.1 * sqrt(1 / C_last); head biases are
/// gelu^-1(1) on the diagonal of the reshaped k x k code and 0 elsewhere, so an
/// untrained encoder yields d close to the identity. CounterRng streams start at 100.
EncoderParams init_encoder(std::size_t in_channels, std::size_t k, std::uint64_t seed,
                           const std::vector<std::size_t>& widths = kDefaultEncoderWidths);

/// Zero-valued parameters shaped like enc.
EncoderParams zeros_like(const EncoderParams& enc);

/// Bilinear resize of every channel to side x side, half-pixel-center sampling
/// with edge clamping.
ImageStack downsample(const ImageStack& img, std::size_t side);

/// Activations kept by the forward pass for the backward pass.
struct EncoderTrace {
    struct Level {
        std::size_t height = 0, width = 0, channels = 0;
        std::vector<double> values;  // HWC
    };
    std::vector<Level> inputs;       // input to each stage, then the head input last
    std::vector<Level> pre_acts;     // pre-GeLU values of each stage, then of the head
};

/// d = reshape_rowmajor(mean_over_space(gelu(head(stages(lr))))).
LatentCode encode(const ImageStack& lr, const EncoderParams& enc, EncoderTrace* trace = nullptr);

/// Reverse-mode gradient of encode with respect to every encoder parameter,
/// given the gradient with respect to d.
EncoderGrads encode_grad(const ImageStack& lr, const EncoderParams& enc, const Matrix& upstream);
EncoderGrads encode_grad(const EncoderTrace& trace, const EncoderParams& enc, const Matrix& upstream);

}  // namespace denim
