// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "denim/dncm.hpp"

namespace denim {

class PpmError : public std::runtime_error {
public:
    enum class Kind { Io, MalformedHeader, TruncatedPayload, UnsupportedMaxval };

    PpmError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Binary P6, maxval 255. Bytes map linearly to [0, 1].
CanonicalImage decode_ppm(std::span<const std::uint8_t> bytes);

/// Values are clamped to [0, 1] and rounded half-up to 8 bits.
std::vector<std::uint8_t> encode_ppm(const CanonicalImage& img);

std::uint8_t quantize_8bit(double v);

CanonicalImage load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const CanonicalImage& img);

}  // namespace denim
