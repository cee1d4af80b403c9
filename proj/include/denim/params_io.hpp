// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "denim/dncm.hpp"
#include "denim/encoder.hpp"

namespace denim {

// DNIM parameter file, all integers and floats little-endian:
//
//   "DNIM"  u8 version(=1)  u32 k  u32 N
//   Pc Qc Rc Pa Qa Ra       row-major f64
//   [encoder section, optional]
//   u32 stage_count
//   stage_count x (u32 cin, u32 cout)
//   u32 head_in  u32 head_out
//   per stage: weights [ky][kx][cin][cout] f64, bias f64
//   head weights (head_in x head_out) f64, head bias f64

inline constexpr std::uint8_t kParamFileVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Model {
    DncmParams dncm;
    std::optional<EncoderParams> encoder;
    bool operator==(const Model&) const = default;
};

std::vector<std::uint8_t> serialize_model(const Model& model);
Model parse_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace denim
