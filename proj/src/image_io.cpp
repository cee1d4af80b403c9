// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "denim/fileio.hpp"

namespace denim {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> in) : in_(in) {}

    void skip_space_and_comments() {
        while (pos_ < in_.size()) {
            if (std::isspace(in_[pos_])) {
                ++pos_;
            } else if (in_[pos_] == '#') {
                while (pos_ < in_.size() && in_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        if (pos_ >= in_.size() || !std::isdigit(in_[pos_]))
            throw PpmError(PpmError::Kind::MalformedHeader, std::string("PPM: expected ") + what);
        std::size_t v = 0;
        while (pos_ < in_.size() && std::isdigit(in_[pos_])) {
            v = v * 10 + (in_[pos_++] - '0');
            if (v > (1u << 30)) throw PpmError(PpmError::Kind::MalformedHeader, std::string("PPM: ") + what + " too large");
        }
        return v;
    }

    std::size_t pos() const { return pos_; }
    std::size_t size() const { return in_.size(); }
    std::uint8_t at(std::size_t i) const { return in_[i]; }
    void advance() { ++pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint8_t quantize_8bit(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

CanonicalImage decode_ppm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw PpmError(PpmError::Kind::MalformedHeader, "PPM: missing P6 magic");
    HeaderReader r(bytes.subspan(2));
    const std::size_t width = r.number("width");
    const std::size_t height = r.number("height");
    const std::size_t maxval = r.number("maxval");
    if (width == 0 || height == 0) throw PpmError(PpmError::Kind::MalformedHeader, "PPM: zero dimension");
    if (maxval != 255)
        throw PpmError(PpmError::Kind::UnsupportedMaxval, "PPM: unsupported maxval " + std::to_string(maxval));
    if (r.pos() >= r.size() || !std::isspace(r.at(r.pos())))
        throw PpmError(PpmError::Kind::MalformedHeader, "PPM: missing whitespace after maxval");
    r.advance();
    const std::size_t offset = 2 + r.pos();
    const std::size_t need = width * height * 3;
    if (bytes.size() - offset < need)
        throw PpmError(PpmError::Kind::TruncatedPayload, "PPM: payload has " + std::to_string(bytes.size() - offset) +
                                                             " bytes, expected " + std::to_string(need));
    CanonicalImage img(height, width);
    for (std::size_t i = 0; i < need; ++i) img.data[i] = static_cast<double>(bytes[offset + i]) / 255.0;
    return img;
}

std::vector<std::uint8_t> encode_ppm(const CanonicalImage& img) {
    img.validate();
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + img.data.size());
    for (double v : img.data) out.push_back(quantize_8bit(v));
    return out;
}

CanonicalImage load_image(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file(path);
    } catch (const IoError& e) {
        throw PpmError(PpmError::Kind::Io, e.what());
    }
    return decode_ppm(bytes);
}

void save_image(const std::filesystem::path& path, const CanonicalImage& img) {
    write_file_atomic(path, encode_ppm(img));
}

}  // namespace denim
