// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/params_io.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "denim/fileio.hpp"

namespace denim {

namespace {

class Writer {
public:
    void bytes(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::size_t value) {
        if (value > std::numeric_limits<std::uint32_t>::max()) throw FormatError("DNIM: dimension exceeds 32 bits");
        const auto v = static_cast<std::uint32_t>(value);
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double d) {
        const auto v = std::bit_cast<std::uint64_t>(d);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64s(std::span<const double> values) {
        for (double d : values) f64(d);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    bool done() const { return pos_ == in_.size(); }
    void need(std::size_t n, const char* what) const {
        if (in_.size() - pos_ < n) throw FormatError(std::string("DNIM: truncated while reading ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return in_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        return std::bit_cast<double>(v);
    }
    std::vector<double> f64s(std::size_t n, const char* what) {
        need(n * 8, what);
        std::vector<double> v(n);
        for (auto& d : v) d = f64(what);
        return v;
    }
    Matrix matrix(std::size_t rows, std::size_t cols, const char* what) {
        return Matrix(rows, cols, f64s(rows * cols, what));
    }
    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
    const DncmParams& p = model.dncm;
    p.validate();
    Writer w;
    w.bytes("DNIM", 4);
    w.u8(kParamFileVersion);
    w.u32(p.k);
    w.u32(p.n_settings);
    for (const Matrix* m : {&p.pc, &p.qc, &p.rc, &p.pa, &p.qa, &p.ra}) w.f64s(m->data());
    if (model.encoder) {
        const EncoderParams& e = *model.encoder;
        e.validate();
        w.u32(e.stages.size());
        for (const auto& s : e.stages) {
            w.u32(s.in_channels);
            w.u32(s.out_channels);
        }
        w.u32(e.head_weights.rows());
        w.u32(e.head_weights.cols());
        for (const auto& s : e.stages) {
            w.f64s(s.weights);
            w.f64s(s.bias);
        }
        w.f64s(e.head_weights.data());
        w.f64s(e.head_bias);
    }
    return w.take();
}

Model parse_model(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), "DNIM", 4) != 0) throw FormatError("DNIM: bad magic");
    const auto version = r.u8("version");
    if (version != kParamFileVersion) throw FormatError("DNIM: unsupported version " + std::to_string(version));
    Model model;
    DncmParams& p = model.dncm;
    p.k = r.u32("k");
    p.n_settings = r.u32("N");
    if (p.k == 0 || p.n_settings == 0) throw FormatError("DNIM: k and N must be positive");
    p.pc = r.matrix(3 * p.n_settings, p.k, "Pc");
    p.qc = r.matrix(p.k, p.k, "Qc");
    p.rc = r.matrix(p.k, 3, "Rc");
    p.pa = r.matrix(3, p.k, "Pa");
    p.qa = r.matrix(p.k, p.k, "Qa");
    p.ra = r.matrix(p.k, 3, "Ra");
    if (r.done()) return model;

    EncoderParams e;
    const std::uint32_t stage_count = r.u32("stage count");
    r.need(static_cast<std::size_t>(stage_count) * 8, "stage dims");
    e.stages.resize(stage_count);
    for (auto& s : e.stages) {
        s.in_channels = r.u32("stage cin");
        s.out_channels = r.u32("stage cout");
        if (s.in_channels == 0 || s.out_channels == 0) throw FormatError("DNIM: zero-width encoder stage");
    }
    const std::size_t head_in = r.u32("head input width");
    const std::size_t head_out = r.u32("head output width");
    if (head_in == 0 || head_out == 0) throw FormatError("DNIM: zero-width encoder head");
    for (auto& s : e.stages) {
        s.weights = r.f64s(9 * s.in_channels * s.out_channels, "stage weights");
        s.bias = r.f64s(s.out_channels, "stage bias");
    }
    e.head_weights = r.matrix(head_in, head_out, "head weights");
    e.head_bias = r.f64s(head_out, "head bias");
    if (!r.done()) throw FormatError("DNIM: trailing bytes after encoder section");
    try {
        e.validate();
    } catch (const ShapeError& err) {
        throw FormatError(std::string("DNIM: ") + err.what());
    }
    if (e.latent_k() != p.k) throw FormatError("DNIM: encoder emits a different k than the mapping parameters");
    if (e.in_channels() != 3 * p.n_settings) throw FormatError("DNIM: encoder input width does not match 3N");
    model.encoder = std::move(e);
    return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
    write_file_atomic(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace denim
