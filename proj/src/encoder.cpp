// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "denim/rng.hpp"

namespace denim {

namespace {

using Level = EncoderTrace::Level;

constexpr double kHeadWeightScale = 0.1;

std::size_t strided_extent(std::size_t n) { return (n + 1) / 2; }

// Solves gelu(x) = 1 by Newton iteration from x = 1.
double gelu_inverse_of_one() {
    double x = 1.0;
    for (int i = 0; i < 50; ++i) {
        const double step = (gelu(x) - 1.0) / gelu_derivative(x);
        x -= step;
        if (std::abs(step) < 1e-17) break;
    }
    return x;
}

// pre[oy][ox][co] = b[co] + sum in[2oy+ky-1][2ox+kx-1][ci] * w[ky][kx][ci][co]
Level conv_forward(const Level& in, const ConvStage& st) {
    Level out;
    out.height = strided_extent(in.height);
    out.width = strided_extent(in.width);
    out.channels = st.out_channels;
    out.values.assign(out.height * out.width * out.channels, 0.0);
    const std::size_t cin = in.channels, cout = st.out_channels;
    for (std::size_t oy = 0; oy < out.height; ++oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            double* o = &out.values[(oy * out.width + ox) * cout];
            for (std::size_t co = 0; co < cout; ++co) o[co] = st.bias[co];
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const long iy = static_cast<long>(2 * oy + ky) - 1;
                if (iy < 0 || iy >= static_cast<long>(in.height)) continue;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const long ix = static_cast<long>(2 * ox + kx) - 1;
                    if (ix < 0 || ix >= static_cast<long>(in.width)) continue;
                    const double* x = &in.values[(iy * in.width + ix) * cin];
                    const double* w = &st.weights[(ky * 3 + kx) * cin * cout];
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const double xv = x[ci];
                        const double* wr = w + ci * cout;
                        for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wr[co];
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates weight/bias gradients into g and returns the gradient with
// respect to the stage input.
Level conv_backward(const Level& in, const ConvStage& st, const Level& dpre, ConvStage& g) {
    Level din{in.height, in.width, in.channels, std::vector<double>(in.values.size(), 0.0)};
    const std::size_t cin = in.channels, cout = st.out_channels;
    for (std::size_t oy = 0; oy < dpre.height; ++oy) {
        for (std::size_t ox = 0; ox < dpre.width; ++ox) {
            const double* go = &dpre.values[(oy * dpre.width + ox) * cout];
            for (std::size_t co = 0; co < cout; ++co) g.bias[co] += go[co];
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const long iy = static_cast<long>(2 * oy + ky) - 1;
                if (iy < 0 || iy >= static_cast<long>(in.height)) continue;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const long ix = static_cast<long>(2 * ox + kx) - 1;
                    if (ix < 0 || ix >= static_cast<long>(in.width)) continue;
                    const std::size_t base = (iy * in.width + ix) * cin;
                    const double* x = &in.values[base];
                    double* dx = &din.values[base];
                    const double* w = &st.weights[(ky * 3 + kx) * cin * cout];
                    double* gw = &g.weights[(ky * 3 + kx) * cin * cout];
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const double xv = x[ci];
                        const double* wr = w + ci * cout;
                        double* gwr = gw + ci * cout;
                        double acc = 0.0;
                        for (std::size_t co = 0; co < cout; ++co) {
                            gwr[co] += xv * go[co];
                            acc += wr[co] * go[co];
                        }
                        dx[ci] += acc;
                    }
                }
            }
        }
    }
    return din;
}

Level head_forward(const Level& in, const EncoderParams& enc) {
    const std::size_t kk = enc.head_bias.size();
    Level out{in.height, in.width, kk, std::vector<double>(in.height * in.width * kk)};
    const std::size_t positions = in.height * in.width;
    const double* w = enc.head_weights.data().data();
    for (std::size_t p = 0; p < positions; ++p) {
        double* o = &out.values[p * kk];
        std::copy(enc.head_bias.begin(), enc.head_bias.end(), o);
        const double* x = &in.values[p * in.channels];
        for (std::size_t c = 0; c < in.channels; ++c) {
            const double xv = x[c];
            const double* wr = w + c * kk;
            for (std::size_t j = 0; j < kk; ++j) o[j] += xv * wr[j];
        }
    }
    return out;
}

Level to_level(const ImageStack& s) { return Level{s.height, s.width, s.channels(), s.data}; }

}  // namespace

std::size_t EncoderParams::latent_k() const {
    const auto kk = head_bias.size();
    auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(kk))));
    return k;
}

std::size_t EncoderParams::parameter_count() const {
    std::size_t n = head_weights.size() + head_bias.size();
    for (const auto& s : stages) n += s.weights.size() + s.bias.size();
    return n;
}

void EncoderParams::validate() const {
    std::size_t c = in_channels();
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        if (s.in_channels != c || s.in_channels == 0 || s.out_channels == 0 ||
            s.weights.size() != 9 * s.in_channels * s.out_channels || s.bias.size() != s.out_channels) {
            std::ostringstream os;
            os << "EncoderParams: stage " << i << " has inconsistent dimensions";
            throw ShapeError(os.str());
        }
        c = s.out_channels;
    }
    const std::size_t k = latent_k();
    if (head_weights.rows() != c || head_weights.cols() != head_bias.size() || k * k != head_bias.size() || k == 0)
        throw ShapeError("EncoderParams: head is " + head_weights.shape_string() + " with " +
                         std::to_string(head_bias.size()) + " biases after " + std::to_string(c) + " channels");
}

EncoderParams init_encoder(std::size_t in_channels, std::size_t k, std::uint64_t seed,
                           const std::vector<std::size_t>& widths) {
    if (in_channels == 0 || k == 0) throw std::invalid_argument("init_encoder: channel count and k must be positive");
    EncoderParams enc;
    std::size_t cin = in_channels;
    std::uint64_t stream = 100;
    for (std::size_t width : widths) {
        ConvStage st;
        st.in_channels = cin;
        st.out_channels = width;
        st.weights.resize(9 * cin * width);
        st.bias.assign(width, 0.0);
        CounterRng rng(seed, stream++);
        const double a = std::sqrt(1.0 / (9.0 * static_cast<double>(cin)));
        for (double& v : st.weights) v = rng.uniform(-a, a);
        enc.stages.push_back(std::move(st));
        cin = width;
    }
    enc.head_weights = Matrix(cin, k * k);
    CounterRng rng(seed, stream);
    const double a = kHeadWeightScale * std::sqrt(1.0 / static_cast<double>(cin));
    for (double& v : enc.head_weights.storage()) v = rng.uniform(-a, a);
    // d starts near the identity: gelu(bias) is 1 on the diagonal, 0 elsewhere.
    enc.head_bias.assign(k * k, 0.0);
    const double unit = gelu_inverse_of_one();
    for (std::size_t i = 0; i < k; ++i) enc.head_bias[i * k + i] = unit;
    return enc;
}

EncoderParams zeros_like(const EncoderParams& enc) {
    EncoderParams z = enc;
    for (auto& s : z.stages) {
        std::fill(s.weights.begin(), s.weights.end(), 0.0);
        std::fill(s.bias.begin(), s.bias.end(), 0.0);
    }
    std::fill(z.head_weights.storage().begin(), z.head_weights.storage().end(), 0.0);
    std::fill(z.head_bias.begin(), z.head_bias.end(), 0.0);
    return z;
}

ImageStack downsample(const ImageStack& img, std::size_t side) {
    img.validate();
    if (side < 8) throw std::invalid_argument("downsample: side must be at least 8, got " + std::to_string(side));
    if (img.height == side && img.width == side) return img;

    struct Tap {
        std::size_t i0, i1;
        double f;
    };
    auto taps = [side](std::size_t in) {
        std::vector<Tap> t(side);
        const double sc = static_cast<double>(in) / static_cast<double>(side);
        for (std::size_t o = 0; o < side; ++o) {
            double src = (static_cast<double>(o) + 0.5) * sc - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            const auto i0 = static_cast<std::size_t>(std::floor(src));
            const std::size_t i1 = std::min(i0 + 1, in - 1);
            t[o] = {i0, i1, src - static_cast<double>(i0)};
        }
        return t;
    };
    const auto ty = taps(img.height);
    const auto tx = taps(img.width);
    const std::size_t C = img.channels();
    ImageStack out(side, side, img.settings);
    for (std::size_t y = 0; y < side; ++y) {
        const auto& a = ty[y];
        for (std::size_t x = 0; x < side; ++x) {
            const auto& b = tx[x];
            for (std::size_t c = 0; c < C; ++c) {
                const double top = img.at(a.i0, b.i0, c) * (1.0 - b.f) + img.at(a.i0, b.i1, c) * b.f;
                const double bot = img.at(a.i1, b.i0, c) * (1.0 - b.f) + img.at(a.i1, b.i1, c) * b.f;
                out.at(y, x, c) = top * (1.0 - a.f) + bot * a.f;
            }
        }
    }
    return out;
}

LatentCode encode(const ImageStack& lr, const EncoderParams& enc, EncoderTrace* trace) {
    lr.validate();
    enc.validate();
    if (lr.channels() != enc.in_channels())
        throw ShapeError("encode: input has " + std::to_string(lr.channels()) + " channels, encoder expects " +
                         std::to_string(enc.in_channels()));
    Level cur = to_level(lr);
    for (const auto& st : enc.stages) {
        Level pre = conv_forward(cur, st);
        if (trace) {
            trace->inputs.push_back(std::move(cur));
            trace->pre_acts.push_back(pre);
        }
        for (double& v : pre.values) v = gelu(v);
        cur = std::move(pre);
    }
    Level z = head_forward(cur, enc);
    const std::size_t kk = z.channels;
    const std::size_t positions = z.height * z.width;
    std::vector<double> pooled(kk, 0.0);
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t j = 0; j < kk; ++j) pooled[j] += gelu(z.values[p * kk + j]);
    for (double& v : pooled) v /= static_cast<double>(positions);
    if (trace) {
        trace->inputs.push_back(std::move(cur));
        trace->pre_acts.push_back(std::move(z));
    }
    const std::size_t k = enc.latent_k();
    return LatentCode(Matrix(k, k, std::move(pooled)));
}

EncoderGrads encode_grad(const ImageStack& lr, const EncoderParams& enc, const Matrix& upstream) {
    EncoderTrace trace;
    encode(lr, enc, &trace);
    return encode_grad(trace, enc, upstream);
}

EncoderGrads encode_grad(const EncoderTrace& trace, const EncoderParams& enc, const Matrix& upstream) {
    const std::size_t k = enc.latent_k();
    if (upstream.rows() != k || upstream.cols() != k)
        throw ShapeError("encode_grad: upstream is " + upstream.shape_string() + ", expected " + std::to_string(k) +
                         "x" + std::to_string(k));
    if (trace.inputs.size() != enc.stages.size() + 1) throw std::invalid_argument("encode_grad: trace does not match");
    EncoderGrads g = zeros_like(enc);

    const Level& feat = trace.inputs.back();
    const Level& z = trace.pre_acts.back();
    const std::size_t kk = z.channels;
    const std::size_t positions = z.height * z.width;
    const double inv = 1.0 / static_cast<double>(positions);
    const auto& up = upstream.storage();

    Level dz{z.height, z.width, kk, std::vector<double>(z.values.size())};
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t j = 0; j < kk; ++j)
            dz.values[p * kk + j] = up[j] * inv * gelu_derivative(z.values[p * kk + j]);

    Level dfeat{feat.height, feat.width, feat.channels, std::vector<double>(feat.values.size(), 0.0)};
    double* gw = g.head_weights.data().data();
    const double* w = enc.head_weights.data().data();
    for (std::size_t p = 0; p < positions; ++p) {
        const double* dzp = &dz.values[p * kk];
        const double* x = &feat.values[p * feat.channels];
        for (std::size_t j = 0; j < kk; ++j) g.head_bias[j] += dzp[j];
        for (std::size_t c = 0; c < feat.channels; ++c) {
            const double* wr = w + c * kk;
            double* gwr = gw + c * kk;
            double acc = 0.0;
            for (std::size_t j = 0; j < kk; ++j) {
                gwr[j] += x[c] * dzp[j];
                acc += wr[j] * dzp[j];
            }
            dfeat.values[p * feat.channels + c] = acc;
        }
    }

    Level dout = std::move(dfeat);
    for (std::size_t s = enc.stages.size(); s-- > 0;) {
        const Level& pre = trace.pre_acts[s];
        for (std::size_t i = 0; i < dout.values.size(); ++i) dout.values[i] *= gelu_derivative(pre.values[i]);
        dout = conv_backward(trace.inputs[s], enc.stages[s], dout, g.stages[s]);
    }
    return g;
}

}  // namespace denim
