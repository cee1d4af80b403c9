// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include "denim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "denim/rng.hpp"

namespace denim {

namespace {

// Visits (param, grad) pairs of every trainable tensor in a fixed order.
template <class Fn>
void for_each_tensor(Model& model, const Gradients& g, Fn&& fn) {
    DncmParams& p = model.dncm;
    fn(p.pc.data(), g.pc.data());
    fn(p.qc.data(), g.qc.data());
    fn(p.rc.data(), g.rc.data());
    fn(p.pa.data(), g.pa.data());
    fn(p.qa.data(), g.qa.data());
    fn(p.ra.data(), g.ra.data());
    if (!g.encoder) return;
    if (!model.encoder) throw std::invalid_argument("adamw_step: encoder gradients supplied for a model without one");
    EncoderParams& e = *model.encoder;
    const EncoderGrads& ge = *g.encoder;
    for (std::size_t s = 0; s < e.stages.size(); ++s) {
        fn(std::span<double>(e.stages[s].weights), std::span<const double>(ge.stages[s].weights));
        fn(std::span<double>(e.stages[s].bias), std::span<const double>(ge.stages[s].bias));
    }
    fn(e.head_weights.data(), ge.head_weights.data());
    fn(std::span<double>(e.head_bias), std::span<const double>(ge.head_bias));
}

// x^T * y for two pixel-major buffers with cx and cy channels.
Matrix pixel_outer(std::span<const double> x, std::size_t cx, std::span<const double> y, std::size_t cy,
                   std::size_t pixels) {
    Matrix out(cx, cy);
    double* o = out.data().data();
    for (std::size_t p = 0; p < pixels; ++p) {
        const double* xp = x.data() + p * cx;
        const double* yp = y.data() + p * cy;
        for (std::size_t i = 0; i < cx; ++i)
            for (std::size_t j = 0; j < cy; ++j) o[i * cy + j] += xp[i] * yp[j];
    }
    return out;
}

void accumulate(Matrix& into, const Matrix& m) {
    for (std::size_t i = 0; i < into.size(); ++i) into.storage()[i] += m.storage()[i];
}

void accumulate(EncoderGrads& into, const EncoderGrads& g) {
    for (std::size_t s = 0; s < into.stages.size(); ++s) {
        for (std::size_t i = 0; i < into.stages[s].weights.size(); ++i)
            into.stages[s].weights[i] += g.stages[s].weights[i];
        for (std::size_t i = 0; i < into.stages[s].bias.size(); ++i) into.stages[s].bias[i] += g.stages[s].bias[i];
    }
    accumulate(into.head_weights, g.head_weights);
    for (std::size_t i = 0; i < into.head_bias.size(); ++i) into.head_bias[i] += g.head_bias[i];
}

const EncoderParams& require_encoder(const Model& model) {
    if (!model.encoder) throw std::invalid_argument("model has no encoder section");
    return *model.encoder;
}

BackwardResult backward_impl(std::span<const TrainSample* const> batch, const Model& model, std::size_t low_res_side,
                             bool freeze_encoder, std::span<const LatentCode* const> cache) {
    const DncmParams& p = model.dncm;
    p.validate();
    const EncoderParams& enc = require_encoder(model);
    const std::size_t k = p.k;
    const std::size_t c_in = 3 * p.n_settings;

    BackwardResult res;
    Gradients& g = res.grads;
    g.pc = Matrix(c_in, k);
    g.qc = Matrix(k, k);
    g.rc = Matrix(k, 3);
    g.pa = Matrix(3, k);
    g.qa = Matrix(k, k);
    g.ra = Matrix(k, 3);
    if (!freeze_encoder) g.encoder = zeros_like(enc);

    const Matrix ma = precompose_a(p);
    const Matrix ma_t = ma.transposed();
    Matrix d_ma(3, 3);

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const TrainSample& s = *batch[i];
        if (s.stack.settings != p.n_settings) throw ShapeError("backward: sample has the wrong number of settings");
        if (s.stack.height != s.target.height || s.stack.width != s.target.width)
            throw ShapeError("backward: stack and target dimensions differ");

        EncoderTrace trace;
        LatentCode d;
        if (freeze_encoder && i < cache.size() && cache[i] != nullptr) {
            d = *cache[i];
        } else {
            const ImageStack lr = downsample(s.stack, low_res_side);
            d = encode(lr, enc, freeze_encoder ? nullptr : &trace);
        }

        const Matrix d_qc = matmul(d.d, p.qc);
        const Matrix d_qc_rc = matmul(d_qc, p.rc);
        const Matrix pc_d = matmul(p.pc, d.d);
        const Matrix pc_d_qc = matmul(pc_d, p.qc);
        const Matrix mc = matmul(p.pc, d_qc_rc);

        const CanonicalImage canon = apply_color_map(s.stack, mc);
        const CanonicalImage awb = apply_color_map(canon, ma);
        const std::size_t px = s.stack.pixels();

        std::vector<double> grad_awb(px * 3);
        for (std::size_t j = 0; j < grad_awb.size(); ++j) {
            const double diff = awb.data[j] - s.target.data[j];
            res.loss_sum += diff * diff;
            grad_awb[j] = 2.0 * diff;
        }
        res.pixels += px;

        accumulate(d_ma, pixel_outer(canon.data, 3, grad_awb, 3, px));
        std::vector<double> grad_canon(px * 3, 0.0);
        for (std::size_t q = 0; q < px; ++q)
            for (std::size_t a = 0; a < 3; ++a) {
                double acc = 0.0;
                for (std::size_t b = 0; b < 3; ++b) acc += grad_awb[q * 3 + b] * ma_t(b, a);
                grad_canon[q * 3 + a] = acc;
            }
        const Matrix d_mc = pixel_outer(s.stack.data, c_in, grad_canon, 3, px);

        // mc = Pc * d * Qc * Rc
        accumulate(g.pc, matmul(d_mc, d_qc_rc.transposed()));
        accumulate(g.qc, matmul(matmul(pc_d.transposed(), d_mc), p.rc.transposed()));
        accumulate(g.rc, matmul(pc_d_qc.transposed(), d_mc));
        if (!freeze_encoder) {
            const Matrix qc_rc = matmul(p.qc, p.rc);
            const Matrix d_d = matmul(matmul(p.pc.transposed(), d_mc), qc_rc.transposed());
            accumulate(*g.encoder, encode_grad(trace, enc, d_d));
        }
    }

    // ma = Pa * Qa * Ra
    const Matrix qa_ra = matmul(p.qa, p.ra);
    const Matrix pa_qa = matmul(p.pa, p.qa);
    g.pa = matmul(d_ma, qa_ra.transposed());
    g.qa = matmul(matmul(p.pa.transposed(), d_ma), p.ra.transposed());
    g.ra = matmul(pa_qa.transposed(), d_ma);
    return res;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    CounterRng rng(seed, 1000 + epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

// Rough von Kries gains of each preset relative to a daylight render.
constexpr std::array<std::pair<char, std::array<double, 3>>, 5> kStandardGains = {{
    {'t', {0.60, 1.00, 1.65}},
    {'f', {0.78, 1.00, 1.32}},
    {'d', {1.00, 1.00, 1.00}},
    {'c', {1.10, 1.00, 0.89}},
    {'s', {1.19, 1.00, 0.81}},
}};

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be non-negative");
    if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
    if (!(eps > 0.0)) fail("eps must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
    if (batch_size == 0) fail("batch_size must be positive");
    if (low_res_side < 8) fail("low_res_side must be at least 8");
    if (k < 3) fail("k must be at least 3");
}

WbSimConfig WbSimConfig::standard() {
    WbSimConfig sim;
    for (const auto& [letter, gains] : kStandardGains) sim.gains[letter] = gains;
    return sim;
}

void WbSimConfig::validate() const {
    for (const auto& [letter, g] : gains)
        for (double v : g)
            if (!(v > 0.0)) throw std::invalid_argument(std::string("WbSimConfig: non-positive gain for '") + letter + "'");
}

TrainSample synthesize_sample(const CanonicalImage& base, const WbSimConfig& sim, std::string_view settings) {
    base.validate();
    sim.validate();
    if (settings.empty()) throw std::invalid_argument("synthesize_sample: no settings requested");
    std::vector<std::array<double, 3>> gains;
    for (char c : settings) {
        auto it = sim.gains.find(c);
        if (it == sim.gains.end()) throw std::invalid_argument(std::string("synthesize_sample: unknown setting '") + c + "'");
        gains.push_back(it->second);
    }
    const std::size_t n = gains.size();
    ImageStack stack(base.height, base.width, n);
    for (std::size_t p = 0; p < base.pixels(); ++p)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < 3; ++c)
                stack.data[p * 3 * n + 3 * j + c] = std::clamp(base.data[p * 3 + c] * gains[j][c], 0.0, 1.0);
    return TrainSample{std::move(stack), base};
}

CanonicalImage random_scene(std::size_t height, std::size_t width, std::uint64_t seed) {
    CounterRng rng(seed, 7);
    constexpr int kWaves = 4;
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::array<std::array<Wave, kWaves>, 3> waves{};
    std::array<double, 3> offset{};
    for (std::size_t c = 0; c < 3; ++c) {
        offset[c] = rng.uniform(0.3, 0.7);
        for (auto& w : waves[c])
            w = {rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0), rng.uniform(0.0, 2.0 * std::numbers::pi),
                 rng.uniform(0.03, 0.12)};
    }
    CanonicalImage img(height, width);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double u = static_cast<double>(x) / static_cast<double>(width);
            const double v = static_cast<double>(y) / static_cast<double>(height);
            for (std::size_t c = 0; c < 3; ++c) {
                double val = offset[c];
                for (const auto& w : waves[c])
                    val += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
                img.at(y, x, c) = std::clamp(val, 0.05, 0.95);
            }
        }
    return img;
}

double loss(const CanonicalImage& pred, const CanonicalImage& gt) {
    if (pred.height != gt.height || pred.width != gt.width || pred.data.size() != gt.data.size())
        throw ShapeError("loss: image dimensions differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double diff = gt.data[i] - pred.data[i];
        acc += diff * diff;
    }
    return acc;
}

LatentCode latent_for(const ImageStack& stack, const EncoderParams& enc, std::size_t low_res_side) {
    return encode(downsample(stack, low_res_side), enc);
}

CanonicalImage forward(const ImageStack& stack, const Model& model, std::size_t low_res_side, unsigned threads) {
    const LatentCode d = latent_for(stack, require_encoder(model), low_res_side);
    const CanonicalImage canon = apply_color_map(stack, precompose_c(d, model.dncm), threads);
    return apply_color_map(canon, precompose_a(model.dncm), threads);
}

BackwardResult backward(std::span<const TrainSample> batch, const Model& model, std::size_t low_res_side,
                        bool freeze_encoder, std::span<const LatentCode> latent_cache) {
    std::vector<const TrainSample*> ptrs;
    std::vector<const LatentCode*> cache;
    for (const auto& s : batch) ptrs.push_back(&s);
    for (const auto& c : latent_cache) cache.push_back(&c);
    return backward_impl(ptrs, model, low_res_side, freeze_encoder, cache);
}

void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                  std::uint64_t step, const TrainConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] = theta[i] - cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps)) - cfg.lr * cfg.weight_decay * theta[i];
    }
}

void adamw_step(Model& model, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
    ++state.step;
    std::size_t slot = 0;
    for_each_tensor(model, grads, [&](std::span<double> theta, std::span<const double> grad) {
        if (theta.size() != grad.size()) throw ShapeError("adamw_step: gradient shape does not match parameter");
        if (state.m.size() <= slot) {
            state.m.emplace_back(theta.size(), 0.0);
            state.v.emplace_back(theta.size(), 0.0);
        }
        if (state.m[slot].size() != theta.size()) throw ShapeError("adamw_step: optimizer state shape mismatch");
        adamw_update(theta, grad, state.m[slot], state.v[slot], state.step, cfg);
        ++slot;
    });
}

Model init_model(std::size_t n_settings, const TrainConfig& cfg) {
    Model m;
    m.dncm = init_params(cfg.k, n_settings, cfg.seed);
    m.encoder = init_encoder(3 * n_settings, cfg.k, cfg.seed);
    return m;
}

TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    return train(dataset, cfg, init_model(dataset.front().stack.settings, cfg));
}

TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg, Model initial) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    const std::size_t n = initial.dncm.n_settings;
    for (const auto& s : dataset)
        if (s.stack.settings != n) throw ShapeError("train: samples disagree on the number of settings");

    TrainResult result{std::move(initial), {}};
    Model& model = result.model;
    const EncoderParams& enc0 = require_encoder(model);

    std::vector<LatentCode> latents;
    if (cfg.freeze_encoder) {
        latents.reserve(dataset.size());
        for (const auto& s : dataset) latents.push_back(latent_for(s.stack, enc0, cfg.low_res_side));
    }

    AdamState state;
    std::uint64_t epoch = 0;
    std::vector<std::size_t> order = permutation(dataset.size(), cfg.seed, epoch);
    std::size_t cursor = 0;
    std::vector<const TrainSample*> batch;
    std::vector<const LatentCode*> cache;
    result.curve.reserve(cfg.steps);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        batch.clear();
        cache.clear();
        while (batch.size() < cfg.batch_size) {
            if (cursor == order.size()) {
                order = permutation(dataset.size(), cfg.seed, ++epoch);
                cursor = 0;
            }
            const std::size_t idx = order[cursor++];
            batch.push_back(&dataset[idx]);
            if (cfg.freeze_encoder) cache.push_back(&latents[idx]);
        }
        BackwardResult br = backward_impl(batch, model, cfg.low_res_side, cfg.freeze_encoder, cache);
        result.curve.push_back({step, br.loss_sum, br.loss_sum / static_cast<double>(br.pixels)});
        adamw_step(model, br.grads, state, cfg);
    }
    return result;
}

double dataset_loss_per_pixel(std::span<const TrainSample> dataset, const Model& model, std::size_t low_res_side) {
    if (dataset.empty()) throw std::invalid_argument("dataset_loss_per_pixel: dataset is empty");
    double acc = 0.0;
    for (const auto& s : dataset)
        acc += loss(forward(s.stack, model, low_res_side), s.target) / static_cast<double>(s.stack.pixels());
    return acc / static_cast<double>(dataset.size());
}

std::string loss_curve_csv(std::span<const LossPoint> curve) {
    std::ostringstream os;
    os.precision(17);
    os << "step,loss_sum,loss_per_pixel\n";
    for (const auto& p : curve) os << p.step << ',' << p.loss_sum << ',' << p.loss_per_pixel << '\n';
    return os.str();
}

}  // namespace denim
