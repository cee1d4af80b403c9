// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: denim_acceptance [criterion numbers...]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "denim/fileio.hpp"
#include "denim/image_io.hpp"
#include "denim/metrics.hpp"
#include "denim/params_io.hpp"
#include "denim/pipeline.hpp"
#include "denim/trainer.hpp"
#include "support/oracles.hpp"

using namespace denim;
using namespace denim::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = a.size() == b.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename Image>
Image crop(const Image& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
    const std::size_t c = img.data.size() / (img.height * img.width);
    Image out = img;
    out.height = h;
    out.width = w;
    out.data.assign(h * w * c, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.data[(y * w + x) * c + ch] = img.data[((y0 + y) * img.width + x0 + x) * c + ch];
    return out;
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<std::size_t> side(1, 8);
    const std::size_t ns[] = {1, 2, 3, 5}, ks[] = {4, 8, 32};
    std::size_t instances = 0;
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep)
        for (std::size_t n : ns)
            for (std::size_t k : ks) {
                const ImageStack x = random_stack(side(rng), side(rng), n, rng);
                const DncmParams p = random_params(k, n, rng);
                const LatentCode d(random_matrix(k, k, rng, -0.5, 0.5));
                const CanonicalImage c = dncm_c(x, d, p);
                const CanonicalImage a = dncm_a(c, p);
                const auto ref_c = pixel_chain(x.data, 3 * n, {&p.pc, &d.d, &p.qc, &p.rc});
                const auto ref_a = pixel_chain(c.data, 3, {&p.pa, &p.qa, &p.ra});
                worst = std::max({worst, max_abs_diff(c.data, ref_c), max_abs_diff(a.data, ref_a)});
                ++instances;
            }
    std::ostringstream os;
    os << instances << " instances, max abs error " << worst;
    return {instances >= 100 && worst <= 1e-10, os.str()};
}

Outcome precompose_consistency() {
    std::mt19937_64 rng(1002);
    double worst = 0.0;
    for (std::size_t n : {1, 3, 5}) {
        for (int rep = 0; rep < 3; ++rep) {
            const ImageStack x = random_stack(64, 64, n, rng);
            const DncmParams p = init_params(32, n, 2000 + rep);
            const LatentCode d(random_matrix(32, 32, rng, -0.5, 0.5));
            const PipelineOutput slow = run_mapping(x, d, p, false, 1);
            const PipelineOutput fast = run_mapping(x, d, p, true, 1);
            for (const auto* pair : {&slow.canonical, &slow.awb}) {
                const auto& other = pair == &slow.canonical ? fast.canonical : fast.awb;
                double scale = 0.0;
                for (double v : pair->data) scale = std::max(scale, std::abs(v));
                worst = std::max(worst, max_abs_diff(pair->data, other.data) / scale);
            }
        }
    }
    const std::uint64_t naive = naive_c_muls_per_pixel(32, 5), pre = precomposed_c_muls_per_pixel(5);
    std::ostringstream os;
    os << "max relative error " << worst << ", canonical muls " << naive << "/" << pre;
    return {worst <= 1e-9 && naive == 2624 && pre == 45, os.str()};
}

Outcome gradient_correctness() {
    std::mt19937_64 rng(1003);
    constexpr std::size_t kLowRes = 8;
    Model m;
    m.dncm = init_params(4, 2, 3);
    m.encoder = init_encoder(6, 4, 3, kDefaultEncoderWidths);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto& st : m.encoder->stages)
        for (double& b : st.bias) b = u(rng);
    for (double& b : m.encoder->head_bias) b += u(rng);
    for (double& w : m.encoder->head_weights.storage()) w *= 10.0;

    const std::vector<TrainSample> batch{{random_stack(2, 2, 2, rng), random_image(2, 2, rng)}};
    const BackwardResult r = backward(batch, m, kLowRes, false);
    auto f = [&] {
        const auto& s = batch[0];
        const LatentCode d(oracle_encode(downsample(s.stack, kLowRes), *m.encoder));
        const CanonicalImage awb = dncm_a(dncm_c(s.stack, d, m.dncm), m.dncm);
        double total = 0.0;
        for (std::size_t i = 0; i < awb.data.size(); ++i) total += std::pow(awb.data[i] - s.target.data[i], 2);
        return total;
    };

    std::size_t checked = 0, failed = 0, tensors = 0;
    auto check = [&](std::vector<double>& theta, const std::vector<double>& grad) {
        ++tensors;
        std::vector<std::size_t> idx(theta.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min<std::size_t>(idx.size(), 24));
        for (std::size_t i : idx) {
            ++checked;
            if (!grad_close(grad[i], central_difference(theta[i], f))) ++failed;
        }
    };
    check(m.dncm.pc.storage(), r.grads.pc.storage());
    check(m.dncm.qc.storage(), r.grads.qc.storage());
    check(m.dncm.rc.storage(), r.grads.rc.storage());
    check(m.dncm.pa.storage(), r.grads.pa.storage());
    check(m.dncm.qa.storage(), r.grads.qa.storage());
    check(m.dncm.ra.storage(), r.grads.ra.storage());
    for (std::size_t s = 0; s < m.encoder->stages.size(); ++s) {
        check(m.encoder->stages[s].weights, r.grads.encoder->stages[s].weights);
        check(m.encoder->stages[s].bias, r.grads.encoder->stages[s].bias);
    }
    check(m.encoder->head_weights.storage(), r.grads.encoder->head_weights.storage());
    check(m.encoder->head_bias, r.grads.encoder->head_bias);
    std::ostringstream os;
    os << tensors << " tensors, " << checked << " coordinates, " << failed << " mismatches";
    return {failed == 0, os.str()};
}

Outcome overfit_convergence() {
    const WbSimConfig sim = WbSimConfig::standard();
    std::vector<TrainSample> data;
    for (std::uint64_t i = 0; i < 10; ++i) data.push_back(synthesize_sample(random_scene(64, 64, i), sim, "tds"));
    TrainConfig cfg;
    cfg.steps = 2000;
    cfg.freeze_encoder = true;
    const Model init = init_model(3, cfg);
    const double before = dataset_loss_per_pixel(data, init, cfg.low_res_side);
    const TrainResult r = train(data, cfg, init);
    const double after = dataset_loss_per_pixel(data, r.model, cfg.low_res_side);
    std::ostringstream os;
    os << "per-pixel loss " << before << " -> " << after << " (" << before / after << "x)";
    return {before / after >= 100.0, os.str()};
}

Outcome crop_commutation() {
    std::mt19937_64 rng(1005);
    const std::size_t h = 37, w = 53, n = 3, k = 8;
    const ImageStack x = random_stack(h, w, n, rng);
    const DncmParams p = init_params(k, n, 5);
    const LatentCode d(random_matrix(k, k, rng, -0.5, 0.5));
    const CanonicalImage full_c = dncm_c(x, d, p);
    const CanonicalImage full_a = dncm_a(full_c, p);
    int mismatches = 0;
    for (int i = 0; i < 50; ++i) {
        const std::size_t ch = std::uniform_int_distribution<std::size_t>(1, h)(rng);
        const std::size_t cw = std::uniform_int_distribution<std::size_t>(1, w)(rng);
        const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, h - ch)(rng);
        const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, w - cw)(rng);
        if (!(dncm_c(crop(x, y0, x0, ch, cw), d, p) == crop(full_c, y0, x0, ch, cw))) ++mismatches;
        if (!(dncm_a(crop(full_c, y0, x0, ch, cw), p) == crop(full_a, y0, x0, ch, cw))) ++mismatches;
    }
    return {mismatches == 0, "50 crops, " + std::to_string(mismatches) + " bitwise mismatches"};
}

Outcome ciede2000_conformance() {
    std::ifstream in(std::string(DENIM_TEST_DATA_DIR) + "/ciede2000_conformance.txt");
    std::string line;
    std::size_t pairs = 0;
    double worst = 0.0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Lab a, b;
        double ref = 0.0;
        ls >> a[0] >> a[1] >> a[2] >> b[0] >> b[1] >> b[2] >> ref;
        worst = std::max(worst, std::abs(ciede2000(a, b) - ref));
        ++pairs;
    }
    std::ostringstream os;
    os << pairs << " pairs, max deviation " << worst;
    return {pairs == 34 && worst <= 5e-4, os.str()};
}

Outcome angular_error() {
    const double ortho = angular_error_deg({1, 0, 0}, {0, 1, 0});
    const double half = angular_error_deg({1, 1, 0}, {1, 0, 0});
    const double same = angular_error_deg({0.3, 0.6, 0.2}, {0.3, 0.6, 0.2});
    std::ostringstream os;
    os.precision(15);
    os << "90 -> " << ortho << ", 45 -> " << half << ", identical -> " << same;
    return {std::abs(ortho - 90.0) <= 1e-9 && std::abs(half - 45.0) <= 1e-9 && same == 0.0, os.str()};
}

Outcome efficiency() {
    TrainConfig tc;
    const Model m = init_model(5, tc);
    PipelineConfig cfg;
    BenchOptions opts;
    opts.warmups = 0;
    opts.runs = 1;
    const std::vector<Resolution> res{{3000, 4000}};
    const BenchReport r = bench(res, m, cfg, opts);
    const double speedup = r.variants[0].wall_time_seconds / r.variants[1].wall_time_seconds;
    std::ostringstream os;
    os << "12 MP naive " << r.variants[0].wall_time_seconds << " s, precomposed " << r.variants[1].wall_time_seconds
       << " s, speedup " << speedup << "x";
    return {speedup >= 10.0, os.str()};
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "denim_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const WbSimConfig sim = WbSimConfig::standard();
    std::vector<TrainSample> data;
    for (std::uint64_t i = 0; i < 4; ++i) data.push_back(synthesize_sample(random_scene(24, 20, i), sim, "tds"));
    const ImageStack probe = synthesize_sample(random_scene(33, 41, 99), sim, "tds").stack;

    auto run = [&](const std::string& tag) {
        TrainConfig cfg;
        cfg.k = 8;
        cfg.low_res_side = 16;
        cfg.batch_size = 3;
        cfg.steps = 25;
        cfg.seed = 42;
        cfg.lr = 1e-3;
        const TrainResult r = train(data, cfg);
        save_model(dir / (tag + ".dnim"), r.model);
        PipelineConfig pc;
        pc.k = 8;
        pc.settings = "tds";
        pc.low_res_side = 16;
        const PipelineOutput out = run_pipeline(probe, r.model, pc);
        save_image(dir / (tag + "_awb.ppm"), out.awb);
        save_image(dir / (tag + "_canonical.ppm"), out.canonical);
        return r.model;
    };
    const Model m = run("a");
    run("b");
    bool same = true;
    for (const char* suffix : {".dnim", "_awb.ppm", "_canonical.ppm"})
        same = same && read_file(dir / (std::string("a") + suffix)) == read_file(dir / (std::string("b") + suffix));

    bool thread_invariant = true;
    PipelineConfig pc;
    pc.k = 8;
    pc.settings = "tds";
    pc.low_res_side = 16;
    for (bool pre : {true, false}) {
        pc.use_precompose = pre;
        pc.threads = 1;
        const PipelineOutput one = run_pipeline(probe, m, pc);
        for (unsigned t : {2u, 3u, 8u}) {
            pc.threads = t;
            const PipelineOutput other = run_pipeline(probe, m, pc);
            thread_invariant = thread_invariant && other.awb == one.awb && other.canonical == one.canonical;
        }
    }
    fs::remove_all(dir);
    return {same && thread_invariant, std::string("repeat runs ") + (same ? "identical" : "differ") +
                                          ", thread counts 1/2/3/8 " + (thread_invariant ? "identical" : "differ")};
}

Outcome serialization() {
    const fs::path dir = fs::temp_directory_path() / "denim_acceptance_serialization";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 rng(1010);
    bool ok = true;
    for (std::size_t n : {1, 3, 5}) {
        Model m;
        m.dncm = random_params(32, n, rng);
        m.encoder = init_encoder(3 * n, 32, n);
        const auto bytes = serialize_model(m);
        save_model(dir / "m.dnim", m);
        const Model back = load_model(dir / "m.dnim");
        ok = ok && back == m && serialize_model(back) == bytes && read_file(dir / "m.dnim") == bytes;
        Model bare;
        bare.dncm = m.dncm;
        ok = ok && parse_model(serialize_model(bare)) == bare;
    }
    std::uniform_int_distribution<int> byte(0, 255);
    for (int rep = 0; rep < 5; ++rep) {
        CanonicalImage img(13 + rep, 17);
        for (double& v : img.data) v = byte(rng) / 255.0;
        save_image(dir / "i.ppm", img);
        const CanonicalImage back = load_image(dir / "i.ppm");
        ok = ok && back == img && encode_ppm(back) == read_file(dir / "i.ppm");
    }
    fs::remove_all(dir);
    return {ok, ok ? "parameter files and PPM images round-trip exactly" : "round trip mismatch"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"precomposition consistency", precompose_consistency},
        {"gradient correctness", gradient_correctness},
        {"overfit convergence", overfit_convergence},
        {"crop commutation", crop_commutation},
        {"CIEDE2000 conformance", ciede2000_conformance},
        {"angular error spot checks", angular_error},
        {"precomposition speedup", efficiency},
        {"determinism", determinism},
        {"serialization", serialization},
    };
    std::set<std::size_t> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected.empty() && !selected.count(i + 1)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += o.pass ? 0 : 1;
        std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
