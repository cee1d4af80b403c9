// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

// denim: train, apply, evaluate, benchmark and inspect illumination mapping models.
// Exit status: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "denim/fileio.hpp"
#include "denim/image_io.hpp"
#include "denim/metrics.hpp"
#include "denim/params_io.hpp"
#include "denim/pipeline.hpp"
#include "denim/trainer.hpp"

using namespace denim;
namespace fs = std::filesystem;

namespace {

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainArgs {
    std::string data_dir;
    std::size_t synthetic = 0;
    std::size_t synthetic_side = 64;
    std::string settings = "tfdcs";
    std::string out;
    std::string curve;
    std::string init;
    TrainConfig cfg;
};

struct ApplyArgs {
    std::string params;
    std::string settings = "tfdcs";
    std::vector<std::string> inputs;
    std::string stack;
    std::size_t height = 0;
    std::size_t width = 0;
    std::string canonical;
    std::string awb;
    std::size_t low_res_side = 256;
    bool naive = false;
    unsigned threads = default_threads();
};

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string out;
    std::string json;
};

struct BenchArgs {
    std::string params;
    std::vector<std::string> resolutions{"512x512", "1024x1024", "2048x2048"};
    std::size_t settings = 5;
    std::size_t k = 32;
    std::uint64_t seed = 0;
    std::size_t low_res_side = 256;
    std::size_t warmups = 2;
    std::size_t runs = 5;
    unsigned threads = default_threads();
    std::string out;
};

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file_atomic(path, text);
}

std::vector<fs::path> ppm_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

// A dataset directory holds <name>_<letter>.ppm for every setting letter and
// <name>_gt.ppm for the ground truth.
std::vector<TrainSample> load_dataset(const fs::path& dir, const std::string& settings) {
    std::vector<TrainSample> data;
    const std::string suffix = "_gt.ppm";
    for (const fs::path& gt : ppm_files(dir)) {
        const std::string name = gt.filename().string();
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        const std::string stem = name.substr(0, name.size() - suffix.size());
        std::vector<CanonicalImage> renditions;
        for (char s : settings) renditions.push_back(load_image(dir / (stem + "_" + s + ".ppm")));
        data.push_back({assemble_stack(renditions, settings), load_image(gt)});
    }
    if (data.empty()) throw std::runtime_error("no <name>_gt.ppm samples found in " + dir.string());
    return data;
}

int run_train(const TrainArgs& a) {
    validate_settings(a.settings);
    std::vector<TrainSample> data;
    if (!a.data_dir.empty()) {
        data = load_dataset(a.data_dir, a.settings);
    } else {
        const WbSimConfig sim = WbSimConfig::standard();
        for (std::size_t i = 0; i < a.synthetic; ++i)
            data.push_back(synthesize_sample(random_scene(a.synthetic_side, a.synthetic_side, a.cfg.seed * 1000003 + i),
                                             sim, a.settings));
    }
    const Model initial = a.init.empty() ? init_model(a.settings.size(), a.cfg) : load_model(a.init);
    const TrainResult r = train(data, a.cfg, initial);
    save_model(a.out, r.model);
    if (!a.curve.empty()) write_file_atomic(a.curve, loss_curve_csv(r.curve));
    if (!r.curve.empty())
        std::cout << "trained " << r.curve.size() << " steps on " << data.size() << " samples, final loss per pixel "
                  << r.curve.back().loss_per_pixel << "\n";
    return 0;
}

ImageStack read_raw_stack(const fs::path& path, std::size_t h, std::size_t w, std::size_t n) {
    const auto bytes = read_file(path);
    const std::size_t count = h * w * 3 * n;
    if (h == 0 || w == 0) throw UsageError("--stack requires --height and --width");
    if (bytes.size() != count * 8)
        throw std::runtime_error("raw stack " + path.string() + " has " + std::to_string(bytes.size()) +
                                 " bytes, expected " + std::to_string(count * 8));
    ImageStack s(h, w, n);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[i * 8 + b];
        s.data[i] = std::bit_cast<double>(bits);
    }
    return s;
}

int run_apply(const ApplyArgs& a) {
    validate_settings(a.settings);
    if (a.inputs.empty() == a.stack.empty()) throw UsageError("give either --input images or --stack");
    if (a.canonical.empty() && a.awb.empty()) throw UsageError("give --canonical and/or --awb output paths");
    const Model model = load_model(a.params);
    ImageStack stack;
    if (!a.stack.empty()) {
        stack = read_raw_stack(a.stack, a.height, a.width, a.settings.size());
    } else {
        std::vector<CanonicalImage> images;
        for (const auto& p : a.inputs) images.push_back(load_image(p));
        stack = assemble_stack(images, a.settings);
    }
    PipelineConfig cfg;
    cfg.params_path = a.params;
    cfg.k = model.dncm.k;
    cfg.settings = a.settings;
    cfg.low_res_side = a.low_res_side;
    cfg.use_precompose = !a.naive;
    cfg.threads = a.threads;
    cfg.validate();
    const PipelineOutput out = run_pipeline(stack, model, cfg);
    if (!a.canonical.empty()) save_image(a.canonical, out.canonical);
    if (!a.awb.empty()) save_image(a.awb, out.awb);
    return 0;
}

int run_eval(const EvalArgs& a) {
    std::vector<ImageMetrics> rows;
    for (const fs::path& gt : ppm_files(a.gt)) {
        const fs::path pred = fs::path(a.pred) / gt.filename();
        if (!fs::exists(pred)) throw std::runtime_error("missing prediction " + pred.string());
        rows.push_back(evaluate_pair(gt.filename().string(), load_image(pred), load_image(gt)));
    }
    if (rows.empty()) throw std::runtime_error("no .ppm files in " + a.gt);
    const MetricsReport report = make_report(std::move(rows));
    emit(a.out, report_csv(report));
    if (!a.json.empty()) emit(a.json, report_json(report));
    return 0;
}

Resolution parse_resolution(const std::string& s) {
    const auto x = s.find('x');
    std::size_t h = 0, w = 0;
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        h = std::stoul(s.substr(0, x));
        w = std::stoul(s.substr(x + 1));
    } catch (const std::exception&) {
        throw UsageError("resolution '" + s + "' is not HxW");
    }
    if (h == 0 || w == 0) throw UsageError("resolution '" + s + "' has a zero side");
    return {h, w};
}

int run_bench(const BenchArgs& a) {
    std::vector<Resolution> res;
    for (const auto& s : a.resolutions) res.push_back(parse_resolution(s));
    Model model;
    if (!a.params.empty()) {
        model = load_model(a.params);
    } else {
        TrainConfig tc;
        tc.k = a.k;
        tc.seed = a.seed;
        model = init_model(a.settings, tc);
    }
    PipelineConfig cfg;
    cfg.k = model.dncm.k;
    cfg.low_res_side = a.low_res_side;
    cfg.threads = a.threads;
    BenchOptions opts;
    opts.warmups = a.warmups;
    opts.runs = a.runs;
    opts.seed = a.seed;
    emit(a.out, bench_csv(bench(res, model, cfg, opts)));
    return 0;
}

int run_inspect(const std::string& path) {
    const Model m = load_model(path);
    const DncmParams& p = m.dncm;
    std::ostringstream os;
    os << "k " << p.k << "\nsettings " << p.n_settings << "\n";
    const std::pair<const char*, const Matrix*> mats[] = {{"Pc", &p.pc}, {"Qc", &p.qc}, {"Rc", &p.rc},
                                                         {"Pa", &p.pa}, {"Qa", &p.qa}, {"Ra", &p.ra}};
    for (const auto& [name, mat] : mats) os << name << ' ' << mat->shape_string() << "\n";
    os << "dncm_parameters " << p.parameter_count() << "\n";
    if (m.encoder) {
        const EncoderParams& e = *m.encoder;
        for (std::size_t i = 0; i < e.stages.size(); ++i)
            os << "conv" << i << ' ' << e.stages[i].in_channels << "->" << e.stages[i].out_channels << "\n";
        os << "head " << e.head_weights.shape_string() << "\n";
        os << "encoder_parameters " << e.parameter_count() << "\n";
        os << "total_parameters " << p.parameter_count() + e.parameter_count() << "\n";
    } else {
        os << "encoder none\n";
        os << "total_parameters " << p.parameter_count() << "\n";
    }
    std::cout << os.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic neural illumination mapping for auto white balance"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train a model and write a parameter file");
    auto* data_opt = train_cmd->add_option("--data", ta.data_dir, "Dataset directory of <name>_<s>.ppm and <name>_gt.ppm")
                         ->check(CLI::ExistingDirectory);
    auto* syn_opt = train_cmd->add_option("--synthetic", ta.synthetic, "Number of synthetic von Kries samples")
                        ->check(CLI::PositiveNumber);
    data_opt->excludes(syn_opt);
    train_cmd->add_option("--synthetic-size", ta.synthetic_side, "Side of synthetic images")->check(CLI::PositiveNumber);
    train_cmd->add_option("--settings", ta.settings, "WB setting letters from tfdcs")->capture_default_str();
    train_cmd->add_option("-o,--out", ta.out, "Output parameter file")->required();
    train_cmd->add_option("--curve", ta.curve, "Loss curve CSV output");
    train_cmd->add_option("--init", ta.init, "Start from this parameter file")->check(CLI::ExistingFile);
    train_cmd->add_option("--steps", ta.cfg.steps, "Optimizer steps")->required();
    train_cmd->add_option("--lr", ta.cfg.lr)->capture_default_str();
    train_cmd->add_option("--beta1", ta.cfg.beta1)->capture_default_str();
    train_cmd->add_option("--beta2", ta.cfg.beta2)->capture_default_str();
    train_cmd->add_option("--eps", ta.cfg.eps)->capture_default_str();
    train_cmd->add_option("--weight-decay", ta.cfg.weight_decay)->capture_default_str();
    train_cmd->add_option("--batch-size", ta.cfg.batch_size)->capture_default_str();
    train_cmd->add_option("--low-res", ta.cfg.low_res_side, "Encoder input side")->capture_default_str();
    train_cmd->add_option("--k", ta.cfg.k, "Latent size")->capture_default_str();
    train_cmd->add_option("--seed", ta.cfg.seed)->capture_default_str();
    train_cmd->add_flag("--freeze-encoder", ta.cfg.freeze_encoder, "Keep encoder weights fixed");
    train_cmd->add_option("--threads", ta.cfg.threads)->capture_default_str();

    ApplyArgs aa;
    auto* apply_cmd = app.add_subcommand("apply", "Map a multi-setting capture to canonical and AWB images");
    apply_cmd->add_option("-p,--params", aa.params, "Parameter file")->required()->check(CLI::ExistingFile);
    apply_cmd->add_option("--settings", aa.settings, "Setting letters in input order")->capture_default_str();
    auto* in_opt = apply_cmd->add_option("-i,--input", aa.inputs, "Per-setting PPM images in settings order")
                       ->check(CLI::ExistingFile);
    auto* stack_opt = apply_cmd->add_option("--stack", aa.stack, "Raw little-endian f64 HxWx3N stack")
                          ->check(CLI::ExistingFile);
    in_opt->excludes(stack_opt);
    apply_cmd->add_option("--height", aa.height, "Raw stack height");
    apply_cmd->add_option("--width", aa.width, "Raw stack width");
    apply_cmd->add_option("--canonical", aa.canonical, "Canonical output PPM");
    apply_cmd->add_option("--awb", aa.awb, "White-balanced output PPM");
    apply_cmd->add_option("--low-res", aa.low_res_side)->capture_default_str();
    apply_cmd->add_flag("--naive", aa.naive, "Evaluate the full matrix chain per pixel");
    apply_cmd->add_option("--threads", aa.threads)->capture_default_str();

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth with matching file names");
    eval_cmd->add_option("--pred", ea.pred, "Prediction directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--gt", ea.gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("-o,--out", ea.out, "CSV report (stdout if omitted)");
    eval_cmd->add_option("--json", ea.json, "JSON summary");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "Time naive and precomposed mapping");
    bench_cmd->add_option("-p,--params", ba.params, "Parameter file (random model if omitted)")
        ->check(CLI::ExistingFile);
    bench_cmd->add_option("-r,--resolutions", ba.resolutions, "HxW list")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--settings", ba.settings, "Setting count for a random model")->capture_default_str();
    bench_cmd->add_option("--k", ba.k, "Latent size for a random model")->capture_default_str();
    bench_cmd->add_option("--seed", ba.seed)->capture_default_str();
    bench_cmd->add_option("--low-res", ba.low_res_side)->capture_default_str();
    bench_cmd->add_option("--warmups", ba.warmups)->capture_default_str();
    bench_cmd->add_option("--runs", ba.runs)->capture_default_str();
    bench_cmd->add_option("--threads", ba.threads)->capture_default_str();
    bench_cmd->add_option("-o,--out", ba.out, "CSV report (stdout if omitted)");

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "Print shapes and parameter counts");
    inspect_cmd->add_option("params", inspect_path, "Parameter file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsageError;
    }

    try {
        if (*train_cmd) {
            if (ta.data_dir.empty() && ta.synthetic == 0) throw UsageError("train needs --data or --synthetic");
            return run_train(ta);
        }
        if (*apply_cmd) return run_apply(aa);
        if (*eval_cmd) return run_eval(ea);
        if (*bench_cmd) return run_bench(ba);
        return run_inspect(inspect_path);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}
