// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the denim Project.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "denim/image_io.hpp"
#include "denim/metrics.hpp"
#include "denim/params_io.hpp"
#include "denim/pipeline.hpp"
#include "denim/trainer.hpp"

namespace py = pybind11;
using namespace denim;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.storage().begin());
    return m;
}

Array image_array(std::size_t h, std::size_t w, std::size_t c, const std::vector<double>& data) {
    Array out({h, w, c});
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

ImageStack to_stack(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) % 3 != 0) throw ShapeError("expected an H x W x 3N array");
    ImageStack s(a.shape(0), a.shape(1), a.shape(2) / 3);
    std::copy(a.data(), a.data() + a.size(), s.data.begin());
    return s;
}

CanonicalImage to_image(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an H x W x 3 array");
    CanonicalImage img(a.shape(0), a.shape(1));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

Array from_image(const CanonicalImage& img) { return image_array(img.height, img.width, 3, img.data); }

Array from_stack(const ImageStack& s) { return image_array(s.height, s.width, s.channels(), s.data); }

}  // namespace

PYBIND11_MODULE(_denim, m) {
    m.doc() = "Deterministic neural illumination mapping for auto white balance";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<PpmError>(m, "PpmError", PyExc_OSError);

    py::class_<Model>(m, "Model")
        .def_static(
            "init",
            [](std::size_t n_settings, std::size_t k, std::uint64_t seed) {
                TrainConfig cfg;
                cfg.k = k;
                cfg.seed = seed;
                return init_model(n_settings, cfg);
            },
            py::arg("n_settings"), py::arg("k") = 32, py::arg("seed") = 0)
        .def_static("load", &load_model, py::arg("path"))
        .def("save", [](const Model& self, const std::filesystem::path& p) { save_model(p, self); }, py::arg("path"))
        .def_static("from_bytes", [](const py::bytes& b) {
            const std::string s = b;
            return parse_model(std::vector<std::uint8_t>(s.begin(), s.end()));
        })
        .def("to_bytes", [](const Model& self) {
            const auto v = serialize_model(self);
            return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
        })
        .def_property_readonly("k", [](const Model& self) { return self.dncm.k; })
        .def_property_readonly("n_settings", [](const Model& self) { return self.dncm.n_settings; })
        .def_property_readonly("has_encoder", [](const Model& self) { return self.encoder.has_value(); })
        .def("matrices",
             [](const Model& self) {
                 const DncmParams& p = self.dncm;
                 py::dict d;
                 d["Pc"] = to_array(p.pc);
                 d["Qc"] = to_array(p.qc);
                 d["Rc"] = to_array(p.rc);
                 d["Pa"] = to_array(p.pa);
                 d["Qa"] = to_array(p.qa);
                 d["Ra"] = to_array(p.ra);
                 return d;
             })
        .def("parameter_count",
             [](const Model& self) {
                 return self.dncm.parameter_count() + (self.encoder ? self.encoder->parameter_count() : 0);
             })
        .def("__eq__", [](const Model& a, const Model& b) { return a == b; });

    m.def(
        "encode",
        [](const Model& model, const Array& stack, std::size_t low_res_side) {
            if (!model.encoder) throw std::invalid_argument("model has no encoder");
            return to_array(latent_for(to_stack(stack), *model.encoder, low_res_side).d);
        },
        py::arg("model"), py::arg("stack"), py::arg("low_res_side") = 256, "Latent code d for an H x W x 3N stack.");

    m.def(
        "dncm_c",
        [](const Model& model, const Array& stack, const Array& d) {
            return from_image(dncm_c(to_stack(stack), LatentCode(to_matrix(d)), model.dncm));
        },
        py::arg("model"), py::arg("stack"), py::arg("d"), "Canonical mapping through the full matrix chain.");

    m.def(
        "dncm_a",
        [](const Model& model, const Array& canonical) { return from_image(dncm_a(to_image(canonical), model.dncm)); },
        py::arg("model"), py::arg("canonical"), "AWB mapping through the full matrix chain.");

    m.def(
        "apply",
        [](const Model& model, const Array& stack, std::size_t low_res_side, bool precompose, unsigned threads) {
            PipelineConfig cfg;
            cfg.k = model.dncm.k;
            cfg.low_res_side = low_res_side;
            cfg.use_precompose = precompose;
            cfg.threads = threads;
            const ImageStack s = to_stack(stack);
            PipelineOutput out;
            {
                py::gil_scoped_release release;
                out = run_pipeline(s, model, cfg);
            }
            py::dict d;
            d["d"] = to_array(out.latent.d);
            d["canonical"] = from_image(out.canonical);
            d["awb"] = from_image(out.awb);
            return d;
        },
        py::arg("model"), py::arg("stack"), py::arg("low_res_side") = 256, py::arg("precompose") = true,
        py::arg("threads") = 1, "Full pipeline; returns a dict with d, canonical and awb.");

    m.def(
        "train",
        [](const std::vector<Array>& stacks, const std::vector<Array>& targets, std::size_t steps, double lr,
           std::size_t batch_size, std::size_t k, std::size_t low_res_side, std::uint64_t seed, bool freeze_encoder,
           std::optional<Model> initial) {
            if (stacks.size() != targets.size()) throw std::invalid_argument("stacks and targets differ in length");
            std::vector<TrainSample> data;
            for (std::size_t i = 0; i < stacks.size(); ++i) data.push_back({to_stack(stacks[i]), to_image(targets[i])});
            TrainConfig cfg;
            cfg.steps = steps;
            cfg.lr = lr;
            cfg.batch_size = batch_size;
            cfg.k = k;
            cfg.low_res_side = low_res_side;
            cfg.seed = seed;
            cfg.freeze_encoder = freeze_encoder;
            TrainResult r;
            {
                py::gil_scoped_release release;
                const std::size_t n = data.empty() ? 1 : data.front().stack.settings;
                r = train(data, cfg, initial ? *initial : init_model(n, cfg));
            }
            Array curve({r.curve.size(), std::size_t{2}});
            auto c = curve.mutable_unchecked<2>();
            for (std::size_t i = 0; i < r.curve.size(); ++i) {
                c(i, 0) = r.curve[i].loss_sum;
                c(i, 1) = r.curve[i].loss_per_pixel;
            }
            return py::make_tuple(r.model, curve);
        },
        py::arg("stacks"), py::arg("targets"), py::arg("steps"), py::arg("lr") = 1e-4, py::arg("batch_size") = 16,
        py::arg("k") = 32, py::arg("low_res_side") = 256, py::arg("seed") = 0, py::arg("freeze_encoder") = false,
        py::arg("initial") = py::none(),
        "AdamW training; returns (model, curve) where curve columns are loss_sum and loss_per_pixel.");

    m.def("random_scene", [](std::size_t h, std::size_t w, std::uint64_t seed) { return from_image(random_scene(h, w, seed)); },
          py::arg("height"), py::arg("width"), py::arg("seed"));

    m.def(
        "synthesize",
        [](const Array& base, const std::string& settings) {
            const TrainSample s = synthesize_sample(to_image(base), WbSimConfig::standard(), settings);
            return py::make_tuple(from_stack(s.stack), from_image(s.target));
        },
        py::arg("base"), py::arg("settings"), "Von Kries renditions of a base image; returns (stack, target).");

    m.def("load_image", [](const std::filesystem::path& p) { return from_image(load_image(p)); }, py::arg("path"));
    m.def("save_image", [](const std::filesystem::path& p, const Array& img) { save_image(p, to_image(img)); },
          py::arg("path"), py::arg("image"));

    m.def(
        "evaluate",
        [](const Array& pred, const Array& gt) {
            const ImageMetrics r = evaluate_pair("", to_image(pred), to_image(gt));
            py::dict d;
            d["mse"] = r.mse;
            d["mae_deg"] = r.mae_degrees;
            d["de2000"] = r.de2000;
            return d;
        },
        py::arg("pred"), py::arg("gt"), "MSE, mean angular error and mean CIEDE2000 of one image pair.");

    m.def("ciede2000", [](const Lab& a, const Lab& b) { return ciede2000(a, b); }, py::arg("lab1"), py::arg("lab2"));
    m.def("angular_error_deg", [](const Rgb& a, const Rgb& b) { return angular_error_deg(a, b); }, py::arg("a"),
          py::arg("b"));
    m.def("srgb_to_lab", [](const Rgb& rgb) { return srgb_to_lab(rgb); }, py::arg("rgb"));

    m.def("naive_c_muls_per_pixel", &naive_c_muls_per_pixel, py::arg("k"), py::arg("n_settings"));
    m.def("precomposed_c_muls_per_pixel", &precomposed_c_muls_per_pixel, py::arg("n_settings"));
    m.def("naive_a_muls_per_pixel", &naive_a_muls_per_pixel, py::arg("k"));
    m.def("precomposed_a_muls_per_pixel", &precomposed_a_muls_per_pixel);
}
