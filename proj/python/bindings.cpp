// Copyright 2026 The sase Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python module _sase. Configurations cross the boundary as JSON text; the
// sase package wraps that in dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sase/dsp/stft.hpp"
#include "sase/dsp/wav.hpp"
#include "sase/model/io.hpp"
#include "sase/train/config.hpp"
#include "sase/train/trainer.hpp"

namespace py = pybind11;
using namespace sase;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor to_grid(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  return Tensor({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))},
                {a.data(), a.data() + a.size()});
}

dsp::StftConfig stft_config(std::size_t dft, std::size_t hop, std::size_t window) {
  dsp::StftConfig c{dft, hop, window};
  c.validate();
  return c;
}

struct PyModel {
  model::Model m;
};

}  // namespace

PYBIND11_MODULE(_sase, mod) {
  mod.doc() = "Self-adapting speech enhancement core";

  py::register_exception<DataError>(mod, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(mod, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ShapeError>(mod, "ShapeError", PyExc_ValueError);

  mod.def(
      "stft",
      [](const Array& x, std::size_t dft, std::size_t hop, std::size_t window) {
        const auto s = dsp::stft(to_vector(x), stft_config(dft, hop, window));
        return py::make_tuple(to_array(s.real), to_array(s.imag));
      },
      py::arg("x"), py::arg("dft_size") = 512, py::arg("hop") = 128, py::arg("window_length") = 512,
      "One-sided spectrum as (real, imag), each F x K.");

  mod.def(
      "istft",
      [](const Array& real, const Array& imag, std::size_t length, std::size_t dft, std::size_t hop,
         std::size_t window) {
        const auto cfg = stft_config(dft, hop, window);
        dsp::Spectrogram s{to_grid(real), to_grid(imag), cfg};
        return to_array(dsp::istft(s, cfg, length));
      },
      py::arg("real"), py::arg("imag"), py::arg("length"), py::arg("dft_size") = 512, py::arg("hop") = 128,
      py::arg("window_length") = 512);

  mod.def(
      "si_sdr", [](const Array& ref, const Array& est) { return objectives::si_sdr(to_vector(ref), to_vector(est)); },
      py::arg("reference"), py::arg("estimate"));
  mod.def(
      "sdr",
      [](const Array& ref, const Array& est) { return objectives::sdr(to_vector(ref), to_vector(est)); },
      py::arg("reference"), py::arg("estimate"));
  mod.def(
      "sdr_loss",
      [](const Array& clean, const Array& est, const Array& mix, double beta) {
        objectives::LossConfig cfg;
        cfg.beta = beta;
        const auto b = objectives::evaluate_sdr_loss(to_vector(clean), to_vector(est), to_vector(mix), cfg);
        return py::dict(py::arg("total") = b.total, py::arg("sdr_speech") = b.sdr_speech,
                        py::arg("sdr_noise") = b.sdr_noise);
      },
      py::arg("clean"), py::arg("estimate"), py::arg("mixture"), py::arg("beta") = 20.0);

  mod.def(
      "lr_at",
      [](std::size_t epoch, std::size_t epochs, double lr) {
        train::TrainConfig c;
        c.epochs = epochs;
        c.learning_rate = lr;
        return train::lr_at(epoch, c);
      },
      py::arg("epoch"), py::arg("epochs") = 200, py::arg("learning_rate") = 1e-3);

  mod.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const auto w = dsp::read_wav(path);
        return py::make_tuple(to_array(w.samples), w.sample_rate);
      },
      py::arg("path"), "Returns (samples, sample_rate).");
  mod.def(
      "write_wav",
      [](const std::filesystem::path& path, const Array& x, std::uint32_t rate) {
        dsp::write_wav(path, to_vector(x), rate);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 16000);

  mod.def(
      "resolve_config",
      [](const std::string& text, const std::vector<std::string>& overrides) {
        auto j = text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
        for (const auto& o : overrides) train::apply_override(j, o);
        return train::to_json(train::run_config_from_json(j)).dump();
      },
      py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

  mod.def(
      "generate_corpus",
      [](const std::string& text, const std::filesystem::path& out_dir) {
        const auto cfg = train::run_config_from_json(nlohmann::json::parse(text));
        return data::generate_corpus(cfg.data, out_dir).entries.size();
      },
      py::arg("config_json"), py::arg("out_dir"));

  mod.def(
      "train",
      [](const std::filesystem::path& manifest_path, const std::string& text, const std::filesystem::path& out_dir) {
        const auto cfg = train::run_config_from_json(nlohmann::json::parse(text));
        const auto manifest = data::read_manifest(manifest_path);
        const auto d = train::load_protocol_data(manifest, cfg.train);
        train::TrainOptions o;
        o.out_dir = out_dir;
        py::gil_scoped_release release;
        return train::report_json(train::train(d, cfg.train, o).report).dump();
      },
      py::arg("manifest"), py::arg("config_json"), py::arg("out_dir") = std::filesystem::path());

  py::class_<PyModel>(mod, "Model")
      .def_static(
          "load", [](const std::filesystem::path& stem) { return PyModel{model::load_model(stem)}; },
          py::arg("stem"))
      .def_property_readonly("config_json", [](const PyModel& p) { return nlohmann::json(p.m.config).dump(); })
      .def_property_readonly("parameter_count", [](const PyModel& p) { return p.m.params.total_elements(); })
      .def(
          "enhance",
          [](const PyModel& p, const Array& x) {
            const auto in = to_vector(x);
            std::vector<double> y;
            {
              py::gil_scoped_release release;
              y = model::enhance(p.m, in);
            }
            return to_array(y);
          },
          py::arg("mixture"))
      .def(
          "enhance_with_diagnostics",
          [](const PyModel& p, const Array& x) {
            model::Diagnostics d;
            const auto y = model::enhance(p.m, to_vector(x), &d);
            py::list attention;
            for (const auto& module : d.attention) {
              py::list heads;
              for (const auto& h : module) heads.append(to_array(h));
              attention.append(heads);
            }
            py::object posteriors = d.frame_posteriors.empty() ? py::object(py::none())
                                                                : py::object(to_array(d.frame_posteriors));
            return py::make_tuple(to_array(y), posteriors, attention);
          },
          py::arg("mixture"), "Returns (enhanced, posteriors L x K or None, attention[module][head]).");
}
