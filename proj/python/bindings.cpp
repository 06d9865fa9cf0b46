// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flower/dsp/distortion.hpp"
#include "flower/dsp/iir.hpp"
#include "flower/dsp/reverb.hpp"
#include "flower/dsp/stft.hpp"
#include "flower/dsp/wav.hpp"
#include "flower/experiment/config.hpp"
#include "flower/experiment/run.hpp"
#include "flower/metrics/metrics.hpp"

namespace py = pybind11;
using namespace flower;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

dsp::AudioBuffer to_audio(const Array& a, std::uint32_t rate) {
  dsp::AudioBuffer audio;
  audio.samples = to_vector(a);
  audio.sample_rate = rate;
  return audio;
}

metrics::Band parse_band(const std::string& name) {
  if (name == "full") return metrics::Band::kFull;
  if (name == "high") return metrics::Band::kHigh;
  if (name == "low") return metrics::Band::kLow;
  throw std::invalid_argument("band must be full, high or low, got '" + name + "'");
}

py::dict record_dict(const experiment::RunRecord& r) {
  py::dict d;
  d["status"] = r.status;
  d["error"] = r.error;
  d["build"] = r.build;
  py::dict metrics, probes;
  for (const auto& [k, v] : r.metrics) metrics[py::str(k)] = v;
  for (const auto& [k, v] : r.probes) probes[py::str(k)] = v;
  d["metrics"] = metrics;
  d["probes"] = probes;
  d["metrics_json"] = experiment::metrics_json(r);
  return d;
}

}  // namespace

PYBIND11_MODULE(_flower, m) {
  m.doc() = "Native core: DSP, metrics and experiment runner.";

  py::register_exception<experiment::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("build_id", &experiment::build_id);

  m.def(
      "si_sdr", [](const Array& ref, const Array& est) { return metrics::si_sdr(to_vector(ref), to_vector(est)); },
      py::arg("ref"), py::arg("est"));
  m.def(
      "lsd",
      [](const Array& ref, const Array& est, const std::string& band, std::uint32_t rate) {
        return metrics::lsd(to_audio(ref, rate), to_audio(est, rate), parse_band(band));
      },
      py::arg("ref"), py::arg("est"), py::arg("band") = "full", py::arg("sample_rate") = dsp::kSampleRate);
  m.def(
      "evaluate_dirs",
      [](const std::string& ref_dir, const std::string& est_dir) {
        return metrics::report_csv(metrics::evaluate_dirs(ref_dir, est_dir));
      },
      py::arg("ref_dir"), py::arg("est_dir"), "Per-file metrics as CSV text.");

  m.def(
      "stft",
      [](const Array& x, std::uint32_t rate) {
        const auto spec = dsp::stft(to_audio(x, rate));
        py::array_t<std::complex<double>> out({spec.frames, spec.bins});
        std::copy(spec.values.begin(), spec.values.end(), out.mutable_data());
        return out;
      },
      py::arg("x"), py::arg("sample_rate") = dsp::kSampleRate, "Complex [frames, bins] spectrogram.");
  m.def(
      "istft",
      [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& values,
         std::size_t length, std::uint32_t rate) {
        if (values.ndim() != 2) throw std::invalid_argument("expected a [frames, bins] array");
        dsp::Spectrogram spec;
        spec.frames = static_cast<std::size_t>(values.shape(0));
        spec.bins = static_cast<std::size_t>(values.shape(1));
        spec.values.assign(values.data(), values.data() + values.size());
        spec.signal_length = length;
        spec.sample_rate = rate;
        return to_array(dsp::istft(spec).samples);
      },
      py::arg("values"), py::arg("length"), py::arg("sample_rate") = dsp::kSampleRate);

  m.def(
      "read_wav",
      [](const std::string& path) {
        const auto audio = dsp::read_wav(path);
        return py::make_tuple(to_array(audio.samples), audio.sample_rate);
      },
      py::arg("path"));
  m.def(
      "write_wav",
      [](const std::string& path, const Array& x, bool pcm16) {
        dsp::write_wav(path, to_audio(x, dsp::kSampleRate), pcm16 ? dsp::WavFormat::kPcm16 : dsp::WavFormat::kFloat32);
      },
      py::arg("path"), py::arg("x"), py::arg("pcm16") = false);

  m.def(
      "mix_at_snr",
      [](const Array& speech, const Array& noise, double snr_db, std::size_t offset) {
        const auto r = dsp::mix_at_snr(to_audio(speech, dsp::kSampleRate), to_audio(noise, dsp::kSampleRate), snr_db,
                                       offset);
        return py::make_tuple(to_array(r.noisy.samples), r.gain);
      },
      py::arg("speech"), py::arg("noise"), py::arg("snr_db"), py::arg("offset") = 0);
  m.def(
      "lowpass_response",
      [](double cutoff_hz, const std::string& family, std::size_t order, double freq_hz) {
        const auto d = dsp::design_lowpass(cutoff_hz, dsp::parse_filter_family(family), order, dsp::kSampleRate);
        return dsp::magnitude_response(d.sections, freq_hz, dsp::kSampleRate);
      },
      py::arg("cutoff_hz"), py::arg("family"), py::arg("order"), py::arg("freq_hz"));
  m.def(
      "synthesize_rir",
      [](double rt60_s, double length_s, std::uint64_t seed) {
        return to_array(dsp::synthesize_rir(rt60_s, length_s, seed).samples);
      },
      py::arg("rt60_s"), py::arg("length_s"), py::arg("seed"));
  m.def(
      "estimate_rt60", [](const Array& rir) { return dsp::estimate_rt60(to_vector(rir)); }, py::arg("rir"));

  py::class_<experiment::ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def("get", [](const experiment::ExperimentConfig& c, const std::string& key) {
        return experiment::get_value(c, key);
      })
      .def("set", [](experiment::ExperimentConfig& c, const std::string& key, const std::string& value) {
        experiment::set_value(c, key, value);
      })
      .def("validate", &experiment::ExperimentConfig::validate)
      .def("to_ini", [](const experiment::ExperimentConfig& c) { return experiment::to_ini(c); })
      .def("to_json", [](const experiment::ExperimentConfig& c) { return experiment::to_json(c); });
  m.def("config_keys", &experiment::config_keys);
  m.def("parse_ini", &experiment::parse_ini, py::arg("text"));
  m.def("parse_json", &experiment::parse_json, py::arg("text"));
  m.def("load_config", &experiment::load_config, py::arg("path"));

  m.def(
      "run",
      [](const experiment::ExperimentConfig& config, const std::string& out_dir) {
        experiment::RunRecord record;
        {
          py::gil_scoped_release release;
          record = experiment::run(config, out_dir);
        }
        return record_dict(record);
      },
      py::arg("config"), py::arg("out_dir"),
      "Runs one experiment, writes its record under out_dir and returns a summary dict.");
}
