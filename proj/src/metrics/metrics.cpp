// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flower::metrics {

Band band_of(double freq_hz, double split_hz) { return freq_hz >= split_hz ? Band::kHigh : Band::kLow; }

LsdBands lsd_bands(const dsp::AudioBuffer& ref, const dsp::AudioBuffer& est, const dsp::StftConfig& config,
                   double split_hz) {
  if (ref.sample_rate != est.sample_rate) throw std::invalid_argument("LSD inputs have different sample rates");
  const std::size_t n = std::min(ref.size(), est.size());
  if (n < config.window_len) {
    throw std::invalid_argument("LSD needs at least " + std::to_string(config.window_len) + " overlapping samples, got " +
                                std::to_string(n));
  }
  const dsp::Stft stft(config);
  const auto r = stft.forward(std::span(ref.samples).first(n), ref.sample_rate);
  const auto e = stft.forward(std::span(est.samples).first(n), est.sample_rate);
  std::size_t high_bins = 0;
  for (std::size_t b = 0; b < r.bins; ++b) high_bins += band_of(r.bin_frequency(b), split_hz) == Band::kHigh;
  const std::size_t low_bins = r.bins - high_bins;

  LsdBands out;
  for (std::size_t f = 0; f < r.frames; ++f) {
    double full = 0.0, high = 0.0, low = 0.0;
    for (std::size_t b = 0; b < r.bins; ++b) {
      const double lr = 2.0 * std::log10(std::max(std::abs(r.at(f, b)), kSpectralFloor));
      const double le = 2.0 * std::log10(std::max(std::abs(e.at(f, b)), kSpectralFloor));
      const double d2 = (lr - le) * (lr - le);
      full += d2;
      (band_of(r.bin_frequency(b), split_hz) == Band::kHigh ? high : low) += d2;
    }
    out.full += std::sqrt(full / static_cast<double>(r.bins));
    if (high_bins > 0) out.high += std::sqrt(high / static_cast<double>(high_bins));
    if (low_bins > 0) out.low += std::sqrt(low / static_cast<double>(low_bins));
  }
  const double frames = static_cast<double>(r.frames);
  out.full /= frames;
  out.high /= frames;
  out.low /= frames;
  return out;
}

double lsd(const dsp::AudioBuffer& ref, const dsp::AudioBuffer& est, Band band, const dsp::StftConfig& config) {
  const auto all = lsd_bands(ref, est, config);
  switch (band) {
    case Band::kHigh:
      return all.high;
    case Band::kLow:
      return all.low;
    case Band::kFull:
      break;
  }
  return all.full;
}

double si_sdr(std::span<const double> ref, std::span<const double> est) {
  const std::size_t n = std::min(ref.size(), est.size());
  double rr = 0.0, re = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rr += ref[i] * ref[i];
    re += ref[i] * est[i];
  }
  if (!(rr > 0.0)) throw std::invalid_argument("SI-SDR reference is all zeros");
  const double alpha = re / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = alpha * ref[i];
    target += t * t;
    residual += (est[i] - t) * (est[i] - t);
  }
  if (!(target > 0.0)) return -kSiSdrCap;
  if (!(residual > 0.0)) return kSiSdrCap;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSdrCap, kSiSdrCap);
}

MetricRow evaluate_pair(const std::string& name, const dsp::AudioBuffer& ref, const dsp::AudioBuffer& est,
                        const dsp::StftConfig& config) {
  const auto bands = lsd_bands(ref, est, config);
  return {name, bands.full, bands.high, bands.low, si_sdr(ref.samples, est.samples)};
}

MetricReport evaluate_dirs(const std::string& ref_dir, const std::string& est_dir, const dsp::StftConfig& config) {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(ref_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav" &&
        fs::exists(fs::path(est_dir) / entry.path().filename())) {
      names.push_back(entry.path().filename().string());
    }
  }
  if (names.empty()) throw std::runtime_error("no matching .wav pairs in " + ref_dir + " and " + est_dir);
  std::sort(names.begin(), names.end());
  MetricReport report;
  report.config = config;
  report.mean.file = "mean";
  for (const auto& name : names) {
    const auto ref = dsp::read_wav((fs::path(ref_dir) / name).string());
    const auto est = dsp::read_wav((fs::path(est_dir) / name).string());
    report.rows.push_back(evaluate_pair(name, ref, est, config));
    const auto& row = report.rows.back();
    report.mean.lsd += row.lsd;
    report.mean.lsd_h += row.lsd_h;
    report.mean.lsd_l += row.lsd_l;
    report.mean.si_sdr += row.si_sdr;
  }
  const double count = static_cast<double>(report.rows.size());
  report.mean.lsd /= count;
  report.mean.lsd_h /= count;
  report.mean.lsd_l /= count;
  report.mean.si_sdr /= count;
  return report;
}

std::string report_csv(const MetricReport& report) {
  std::ostringstream out;
  const auto& c = report.config;
  out << "# stft window=hann window_len=" << c.window_len << " hop=" << c.hop << " fft_len=" << c.fft_len
      << " center=" << (c.center ? 1 : 0) << " floor=" << kSpectralFloor << " split_hz=" << kBandSplitHz << '\n';
  out << "file,lsd,lsd_h,lsd_l,si_sdr\n";
  auto row = [&out](const MetricRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", r.lsd, r.lsd_h, r.lsd_l, r.si_sdr);
    out << r.file << buf;
  };
  for (const auto& r : report.rows) row(r);
  row(report.mean);
  return out.str();
}

void write_report_csv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report_csv(report);
}

}  // namespace flower::metrics
