// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "flower/dsp/stft.hpp"
#include "flower/dsp/wav.hpp"

namespace flower::metrics {

enum class Band { kFull, kHigh, kLow };

inline constexpr double kSpectralFloor = 1e-10;
inline constexpr double kBandSplitHz = 4000.0;
inline constexpr double kSiSdrCap = 100.0;

/// Which band a bin at `freq_hz` belongs to; the split frequency is High.
Band band_of(double freq_hz, double split_hz = kBandSplitHz);

struct LsdBands {
  double full = 0.0;
  double high = 0.0;
  double low = 0.0;
};

/// Log-spectral distance: mean over frames of
/// sqrt(mean over band bins of (log10 |R|^2 - log10 |E|^2)^2), magnitudes
/// floored at 1e-10. Inputs are trimmed to the shorter length; a shorter
/// overlap than one window or mismatched sample rates throw
/// std::invalid_argument.
LsdBands lsd_bands(const dsp::AudioBuffer& ref, const dsp::AudioBuffer& est, const dsp::StftConfig& config = {},
                   double split_hz = kBandSplitHz);
double lsd(const dsp::AudioBuffer& ref, const dsp::AudioBuffer& est, Band band = Band::kFull,
           const dsp::StftConfig& config = {});

/// Scale-invariant SDR in dB, clamped to [-100, 100]. Inputs are trimmed to
/// the shorter length. Throws std::invalid_argument for an all-zero
/// reference.
double si_sdr(std::span<const double> ref, std::span<const double> est);

struct MetricRow {
  std::string file;
  double lsd = 0.0;
  double lsd_h = 0.0;
  double lsd_l = 0.0;
  double si_sdr = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  MetricRow mean;
  dsp::StftConfig config;
};

MetricRow evaluate_pair(const std::string& name, const dsp::AudioBuffer& ref, const dsp::AudioBuffer& est,
                        const dsp::StftConfig& config = {});

/// Every *.wav in `ref_dir` with a same-named file in `est_dir`, in name
/// order. Throws std::runtime_error if no pair exists.
MetricReport evaluate_dirs(const std::string& ref_dir, const std::string& est_dir, const dsp::StftConfig& config = {});

/// CSV with a '#' header line for the STFT settings, the column row
/// file,lsd,lsd_h,lsd_l,si_sdr, one row per file and a final "mean" row.
void write_report_csv(const std::string& path, const MetricReport& report);
std::string report_csv(const MetricReport& report);

}  // namespace flower::metrics
