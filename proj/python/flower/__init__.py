# Copyright 2026 The Flower Authors
# SPDX-License-Identifier: Apache-2.0
"""Python access to the flower native core."""

from ._flower import (
    Config,
    ConfigError,
    build_id,
    config_keys,
    estimate_rt60,
    evaluate_dirs,
    istft,
    load_config,
    lowpass_response,
    lsd,
    mix_at_snr,
    parse_ini,
    parse_json,
    read_wav,
    run,
    si_sdr,
    stft,
    synthesize_rir,
    write_wav,
)

__all__ = [
    "Config",
    "ConfigError",
    "build_id",
    "config_keys",
    "estimate_rt60",
    "evaluate_dirs",
    "istft",
    "load_config",
    "lowpass_response",
    "lsd",
    "mix_at_snr",
    "parse_ini",
    "parse_json",
    "read_wav",
    "run",
    "si_sdr",
    "stft",
    "synthesize_rir",
    "write_wav",
]
