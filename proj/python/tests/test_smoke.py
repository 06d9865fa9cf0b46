# Copyright 2026 The Flower Authors
# SPDX-License-Identifier: Apache-2.0

import json
import math

import numpy as np
import pytest

import flower


def test_si_sdr_scale_invariant_cap():
    rng = np.random.default_rng(0)
    ref = rng.standard_normal(4000)
    assert flower.si_sdr(ref, 3.0 * ref) == 100.0


def test_lsd_of_scaled_signal():
    rng = np.random.default_rng(1)
    ref = 0.1 * rng.standard_normal(16000)
    assert flower.lsd(ref, ref) == 0.0
    assert flower.lsd(ref, 10.0 * ref, band="high") == pytest.approx(2.0, abs=1e-12)


def test_stft_round_trip():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(8000)
    spec = flower.stft(x)
    assert spec.shape[1] == 256
    back = flower.istft(spec, len(x))
    assert np.max(np.abs(back - x)) < 1e-9


def test_wav_round_trip(tmp_path):
    x = np.sin(np.arange(1600) * 0.05) * 0.5
    path = str(tmp_path / "a.wav")
    flower.write_wav(path, x)
    y, rate = flower.read_wav(path)
    assert rate == 16000
    assert np.max(np.abs(y - x)) < 1e-7


def test_mix_and_filters():
    rng = np.random.default_rng(3)
    speech, noise = rng.standard_normal(8000), rng.standard_normal(3000)
    noisy, gain = flower.mix_at_snr(speech, noise, 5.0)
    n = noisy - speech
    assert 10 * math.log10(np.sum(speech**2) / np.sum(n**2)) == pytest.approx(5.0, abs=0.01)
    assert 20 * math.log10(flower.lowpass_response(3000, "butterworth", 4, 3000)) == pytest.approx(-3.01, abs=0.05)
    rir = flower.synthesize_rir(0.6, 1.5, 7)
    assert flower.estimate_rt60(rir) == pytest.approx(0.6, rel=0.2)


def test_config_round_trip_and_errors():
    cfg = flower.parse_ini("[run]\ntask = euler-check\nseed = 4\n[train]\nlr = 0.002\n")
    assert cfg.get("run.task") == "euler-check"
    again = flower.parse_json(cfg.to_json())
    assert again.to_ini() == cfg.to_ini()
    assert "train.lr" in flower.config_keys()
    with pytest.raises(flower.ConfigError):
        flower.parse_ini("[train]\nbogus = 1\n")


def test_euler_check_run(tmp_path):
    cfg = flower.Config()
    cfg.set("run.task", "euler-check")
    cfg.set("sample.steps", "16,32,64")
    record = flower.run(cfg, str(tmp_path / "euler"))
    assert record["status"] == "ok"
    ratios = [v for k, v in record["metrics"].items() if k.startswith("euler_ratio")]
    assert ratios and all(1.8 <= r <= 2.2 for r in ratios)
    assert json.loads(record["metrics_json"])
    assert (tmp_path / "euler" / "record.json").exists()
