import csv
import json
import math

import numpy as np
import pytest

from polarflip import _backend
from polarflip.composite_decoders import DECODER_NAMES, DecoderSpec
from polarflip.errors import ConfigurationError, InvalidParametersError
from polarflip.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    FrameBlock,
    SimStats,
    StopRule,
    energy_rate,
    estimate_memory,
    interpolate_threshold,
    locate_threshold,
    run_point,
    run_sweep,
    simulate_chunk,
)
from polarflip.polar_code import build_code_spec


def config(**kw):
    base = dict(
        code=(128, 48, 16),
        decoders=(DecoderSpec.parse("dscf:4"),),
        ebn0_grid_db=(1.5, 2.5, 3.5),
        stop=StopRule(3000, 40),
        seed=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        config(decoders=())
    with pytest.raises(ConfigurationError):
        config(ebn0_grid_db=())
    with pytest.raises(ConfigurationError):
        config(ebn0_grid_db=(2.0, 1.0))
    with pytest.raises(ConfigurationError):
        config(stop=StopRule(0, 10))
    with pytest.raises(ConfigurationError):
        config(stop=StopRule(10, 0))
    with pytest.raises(ConfigurationError):
        config(code=(100, 48, 16))
    with pytest.raises(ConfigurationError):
        config(rate_convention="n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"code": [128, 48, 16], "decoders": [{"name": "scl"}], "ebn0_grid_db": [1.0]})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"decoders": ["sc"], "ebn0_grid_db": [1.0]})


def test_config_dict_roundtrip(tmp_path):
    cfg = config(decoders=(DecoderSpec.parse("pdscf:7:1"), DecoderSpec.parse("sc")), workers=2)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(str(path)) == cfg
    doc = cfg.to_dict()
    assert set(doc) >= {"code", "decoders", "ebn0_grid_db", "stop", "seed", "workers"}
    assert set(doc["stop"]) == {"max_frames", "target_block_errors"}


def test_energy_rate():
    spec = build_code_spec(1024, 496, 16)
    assert energy_rate(spec, "k+c") == 0.5
    assert energy_rate(spec, "k") == 496 / 1024
    with pytest.raises(InvalidParametersError):
        energy_rate(spec, "x")


def test_stats_properties():
    s = SimStats()
    assert math.isnan(s.bler) and math.isnan(s.avg_add_trials_given_fail)
    s.add(FrameBlock(np.array([1, 0, 0, 1], np.uint8), np.array([0, 0, 0, 1], np.uint8),
                     np.array([9, 1, 3, 9], np.int32), np.array([1, 0, 1, 1], np.uint8)))
    assert s.frames == 4 and s.block_errors == 2 and s.undetected_errors == 1
    assert s.bler == 0.5 and s.avg_trials == 5.5
    assert s.avg_add_trials_given_fail == pytest.approx((8 + 2 + 8) / 3)


def test_truncate_at_errors():
    b = FrameBlock(np.array([0, 1, 0, 1, 1], np.uint8), np.zeros(5, np.uint8), np.ones(5, np.int32),
                   np.zeros(5, np.uint8))
    assert b.truncate_at_errors(2).frames == 4
    assert b.truncate_at_errors(9).frames == 5


@pytest.mark.parametrize("name", DECODER_NAMES)
def test_high_snr_is_error_free(name):
    dspec = DecoderSpec(name, 4 if "f" in name[1:] or name == "pdscf" else 0,
                        4 if name in ("scp", "dscp", "dscfp", "pdscf") else 0)
    cfg = config(code=(256, 112, 16), decoders=(dspec,), stop=StopRule(10_000, 100))
    s = run_point(cfg, dspec, 12.0)
    assert s.frames == 10_000 and s.block_errors == 0 and s.avg_trials == 1.0
    assert math.isnan(s.avg_add_trials_given_fail)


def test_single_frame_stop():
    cfg = config(stop=StopRule(1, 1))
    s = run_point(cfg, cfg.decoders[0], 15.0)
    assert s.frames == 1 and s.bler == 0


def test_stop_at_exact_error_count():
    cfg = config(stop=StopRule(100_000, 37))
    s = run_point(cfg, cfg.decoders[0], 0.5)
    assert s.block_errors == 37
    assert s.undetected_errors <= s.block_errors <= s.frames


def test_stats_invariants():
    for text in ("scf:8", "dscp:8", "dscfp:4:4", "pdscf:3:3"):
        dspec = DecoderSpec.parse(text)
        s = run_point(config(decoders=(dspec,)), dspec, 1.0)
        assert 0 <= s.bler <= 1
        assert 1 <= s.avg_trials <= dspec.tmax
        assert s.avg_add_trials_given_fail <= dspec.tmax - 1
        assert s.max_trials <= dspec.tmax


def test_worker_count_independence():
    for dspec in (DecoderSpec.parse("dscfp:4:4"), DecoderSpec.parse("scp:4")):
        cfg = config(decoders=(dspec,), stop=StopRule(3000, 60))
        one = run_point(cfg, dspec, 2.0)
        four = run_point(ExperimentConfig(**{**cfg.__dict__, "workers": 4}), dspec, 2.0)
        assert one == four


@pytest.mark.skipif(not _backend.COMPILED, reason="compiled backend not built")
@pytest.mark.parametrize("text", ["sc", "scf:6", "dscf:6", "scp:6", "dscp:6", "dscfp:6:6", "pdscf:3:3"])
def test_backends_bit_identical(text):
    spec = build_code_spec(128, 48, 16)
    dspec = DecoderSpec.parse(text)
    a = simulate_chunk(spec, dspec, 1.5, 3, 0, 400, backend="cython")
    b = simulate_chunk(spec, dspec, 1.5, 3, 0, 400, backend="python")
    for x, y in zip((a.error, a.undetected, a.trials, a.init_fail), (b.error, b.undetected, b.trials, b.init_fail)):
        assert np.array_equal(x, y)
    assert a.error.sum() > 0


def test_sweep_rows_and_monotone_bler():
    res = run_sweep(config())
    assert len(res.rows) == 3
    assert list(res.rows[0]) == list(CSV_COLUMNS)
    blers = [float(r["bler"]) for r in res.rows]
    assert blers[0] >= blers[1] >= blers[2]
    assert res.to_csv() == run_sweep(config()).to_csv()


def test_sweep_formatting():
    row = run_sweep(config(ebn0_grid_db=(1.23456789,))).rows[0]
    assert row["ebn0_db"] == "1.23457"
    assert row["sigma2"] == "0"
    for key in ("sigma2", "ebn0_db", "bler", "avg_trials"):
        assert row[key] == f"{float(row[key]):.6g}"


def test_sweep_output_and_resume(tmp_path):
    out = tmp_path / "out.csv"
    cfg = config()
    first = run_sweep(cfg, out=str(out))
    text = out.read_text()
    assert text == first.to_csv()
    rows = list(csv.DictReader(out.open()))
    assert [r["ebn0_db"] for r in rows] == ["1.5", "2.5", "3.5"]
    # a resumed run must not recompute: tamper with a row and see it kept
    out.write_text(text.replace(rows[0]["frames"], "999999", 1))
    again = run_sweep(cfg, out=str(out))
    assert again.rows[0]["frames"] == "999999"


def test_sweep_json(tmp_path):
    out = tmp_path / "out.json"
    run_sweep(config(), out=str(out), fmt="json")
    rows = json.loads(out.read_text())
    assert len(rows) == 3 and list(rows[0]) == list(CSV_COLUMNS)
    assert isinstance(rows[0]["frames"], int) and isinstance(rows[0]["bler"], float)
    resumed = run_sweep(config(), out=str(out), fmt="json")
    assert json.loads(out.read_text()) == rows
    assert resumed.to_json() == out.read_text()


def test_sweep_write_failure_is_reported(tmp_path):
    res = run_sweep(config(), out=str(tmp_path / "missing" / "out.csv"))
    assert len(res.rows) == 3 and len(res.errors) == 3


def test_interpolate_threshold():
    assert interpolate_threshold([(1.0, 1e-2), (2.0, 1e-4)], 1e-3) == pytest.approx(1.5)
    assert interpolate_threshold([(2.0, 1e-4), (1.0, 1e-2)], 1e-2) == pytest.approx(1.0)
    assert interpolate_threshold([(1.0, 1e-2), (2.0, 5e-3)], 1e-3) is None


def test_memory_formula():
    spec = build_code_spec(1024, 496, 16)
    est = estimate_memory(spec, 6, 6, 8, 8, 8, "dscfp")
    assert est.sc_bits == 1024 * 6 + 1023 * 6 + 1023 + 1024
    assert est.dscf_bits == 144
    assert est.scp_bits == 6144
    assert est.dscp_bits == 0
    assert estimate_memory(spec, 6, 6, 8, 0, 8, "dscp").dscp_bits == 80


def test_memory_sc_only():
    spec = build_code_spec(1024, 496, 16)
    sc = estimate_memory(spec, 6, 6, 8, 0, 0, "sc")
    for kind, pmax in (("dscfp", 1), ("pdscf", 0), ("scp", 1)):
        assert estimate_memory(spec, 6, 6, 8, 0, pmax, kind).total == sc.total == sc.sc_bits
    with pytest.raises(InvalidParametersError):
        estimate_memory(spec, 0, 6, 8, 0, 0, "sc")


@pytest.mark.skipif(not _backend.COMPILED, reason="compiled backend not built")
def test_pure_python_fallback_matches_compiled():
    """A fresh interpreter forced onto the numpy kernel reproduces compiled results."""
    import os
    import subprocess
    import sys

    script = (
        "from polarflip import _backend\n"
        "from polarflip.composite_decoders import DecoderSpec\n"
        "from polarflip.harness import simulate_chunk\n"
        "from polarflip.polar_code import build_code_spec\n"
        "assert _backend.NAME == 'python'\n"
        "b = simulate_chunk(build_code_spec(64, 24, 8), DecoderSpec.parse('pdscf:3:2'), 1.5, 9, 0, 60)\n"
        "print(b.error.tolist(), b.trials.tolist())\n"
    )
    env = {**os.environ, "POLARFLIP_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True).stdout
    b = simulate_chunk(build_code_spec(64, 24, 8), DecoderSpec.parse("pdscf:3:2"), 1.5, 9, 0, 60, backend="cython")
    assert out.strip() == f"{b.error.tolist()} {b.trials.tolist()}"


def test_locate_threshold_brackets_target():
    cfg = config(code=(64, 24, 8), stop=StopRule(200_000, 100))
    dspec = DecoderSpec.parse("dscf:4")
    res = locate_threshold(cfg, dspec, 1e-2, 1.0)
    assert res.hi == pytest.approx(res.lo + 0.1)
    assert res.points[res.lo].bler > 1e-2 >= res.points[res.hi].bler
    assert res.lo <= res.threshold <= res.hi
    seen = []
    res2 = locate_threshold(cfg, dspec, 1e-2, 1.0, evaluate=lambda x, st: seen.append(x) or run_point(cfg, dspec, x, stop=st))
    assert res2.threshold == res.threshold and seen
