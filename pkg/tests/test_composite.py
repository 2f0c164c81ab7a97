import numpy as np
import pytest

from conftest import noiseless_llr, noisy_llr, random_frame
from polarflip.composite_decoders import (
    DECODER_NAMES,
    CompositeConfig,
    DecoderSpec,
    decode,
    dscfp_decode,
    pdscf_decode,
    tmax_of,
)
from polarflip.errors import InvalidParametersError
from polarflip.flip_engine import dscf_decode
from polarflip.perturbation import PerturbConfig, RngStream, scp_decode
from polarflip.polar_code import build_code_spec


def test_tmax_examples():
    assert tmax_of("dscfp", 8, 8) == 17
    assert tmax_of("pdscf", 7, 1) == 16
    assert tmax_of("pdscf", 6, 8) == 63
    assert tmax_of("dscf", 16) == 17
    assert tmax_of("scp", 0, 16) == 17
    assert tmax_of("sc") == 1
    with pytest.raises(InvalidParametersError):
        tmax_of("scl", 1, 1)


def test_decoder_spec_parse_and_labels():
    assert DecoderSpec.parse("dscfp:8:8").label == "DSCFP-(8,8)"
    assert DecoderSpec.parse("SCF:16").label == "SCF-16"
    assert DecoderSpec.parse("scp:8").Pmax == 8
    assert DecoderSpec.parse("sc").tmax == 1
    for bad in ("pdscf:7", "sc:3", "bogus", "dscf:-1"):
        with pytest.raises(InvalidParametersError):
            DecoderSpec.parse(bad)
    with pytest.raises(InvalidParametersError):
        DecoderSpec("scp", Fmax=2, Pmax=2)
    with pytest.raises(InvalidParametersError):
        CompositeConfig("dscf", 1, 1)


@pytest.mark.parametrize("name", DECODER_NAMES)
@pytest.mark.parametrize("N", [16, 64, 1024])
def test_noiseless_roundtrip_all_decoders(name, N):
    rng = np.random.default_rng(N)
    spec = build_code_spec(N, N // 2 - 8 if N > 16 else 4, 8 if N > 16 else 4)
    dspec = DecoderSpec(name, 4 if name in ("scf", "dscf", "dscfp", "pdscf") else 0,
                        4 if name in ("scp", "dscp", "dscfp", "pdscf") else 0)
    for _ in range(100):
        payload, u, x = random_frame(spec, rng)
        out = decode(dspec, noiseless_llr(x), spec, rng)
        assert out.success and out.trials_total == 1
        assert np.array_equal(out.payload, payload)


def failing_llrs(spec, rng, count):
    out = []
    while len(out) < count:
        _, _, x = random_frame(spec, rng)
        L = noisy_llr(x, 1.3, rng)
        if not dscf_decode(L, spec, 0).success:
            out.append(L)
    return out


@pytest.fixture(scope="module")
def hard_frames():
    spec = build_code_spec(64, 24, 8)
    return spec, failing_llrs(spec, np.random.default_rng(77), 300)


def same(a, b):
    return (a.success, a.trials_total, a.u_hat.tolist()) == (b.success, b.trials_total, b.u_hat.tolist())


def test_dscfp_zero_variance_equals_dscf_outcome(hard_frames):
    spec, frames = hard_frames
    cfg = CompositeConfig("dscfp", 6, 4, PerturbConfig(sigma2=0.0))
    for L in frames:
        ref = dscf_decode(L, spec, 6)
        out = dscfp_decode(L, spec, cfg, RngStream(0).generator)
        assert out.success == ref.success
        if ref.success:
            assert same(out, ref)
        else:
            assert out.trials_total == cfg.tmax


def test_pmax_zero_equals_dscf(hard_frames):
    spec, frames = hard_frames
    for L in frames:
        ref = dscf_decode(L, spec, 5)
        assert same(dscfp_decode(L, spec, CompositeConfig("dscfp", 5, 0), None), ref)
        assert same(pdscf_decode(L, spec, CompositeConfig("pdscf", 5, 0), None), ref)


def test_fmax_zero_equals_scp(hard_frames):
    spec, frames = hard_frames
    for i, L in enumerate(frames):
        ref = scp_decode(L, spec, 6, PerturbConfig(), RngStream(i).generator)
        a = dscfp_decode(L, spec, CompositeConfig("dscfp", 0, 6), RngStream(i).generator)
        b = pdscf_decode(L, spec, CompositeConfig("pdscf", 0, 6), RngStream(i).generator)
        assert same(a, ref) and same(b, ref)


@pytest.mark.parametrize("text", ["scf:8", "dscf:8", "scp:8", "dscp:8", "dscfp:8:8", "pdscf:7:1", "pdscf:3:4"])
def test_trial_budget_identities(text):
    """On 10^4 failing frames every decoder spends exactly its Tmax."""
    rng = np.random.default_rng(99)
    spec = build_code_spec(32, 8, 8)
    dspec = DecoderSpec.parse(text)
    failures = 0
    while failures < 10_000:
        _, _, x = random_frame(spec, rng)
        out = decode(dspec, noisy_llr(x, 3.0, rng), spec, rng)
        assert out.trials_total == 1 + out.flip_trials + out.perturb_trials
        assert 1 <= out.trials_total <= dspec.tmax
        assert out.flip_trials <= dspec.Fmax * (dspec.Pmax + 1 if dspec.name == "pdscf" else 1)
        assert out.perturb_trials <= dspec.Pmax
        if not out.success:
            failures += 1
            assert out.trials_total == dspec.tmax
            assert not out.initial_passed


def test_dispatch_reproducible(hard_frames):
    spec, frames = hard_frames
    dspec = DecoderSpec.parse("pdscf:4:3")
    for L in frames[:50]:
        a = decode(dspec, L, spec, RngStream(11).generator)
        b = decode(dspec, L, spec, RngStream(11).generator)
        assert same(a, b)
