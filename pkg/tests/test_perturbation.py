import numpy as np
import pytest

from conftest import noiseless_llr, noisy_llr, random_frame
from polarflip.errors import InvalidParametersError
from polarflip.flip_engine import dscf_decode
from polarflip.perturbation import PerturbConfig, RngStream, dscp_decode, perturb, scp_decode


class ZeroNoise:
    """Stand-in generator whose Gaussian draws are all zero."""

    def standard_normal(self, size=None):
        return np.zeros(size)


def failing_llrs(spec, rng, sigma=1.6, count=50):
    """Noisy LLR vectors on which plain SC fails the CRC."""
    out = []
    while len(out) < count:
        _, _, x = random_frame(spec, rng)
        L = noisy_llr(x, sigma, rng)
        if not dscf_decode(L, spec, 0).success:
            out.append(L)
    return out


def test_zero_variance_is_identity(rng):
    L = rng.normal(size=64)
    assert np.array_equal(perturb(L, 0.0, rng), L)


def test_negative_variance_rejected(rng):
    with pytest.raises(InvalidParametersError):
        perturb(np.zeros(4), -0.1, rng)
    with pytest.raises(InvalidParametersError):
        PerturbConfig(sigma2=-1.0)


def test_perturbation_moments():
    L = np.zeros(1_000_000)
    d = perturb(L, 0.95, RngStream(7).generator) - L
    assert abs(d.mean()) < 0.004
    assert abs(d.var() - 0.95) < 0.01


def test_streams_are_distinct_and_replayable():
    L = np.zeros(32)
    a = perturb(L, 1.0, RngStream(1, (0,)).generator)
    b = perturb(L, 1.0, RngStream(1, (1,)).generator)
    c = perturb(L, 1.0, RngStream(1, (0,)).generator)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_scp_noiseless(code64, rng):
    _, _, x = random_frame(code64, rng)
    out = scp_decode(noiseless_llr(x), code64, 8, PerturbConfig(), rng)
    assert out.success and out.trials_total == 1


def test_scp_zero_variance_equals_sc(code64, rng):
    cfg = PerturbConfig(sigma2=0.0)
    for L in failing_llrs(code64, rng):
        ref = dscf_decode(L, code64, 0)
        out = scp_decode(L, code64, 5, cfg, rng)
        assert not out.success
        assert out.trials_total == 6 and out.perturb_trials == 5
        assert np.array_equal(out.u_hat, ref.u_hat)


def test_scp_reproducible(code64, rng):
    for L in failing_llrs(code64, rng, count=20):
        a = scp_decode(L, code64, 8, PerturbConfig(), RngStream(3, (9,)).generator)
        b = scp_decode(L, code64, 8, PerturbConfig(), RngStream(3, (9,)).generator)
        assert a.trials_total == b.trials_total and np.array_equal(a.u_hat, b.u_hat)


def test_dscp_escalates_on_repeated_estimate(code64, rng):
    cfg = PerturbConfig(dscp_initial_sigma2=0.5, dscp_step=0.25)
    L = failing_llrs(code64, rng, count=1)[0]
    out = dscp_decode(L, code64, 4, cfg, ZeroNoise())
    assert not out.success and out.trials_total == 5
    assert out.sigma2_trace == (0.5, 0.75, 1.0, 1.25)


def test_dscp_zero_step_matches_scp(code64, rng):
    dscp_cfg = PerturbConfig(dscp_initial_sigma2=0.7, dscp_step=0.0)
    scp_cfg = PerturbConfig(sigma2=0.7)
    for L in failing_llrs(code64, rng, count=30):
        a = dscp_decode(L, code64, 8, dscp_cfg, RngStream(5, (1,)).generator)
        b = scp_decode(L, code64, 8, scp_cfg, RngStream(5, (1,)).generator)
        assert a.success == b.success and a.trials_total == b.trials_total
        assert np.array_equal(a.u_hat, b.u_hat)


def test_dscp_distinct_counts_keep_variance(code64, rng):
    """With no repeated weight the variance never moves."""
    cfg = PerturbConfig(dscp_initial_sigma2=0.6, dscp_step=0.3)
    seen = 0
    for L in failing_llrs(code64, rng, count=200):
        out = dscp_decode(L, code64, 3, cfg, rng)
        if len(set(out.sigma2_trace)) == 1:
            seen += 1
        assert out.sigma2_trace[0] == 0.6
    assert seen > 0
