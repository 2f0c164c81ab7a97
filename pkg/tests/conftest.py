import numpy as np
import pytest

from polarflip.polar_code import attach_crc, build_code_spec, encode, insert_info


def noiseless_llr(x, magnitude=20.0):
    """Saturated channel LLRs of a codeword: +m for bit 0, -m for bit 1."""
    return magnitude * (1.0 - 2.0 * np.asarray(x, dtype=np.float64))


def random_frame(spec, rng):
    """Return (payload, u, x) for a uniformly random message."""
    msg = rng.integers(0, 2, spec.K, dtype=np.uint8)
    payload = attach_crc(msg, spec)
    u = insert_info(payload, spec)
    return payload, u, encode(u)


def noisy_llr(x, sigma, rng):
    y = (1.0 - 2.0 * x) + sigma * rng.standard_normal(x.shape[0])
    return 2.0 * y / (sigma * sigma)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def code64():
    return build_code_spec(64, 24, 8)


@pytest.fixture(scope="session")
def code16():
    return build_code_spec(16, 4, 4)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        passed, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} {detail}")
