"""Single-bit flip decoding (SCF and DSCF)."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from polarflip.errors import InvalidParametersError
from polarflip.polar_code import CodeSpec, check_crc
from polarflip.sc_kernel import ScDecoder, decoder_for

#: Decision LLR magnitude at or below which the DSCF penalty applies.
J_THRESHOLD = 5.0
#: Penalty added per unreliable decision.
J_PENALTY = 1.5

MODES = ("scf", "dscf")


@dataclass(frozen=True)
class FlipCandidateSet:
    """The ``Fmax`` smallest flip metrics, ascending.

    ``ranks`` index the information set (``j``), ``positions`` are the
    corresponding bit indices ``i_j``.
    """

    ranks: tuple[int, ...]
    positions: tuple[int, ...]
    metrics: tuple[float, ...]

    def __len__(self):
        return len(self.ranks)


@dataclass
class DecodeOutcome:
    success: bool
    u_hat: np.ndarray
    payload: np.ndarray
    trials_total: int
    flip_trials: int = 0
    perturb_trials: int = 0
    initial_passed: bool = False
    sigma2_trace: tuple[float, ...] = field(default=())


def j_approx(llr: float) -> float:
    return J_PENALTY if abs(llr) <= J_THRESHOLD else 0.0


def _check_mode(mode: str) -> str:
    mode = mode.lower()
    if mode not in MODES:
        raise InvalidParametersError(f"unknown flip metric {mode!r}; expected one of {MODES}")
    return mode


def compute_metrics(decision_llrs, mode: str = "dscf") -> np.ndarray:
    """Flip metric of every information bit.

    SCF uses ``|lambda_j|``; DSCF adds the running sum of penalties over
    decisions ``0..j`` inclusive.
    """
    mode = _check_mode(mode)
    mag = np.abs(np.asarray(decision_llrs, dtype=np.float64))
    if mode == "scf":
        return mag
    return mag + np.cumsum(np.where(mag <= J_THRESHOLD, J_PENALTY, 0.0))


def build_candidate_set(decision_llrs, Fmax: int, mode: str = "dscf", spec: CodeSpec | None = None) -> FlipCandidateSet:
    """Pick the ``Fmax`` smallest metrics; ties go to the earlier decision."""
    if Fmax < 1:
        raise InvalidParametersError("Fmax must be >= 1 to build a candidate set")
    metrics = compute_metrics(decision_llrs, mode)
    best = heapq.nsmallest(Fmax, zip(metrics.tolist(), range(metrics.shape[0])))
    ranks = tuple(j for _, j in best)
    if spec is None:
        positions = ranks
    else:
        positions = tuple(spec.info_set[j] for j in ranks)
    return FlipCandidateSet(ranks, positions, tuple(m for m, _ in best))


def _crc_passes(dec: ScDecoder, spec: CodeSpec) -> bool:
    return check_crc(dec.payload(), spec)


def flip_round(dec: ScDecoder, L, spec: CodeSpec, Fmax: int, mode: str) -> tuple[bool, int, bool]:
    """One DSCF invocation on ``L``.

    Returns ``(success, flip_trials, initial_passed)``; the decoder holds the
    last estimate.
    """
    dec.run(L)
    if _crc_passes(dec, spec):
        return True, 0, True
    if Fmax == 0:
        return False, 0, False
    cands = build_candidate_set(dec.decision_llrs, Fmax, mode, spec)
    for t, pos in enumerate(cands.positions, start=1):
        dec.run(L, pos)
        if _crc_passes(dec, spec):
            return True, t, False
    return False, len(cands), False


def make_outcome(dec: ScDecoder, success: bool, flips: int, perturbs: int, initial_passed: bool, **extra) -> DecodeOutcome:
    u_hat = dec.u_hat.copy()
    return DecodeOutcome(
        success=success,
        u_hat=u_hat,
        payload=u_hat[dec.spec.info_array],
        trials_total=1 + flips + perturbs,
        flip_trials=flips,
        perturb_trials=perturbs,
        initial_passed=initial_passed,
        **extra,
    )


def dscf_decode(L, spec: CodeSpec, Fmax: int, mode: str = "dscf", decoder: ScDecoder | None = None) -> DecodeOutcome:
    """SC followed by up to ``Fmax`` single-flip trials (at most ``Fmax + 1`` SC runs)."""
    mode = _check_mode(mode)
    if Fmax < 0:
        raise InvalidParametersError("Fmax must be >= 0")
    dec = decoder or decoder_for(spec)
    success, flips, initial = flip_round(dec, L, spec, Fmax, mode)
    return make_outcome(dec, success, flips, 0, initial)
