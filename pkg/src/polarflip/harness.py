"""Monte-Carlo BLER experiments over BPSK/AWGN.

Frames are simulated in fixed chunks of :data:`CHUNK_FRAMES`. Chunk ``c`` of
a point draws its messages and channel noise from the stream
``(seed; N, K, C, ebn0, c, 0)`` and its perturbation noise from
``(...; c, 1)``, so results do not depend on the worker count and every
decoder sees the same channel realizations at a given Eb/N0.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from polarflip import _backend
from polarflip.channel_sim import ebn0_to_sigma, llr_from_channel, modulate, transmit
from polarflip.composite_decoders import DecoderSpec, decode
from polarflip.errors import ConfigurationError, InvalidParametersError
from polarflip.perturbation import PerturbConfig, RngStream
from polarflip.polar_code import CodeSpec, attach_crc, build_code_spec, encode, insert_info
from polarflip.sc_kernel import ScDecoder, decoder_for

log = logging.getLogger(__name__)

CHUNK_FRAMES = 512

#: How Eb is charged: ``"k"`` to the K message bits (rate K/N), ``"k+c"`` to
#: message and CRC bits (rate (K+C)/N).
RATE_CONVENTIONS = ("k", "k+c")

CSV_COLUMNS = (
    "decoder", "N", "K", "C", "Fmax", "Pmax", "sigma2", "ebn0_db", "frames", "block_errors",
    "undetected_errors", "bler", "avg_trials", "avg_add_trials_given_fail", "seed",
)


@dataclass(frozen=True)
class StopRule:
    max_frames: int = 1_000_000
    target_block_errors: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    code: tuple[int, int, int]
    decoders: tuple[DecoderSpec, ...]
    ebn0_grid_db: tuple[float, ...]
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 0
    workers: int = 1
    exact: bool = False
    rate_convention: str = "k"

    def __post_init__(self):
        if len(self.code) != 3:
            raise ConfigurationError("code must be (N, K, C)")
        if not self.decoders:
            raise ConfigurationError("at least one decoder is required")
        if not self.ebn0_grid_db:
            raise ConfigurationError("ebn0_grid_db must not be empty")
        grid = list(self.ebn0_grid_db)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("ebn0_grid_db must be strictly ascending")
        if self.stop.max_frames < 1 or self.stop.target_block_errors < 1:
            raise ConfigurationError("max_frames and target_block_errors must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.rate_convention not in RATE_CONVENTIONS:
            raise ConfigurationError(f"rate_convention must be one of {RATE_CONVENTIONS}")
        try:
            self.code_spec()
        except InvalidParametersError as exc:
            raise ConfigurationError(str(exc)) from exc

    def code_spec(self) -> CodeSpec:
        return build_code_spec(*self.code)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            code = doc["code"]
            if isinstance(code, dict):
                code = (code["N"], code["K"], code["C"])
            decoders = []
            for d in doc.get("decoders", []):
                if isinstance(d, str):
                    decoders.append(DecoderSpec.parse(d))
                    continue
                perturb = PerturbConfig(
                    sigma2=float(d.get("sigma2", 0.95)),
                    dscp_initial_sigma2=float(d.get("dscp_initial_sigma2", 0.5)),
                    dscp_step=float(d.get("dscp_step", 0.25)),
                )
                decoders.append(DecoderSpec(d["name"], int(d.get("Fmax", 0)), int(d.get("Pmax", 0)), perturb))
            stop = doc.get("stop", {})
            return cls(
                code=tuple(int(v) for v in code),
                decoders=tuple(decoders),
                ebn0_grid_db=tuple(float(v) for v in doc.get("ebn0_grid_db", ())),
                stop=StopRule(
                    max_frames=int(stop.get("max_frames", StopRule.max_frames)),
                    target_block_errors=int(stop.get("target_block_errors", StopRule.target_block_errors)),
                ),
                seed=int(doc.get("seed", 0)),
                workers=int(doc.get("workers", 1)),
                exact=bool(doc.get("exact", False)),
                rate_convention=str(doc.get("rate_convention", "k")),
            )
        except ConfigurationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "code": {"N": self.code[0], "K": self.code[1], "C": self.code[2]},
            "decoders": [
                {
                    "name": d.name,
                    "Fmax": d.Fmax,
                    "Pmax": d.Pmax,
                    "sigma2": d.perturb.sigma2,
                    "dscp_initial_sigma2": d.perturb.dscp_initial_sigma2,
                    "dscp_step": d.perturb.dscp_step,
                }
                for d in self.decoders
            ],
            "ebn0_grid_db": list(self.ebn0_grid_db),
            "stop": {"max_frames": self.stop.max_frames, "target_block_errors": self.stop.target_block_errors},
            "seed": self.seed,
            "workers": self.workers,
            "exact": self.exact,
            "rate_convention": self.rate_convention,
        }


@dataclass
class SimStats:
    frames: int = 0
    block_errors: int = 0
    undetected_errors: int = 0
    total_trials: int = 0
    initial_failures: int = 0
    add_trials_given_fail: int = 0
    max_trials: int = 0

    @property
    def bler(self) -> float:
        return self.block_errors / self.frames if self.frames else math.nan

    @property
    def avg_trials(self) -> float:
        return self.total_trials / self.frames if self.frames else math.nan

    @property
    def avg_add_trials_given_fail(self) -> float:
        """Mean of ``trials - 1`` over frames whose initial SC trial failed the CRC (nan if none)."""
        if not self.initial_failures:
            return math.nan
        return self.add_trials_given_fail / self.initial_failures

    def add(self, block: "FrameBlock") -> None:
        self.frames += block.frames
        self.block_errors += int(block.error.sum())
        self.undetected_errors += int(block.undetected.sum())
        self.total_trials += int(block.trials.sum())
        failed = block.init_fail.astype(bool)
        self.initial_failures += int(failed.sum())
        self.add_trials_given_fail += int((block.trials[failed] - 1).sum())
        if block.frames:
            self.max_trials = max(self.max_trials, int(block.trials.max()))


@dataclass
class FrameBlock:
    """Per-frame outcomes of one chunk."""

    error: np.ndarray
    undetected: np.ndarray
    trials: np.ndarray
    init_fail: np.ndarray

    @property
    def frames(self) -> int:
        return int(self.error.shape[0])

    def truncate_at_errors(self, max_errors: int) -> "FrameBlock":
        """Keep frames up to and including the ``max_errors``-th block error."""
        if max_errors <= 0:
            return self
        idx = np.flatnonzero(self.error)
        if idx.shape[0] < max_errors:
            return self
        cut = int(idx[max_errors - 1]) + 1
        return FrameBlock(self.error[:cut], self.undetected[:cut], self.trials[:cut], self.init_fail[:cut])


def energy_rate(spec: CodeSpec, convention: str = "k") -> float:
    """Rate used to convert Eb/N0 into a noise level."""
    if convention == "k":
        return spec.K / spec.N
    if convention == "k+c":
        return spec.rate
    raise InvalidParametersError(f"unknown rate convention {convention!r}")


def _ebn0_key(ebn0_db: float) -> int:
    return int(round(ebn0_db * 10_000)) & 0xFFFFFFFF


def chunk_streams(seed: int, spec: CodeSpec, ebn0_db: float, chunk: int) -> tuple[RngStream, RngStream]:
    """Channel and perturbation streams of one chunk."""
    base = (spec.N, spec.K, spec.C, _ebn0_key(ebn0_db), chunk)
    return RngStream(seed, base + (0,)), RngStream(seed, base + (1,))


def _python_frames(spec, dspec, sigma, chan, pert, n_frames, max_errors, exact) -> FrameBlock:
    dec = ScDecoder(spec, exact)
    K = spec.K
    words_per_msg = (K + 63) // 64
    shifts = np.arange(64, dtype=np.uint64)
    err = np.zeros(n_frames, dtype=np.uint8)
    und = np.zeros(n_frames, dtype=np.uint8)
    trials = np.zeros(n_frames, dtype=np.int32)
    ifail = np.zeros(n_frames, dtype=np.uint8)
    done = n_err = 0
    for f in range(n_frames):
        words = chan.bit_generator.random_raw(words_per_msg)
        msg = ((words[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).ravel()[:K]
        payload = attach_crc(msg, spec)
        x = encode(insert_info(payload, spec))
        L = llr_from_channel(transmit(modulate(x), sigma, chan.generator), sigma)
        out = decode(dspec, L, spec, pert.generator, dec)
        mismatch = not np.array_equal(out.payload, payload)
        err[f] = (not out.success) or mismatch
        und[f] = out.success and mismatch
        trials[f] = out.trials_total
        ifail[f] = not out.initial_passed
        done = f + 1
        if err[f]:
            n_err += 1
            if max_errors > 0 and n_err >= max_errors:
                break
    return FrameBlock(err[:done], und[:done], trials[:done], ifail[:done])


def simulate_chunk(
    spec: CodeSpec,
    dspec: DecoderSpec,
    ebn0_db: float,
    seed: int,
    chunk: int,
    n_frames: int = CHUNK_FRAMES,
    max_errors: int = 0,
    exact: bool = False,
    backend: str | None = None,
    rate_convention: str = "k",
) -> FrameBlock:
    """Simulate the first ``n_frames`` frames of chunk ``chunk``.

    ``backend`` forces ``"cython"`` or ``"python"``; by default the compiled
    frame loop is used when available.
    """
    backend = backend or _backend.NAME
    if backend == "cython" and not _backend.COMPILED:
        raise InvalidParametersError("compiled backend is not available")
    sigma = ebn0_to_sigma(ebn0_db, energy_rate(spec, rate_convention))
    chan, pert = chunk_streams(seed, spec, ebn0_db, chunk)
    if backend == "python":
        return _python_frames(spec, dspec, sigma, chan, pert, n_frames, max_errors, exact)
    from polarflip import _core

    kernel = decoder_for(spec, exact)._kernel
    p = dspec.perturb
    arrays = _core.run_frames(
        kernel, spec.info_array, spec.K, spec.C, spec.crc_poly, spec.crc_init,
        dspec.kind_code, dspec.Fmax, dspec.Pmax, p.sigma2, p.dscp_initial_sigma2, p.dscp_step,
        sigma, sigma * sigma, chan.bit_generator, pert.bit_generator, n_frames, max_errors,
    )
    return FrameBlock(*arrays)


def _chunk_task(args) -> FrameBlock:
    return simulate_chunk(*args)


def run_point(config: ExperimentConfig, dspec: DecoderSpec, ebn0_db: float, *, backend: str | None = None,
              stop: StopRule | None = None) -> SimStats:
    """Simulate one (decoder, Eb/N0) cell until the stop rule fires."""
    stop = stop or config.stop
    spec = config.code_spec()
    stats = SimStats()
    chunk = 0

    def remaining_frames():
        return stop.max_frames - stats.frames

    def remaining_errors():
        return stop.target_block_errors - stats.block_errors

    if config.workers <= 1:
        while remaining_frames() > 0 and remaining_errors() > 0:
            n = min(CHUNK_FRAMES, remaining_frames())
            stats.add(simulate_chunk(spec, dspec, ebn0_db, config.seed, chunk, n, remaining_errors(),
                                     config.exact, backend, config.rate_convention))
            chunk += 1
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            while remaining_frames() > 0 and remaining_errors() > 0:
                jobs = []
                start = stats.frames
                for c in range(chunk, chunk + config.workers):
                    first = start + (c - chunk) * CHUNK_FRAMES
                    if first >= stop.max_frames:
                        break
                    n = min(CHUNK_FRAMES, stop.max_frames - first)
                    jobs.append((spec, dspec, ebn0_db, config.seed, c, n, 0, config.exact, backend,
                                 config.rate_convention))
                for block in pool.map(_chunk_task, jobs):
                    if remaining_errors() <= 0:
                        break
                    stats.add(block.truncate_at_errors(remaining_errors()))
                    if block.frames < CHUNK_FRAMES:
                        break
                chunk += len(jobs)
    log.debug("%s @ %.3f dB: %d frames, %d errors", dspec.label, ebn0_db, stats.frames, stats.block_errors)
    return stats


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def make_row(config: ExperimentConfig, dspec: DecoderSpec, ebn0_db: float, stats: SimStats) -> dict:
    N, K, C = config.code
    if dspec.name == "dscp":
        sigma2 = dspec.perturb.dscp_initial_sigma2
    elif dspec.name in ("scp", "dscfp", "pdscf"):
        sigma2 = dspec.perturb.sigma2
    else:
        sigma2 = 0.0
    values = {
        "decoder": dspec.name,
        "N": N,
        "K": K,
        "C": C,
        "Fmax": dspec.Fmax,
        "Pmax": dspec.Pmax,
        "sigma2": float(sigma2),
        "ebn0_db": float(ebn0_db),
        "frames": stats.frames,
        "block_errors": stats.block_errors,
        "undetected_errors": stats.undetected_errors,
        "bler": stats.bler,
        "avg_trials": stats.avg_trials,
        "avg_add_trials_given_fail": stats.avg_add_trials_given_fail,
        "seed": config.seed,
    }
    return {k: _fmt(v) for k, v in values.items()}


def _row_key(row: dict) -> tuple:
    return tuple(row[c] for c in ("decoder", "N", "K", "C", "Fmax", "Pmax", "sigma2", "ebn0_db", "seed"))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


_INT_COLUMNS = frozenset(("N", "K", "C", "Fmax", "Pmax", "frames", "block_errors", "undetected_errors", "seed"))


def _typed(row: dict) -> dict:
    """JSON form of a row: integers and numbers instead of strings, nan as null."""
    out = {}
    for key in CSV_COLUMNS:
        value = row[key]
        if key == "decoder":
            out[key] = value
        elif key in _INT_COLUMNS:
            out[key] = int(value)
        else:
            v = float(value)
            out[key] = None if math.isnan(v) else v
    return out


def _untyped(row: dict) -> dict:
    out = {}
    for key in CSV_COLUMNS:
        value = row[key]
        if key == "decoder" or key in _INT_COLUMNS:
            out[key] = str(value)
        else:
            out[key] = _fmt(math.nan if value is None else float(value))
    return out


def _read_existing(path: str, fmt: str) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, newline="") as fh:
        try:
            if fmt == "json":
                return [_untyped(r) for r in json.load(fh)]
            return [r for r in csv.DictReader(fh) if set(CSV_COLUMNS) <= set(r)]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            log.warning("ignoring unreadable results in %s: %s", path, exc)
            return []


def _write_rows(path: str, rows: list[dict], fmt: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        if fmt == "json":
            json.dump([_typed(r) for r in rows], fh, indent=1)
            fh.write("\n")
        else:
            fh.write(rows_to_csv(rows))
    os.replace(tmp, path)


@dataclass
class SweepResult:
    rows: list[dict]
    errors: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)

    def to_json(self) -> str:
        return json.dumps([_typed(r) for r in self.rows], indent=1) + "\n"


def run_sweep(config: ExperimentConfig, out: str | None = None, fmt: str = "csv", resume: bool = True,
              backend: str | None = None) -> SweepResult:
    """Run every (decoder, Eb/N0) cell, rewriting ``out`` after each row.

    With ``resume``, cells already present in ``out`` are kept as-is. A
    failed write is reported in ``SweepResult.errors`` and the sweep goes on.
    """
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"unknown output format {fmt!r}")
    done = {}
    if out and resume:
        done = {_row_key(r): r for r in _read_existing(out, fmt)}
    result = SweepResult(rows=[])
    for dspec in config.decoders:
        for ebn0 in config.ebn0_grid_db:
            probe = make_row(config, dspec, ebn0, SimStats())
            row = done.get(_row_key(probe))
            if row is None:
                row = make_row(config, dspec, ebn0, run_point(config, dspec, ebn0, backend=backend))
            result.rows.append(row)
            if out:
                try:
                    _write_rows(out, result.rows, fmt)
                except OSError as exc:
                    msg = f"{dspec.label} @ {ebn0} dB: {exc}"
                    log.error("write failed: %s", msg)
                    result.errors.append(msg)
    return result


def interpolate_threshold(points, target: float) -> float | None:
    """Eb/N0 where the BLER crosses ``target``, log-linear between grid neighbours.

    ``points`` is an iterable of ``(ebn0_db, bler)``; returns ``None`` when no
    adjacent pair brackets the target.
    """
    pts = sorted((float(x), float(b)) for x, b in points)
    for (x0, b0), (x1, b1) in zip(pts, pts[1:]):
        if b0 >= target >= b1 and b0 > 0 and b1 > 0:
            if b0 == b1:
                return x0
            t = (math.log(target) - math.log(b0)) / (math.log(b1) - math.log(b0))
            return x0 + t * (x1 - x0)
    return None


@dataclass
class ThresholdSearch:
    """Outcome of :func:`locate_threshold`.

    ``points`` holds full-precision runs; ``lo`` and ``hi`` are the grid
    points just above and at-or-below the target BLER.
    """

    threshold: float | None
    points: dict[float, SimStats]
    lo: float | None = None
    hi: float | None = None


def locate_threshold(config: ExperimentConfig, dspec: DecoderSpec, target_bler: float, start_db: float, *,
                     step: float = 0.1, scout_errors: int = 25, max_points: int = 40,
                     backend: str | None = None, evaluate=None) -> ThresholdSearch:
    """Walk a ``step``-dB grid from ``start_db`` until two neighbours bracket ``target_bler``.

    The walk uses cheap scouting runs (``scout_errors`` block errors); the two
    bracketing points are then re-run with the full stop rule of ``config``.
    ``evaluate(ebn0_db, stop)`` replaces :func:`run_point`, e.g. to add caching.
    """
    if evaluate is None:
        def evaluate(x, stop):
            return run_point(config, dspec, x, backend=backend, stop=stop)

    def grid(x):
        return round(round(x / step) * step, 6)

    scout = StopRule(config.stop.max_frames, min(scout_errors, config.stop.target_block_errors))
    scouted: dict[float, SimStats] = {}
    x = grid(start_db)
    lo = hi = None
    for _ in range(max_points):
        if x not in scouted:
            scouted[x] = evaluate(x, scout)
        if scouted[x].bler > target_bler:
            lo = x
            x = grid(x + step)
        else:
            hi = x
            x = grid(x - step)
        if lo is not None and hi is not None and abs(hi - lo - step) < 1e-9:
            break
    else:
        return ThresholdSearch(None, scouted)
    full: dict[float, SimStats] = {}
    for x in (lo, hi):
        full[x] = evaluate(x, config.stop)
    # full-precision points may shift the crossing by one grid step
    for _ in range(max_points):
        if full[lo].bler <= target_bler:
            hi, lo = lo, grid(lo - step)
        elif full[hi].bler > target_bler:
            lo, hi = hi, grid(hi + step)
        else:
            break
        for x in (lo, hi):
            if x not in full:
                full[x] = evaluate(x, config.stop)
    thr = interpolate_threshold([(lo, full[lo].bler), (hi, full[hi].bler)], target_bler)
    return ThresholdSearch(thr, full, lo, hi)


@dataclass(frozen=True)
class MemoryEstimate:
    sc_bits: int
    dscf_bits: int
    scp_bits: int
    dscp_bits: int

    @property
    def total(self) -> int:
        return self.sc_bits + self.dscf_bits + self.scp_bits + self.dscp_bits

    def as_dict(self) -> dict:
        return {"sc": self.sc_bits, "dscf": self.dscf_bits, "scp": self.scp_bits, "dscp": self.dscp_bits,
                "total": self.total}


def estimate_memory(spec: CodeSpec, q_ch: int, q_int: int, q_flip: int, Fmax: int, Pmax: int, kind: str,
                    ones_count: bool | None = None) -> MemoryEstimate:
    """Storage in bits of a single-SC-instance decoder.

    SC keeps channel LLRs, N-1 internal LLRs, N-1 internal partial sums and
    the N-bit estimate. Flip decoders add Fmax metrics and Fmax positions;
    perturbation keeps a copy of the channel LLRs when Pmax > 1; the
    ones-count DSCP variant stores n bits per perturbed trial.
    """
    if min(q_ch, q_int, q_flip) < 1:
        raise InvalidParametersError("quantization widths must be >= 1")
    if Fmax < 0 or Pmax < 0:
        raise InvalidParametersError("Fmax and Pmax must be >= 0")
    kind = kind.lower()
    N, n = spec.N, spec.n
    sc = N * q_ch + (N - 1) * q_int + (N - 1) + N
    flips = kind in ("scf", "dscf", "dscfp", "pdscf")
    perturbs = kind in ("scp", "dscp", "dscfp", "pdscf")
    dscf = Fmax * q_flip + Fmax * n if flips else 0
    scp = N * q_ch if perturbs and Pmax > 1 else 0
    if ones_count is None:
        ones_count = kind == "dscp"
    dscp = n * Pmax if ones_count else 0
    return MemoryEstimate(sc, dscf, scp, dscp)
