"""Combined flip/perturbation decoders (DSCFP and PDSCF) and the decoder registry."""

from __future__ import annotations

from dataclasses import dataclass, field

from polarflip.errors import InvalidParametersError
from polarflip.flip_engine import DecodeOutcome, dscf_decode, flip_round, make_outcome
from polarflip.perturbation import PerturbConfig, dscp_decode, perturb, perturb_phase, scp_decode
from polarflip.polar_code import CodeSpec
from polarflip.sc_kernel import ScDecoder, decoder_for

DECODER_NAMES = ("sc", "scf", "dscf", "scp", "dscp", "dscfp", "pdscf")
#: Integer codes shared with the compiled frame loop.
KIND_CODES = {name: code for code, name in enumerate(DECODER_NAMES)}


def tmax_of(kind: str, Fmax: int = 0, Pmax: int = 0) -> int:
    """Maximum number of SC executions of a decoder."""
    if Fmax < 0 or Pmax < 0:
        raise InvalidParametersError("Fmax and Pmax must be >= 0")
    kind = kind.lower()
    if kind == "sc":
        return 1
    if kind in ("scf", "dscf"):
        return Fmax + 1
    if kind in ("scp", "dscp"):
        return Pmax + 1
    if kind == "dscfp":
        return Fmax + Pmax + 1
    if kind == "pdscf":
        return (Pmax + 1) * (Fmax + 1)
    raise InvalidParametersError(f"unknown decoder {kind!r}")


@dataclass(frozen=True)
class CompositeConfig:
    kind: str
    Fmax: int
    Pmax: int
    perturb: PerturbConfig = field(default_factory=PerturbConfig)

    def __post_init__(self):
        if self.kind not in ("dscfp", "pdscf"):
            raise InvalidParametersError(f"composite kind must be 'dscfp' or 'pdscf', got {self.kind!r}")
        if self.Fmax < 0 or self.Pmax < 0:
            raise InvalidParametersError("Fmax and Pmax must be >= 0")

    @property
    def tmax(self) -> int:
        return tmax_of(self.kind, self.Fmax, self.Pmax)


def dscfp_decode(L, spec: CodeSpec, cfg: CompositeConfig, rng, decoder: ScDecoder | None = None) -> DecodeOutcome:
    """DSCF on ``L``, then up to ``Pmax`` SC trials on perturbed copies of ``L``.

    The flip candidates come from the unperturbed initial trial only.
    """
    if cfg.kind != "dscfp":
        raise InvalidParametersError("dscfp_decode needs a DSCFP config")
    dec = decoder or decoder_for(spec)
    success, flips, initial = flip_round(dec, L, spec, cfg.Fmax, "dscf")
    if success:
        return make_outcome(dec, True, flips, 0, initial)
    success, used = perturb_phase(dec, L, spec, cfg.Pmax, cfg.perturb.sigma2, rng)
    return make_outcome(dec, success, flips, used, False)


def pdscf_decode(L, spec: CodeSpec, cfg: CompositeConfig, rng, decoder: ScDecoder | None = None) -> DecodeOutcome:
    """Up to ``Pmax + 1`` DSCF rounds, each after a fresh perturbation of ``L``.

    Each round rebuilds its flip candidates from its own initial trial.
    ``perturb_trials`` counts perturbed initial trials, ``flip_trials`` the
    flips over all rounds.
    """
    if cfg.kind != "pdscf":
        raise InvalidParametersError("pdscf_decode needs a PDSCF config")
    dec = decoder or decoder_for(spec)
    success, flips, initial = flip_round(dec, L, spec, cfg.Fmax, "dscf")
    if success:
        return make_outcome(dec, True, flips, 0, initial)
    for p in range(1, cfg.Pmax + 1):
        success, used, _ = flip_round(dec, perturb(L, cfg.perturb.sigma2, rng), spec, cfg.Fmax, "dscf")
        flips += used
        if success:
            return make_outcome(dec, True, flips, p, False)
    return make_outcome(dec, False, flips, cfg.Pmax, False)


@dataclass(frozen=True)
class DecoderSpec:
    """A named decoder with its trial budget."""

    name: str
    Fmax: int = 0
    Pmax: int = 0
    perturb: PerturbConfig = field(default_factory=PerturbConfig)

    def __post_init__(self):
        object.__setattr__(self, "name", self.name.lower())
        if self.name not in DECODER_NAMES:
            raise InvalidParametersError(f"unknown decoder {self.name!r}; expected one of {DECODER_NAMES}")
        if self.Fmax < 0 or self.Pmax < 0:
            raise InvalidParametersError("Fmax and Pmax must be >= 0")
        if self.name in ("sc", "scp", "dscp") and self.Fmax:
            raise InvalidParametersError(f"{self.name} takes no Fmax")
        if self.name in ("sc", "scf", "dscf") and self.Pmax:
            raise InvalidParametersError(f"{self.name} takes no Pmax")

    @property
    def kind_code(self) -> int:
        return KIND_CODES[self.name]

    @property
    def tmax(self) -> int:
        return tmax_of(self.name, self.Fmax, self.Pmax)

    @property
    def label(self) -> str:
        up = self.name.upper()
        if self.name == "sc":
            return up
        if self.name in ("scf", "dscf"):
            return f"{up}-{self.Fmax}"
        if self.name in ("scp", "dscp"):
            return f"{up}-{self.Pmax}"
        return f"{up}-({self.Fmax},{self.Pmax})"

    @classmethod
    def parse(cls, text: str, perturb: PerturbConfig | None = None) -> "DecoderSpec":
        """Parse ``name[:Fmax[:Pmax]]``; single-budget decoders take ``name:budget``."""
        parts = text.strip().lower().split(":")
        name, nums = parts[0], [int(p) for p in parts[1:]]
        kwargs = {"perturb": perturb or PerturbConfig()}
        if name in ("scf", "dscf") and nums:
            kwargs["Fmax"] = nums[0]
        elif name in ("scp", "dscp") and nums:
            kwargs["Pmax"] = nums[0]
        elif name in ("dscfp", "pdscf"):
            if len(nums) != 2:
                raise InvalidParametersError(f"{name} needs name:Fmax:Pmax, got {text!r}")
            kwargs["Fmax"], kwargs["Pmax"] = nums
        elif nums:
            raise InvalidParametersError(f"{name} takes no budget, got {text!r}")
        return cls(name, **kwargs)


def decode(dspec: DecoderSpec, L, spec: CodeSpec, rng=None, decoder: ScDecoder | None = None) -> DecodeOutcome:
    """Run the decoder named by ``dspec`` on one LLR vector."""
    dec = decoder or decoder_for(spec)
    name = dspec.name
    if name == "sc":
        return dscf_decode(L, spec, 0, "dscf", dec)
    if name in ("scf", "dscf"):
        return dscf_decode(L, spec, dspec.Fmax, name, dec)
    if name == "scp":
        return scp_decode(L, spec, dspec.Pmax, dspec.perturb, rng, dec)
    if name == "dscp":
        return dscp_decode(L, spec, dspec.Pmax, dspec.perturb, rng, dec)
    cfg = CompositeConfig(name, dspec.Fmax, dspec.Pmax, dspec.perturb)
    if name == "dscfp":
        return dscfp_decode(L, spec, cfg, rng, dec)
    return pdscf_decode(L, spec, cfg, rng, dec)
