"""CRC-aided polar codes with SC, flip and perturbation decoders."""

from polarflip._backend import COMPILED, NAME as BACKEND
from polarflip.channel_sim import ChannelParams, ebn0_to_sigma, llr_from_channel, modulate, transmit
from polarflip.composite_decoders import (
    DECODER_NAMES,
    CompositeConfig,
    DecoderSpec,
    decode,
    dscfp_decode,
    pdscf_decode,
    tmax_of,
)
from polarflip.errors import ConfigurationError, InvalidParametersError
from polarflip.flip_engine import DecodeOutcome, FlipCandidateSet, build_candidate_set, compute_metrics, dscf_decode
from polarflip.harness import (
    ExperimentConfig,
    MemoryEstimate,
    SimStats,
    StopRule,
    estimate_memory,
    interpolate_threshold,
    locate_threshold,
    run_point,
    run_sweep,
)
from polarflip.perturbation import PerturbConfig, RngStream, dscp_decode, perturb, scp_decode
from polarflip.polar_code import (
    CodeSpec,
    attach_crc,
    build_code_spec,
    check_crc,
    compute_crc,
    encode,
    extract_info,
    insert_info,
)
from polarflip.sc_kernel import ScDecoder, ScResult, sc_decode

__version__ = "0.1.0"
