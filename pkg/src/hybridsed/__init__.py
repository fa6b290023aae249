"""Krylov subspace estimation and analog/digital decomposition for hybrid mmWave MIMO."""

from .channel import (
    ChannelParams,
    ChannelRealization,
    NoiseParams,
    apply_awgn,
    gen_channel,
    ground_truth_subspaces,
    ula_response,
)
from .decomposition import (
    BcdOptions,
    BeamformResult,
    DecompositionResult,
    bcd_sd,
    beamform_decompose,
    omp_decompose,
    project_unit_modulus,
)
from .estimation import (
    EchoMode,
    EchoVariant,
    KrylovState,
    chordal_distance,
    digital_echo,
    naive_hybrid_echo,
    raid_echo,
    se_arn,
)
from .evaluation import (
    HybridFactors,
    LinkBudget,
    OverheadReport,
    RateRecord,
    ideal_digital_rate,
    independent_sounding,
    monte_carlo_rate,
    sed_pipeline,
    user_rate,
    waterfill,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "ChannelRealization",
    "NoiseParams",
    "apply_awgn",
    "gen_channel",
    "ground_truth_subspaces",
    "ula_response",
    "BcdOptions",
    "BeamformResult",
    "DecompositionResult",
    "bcd_sd",
    "beamform_decompose",
    "omp_decompose",
    "project_unit_modulus",
    "EchoMode",
    "EchoVariant",
    "KrylovState",
    "chordal_distance",
    "digital_echo",
    "naive_hybrid_echo",
    "raid_echo",
    "se_arn",
    "HybridFactors",
    "LinkBudget",
    "OverheadReport",
    "RateRecord",
    "ideal_digital_rate",
    "independent_sounding",
    "monte_carlo_rate",
    "sed_pipeline",
    "user_rate",
    "waterfill",
]
