"""Sparse geometric mmWave channels and additive noise.

The channel between an ``M``-antenna base station and an ``N``-antenna
mobile is a sum of ``L`` rank-one paths with half-wavelength ULA responses
at both ends::

    H = sqrt(M*N/L) * sum_i beta_i * a_r(aoa_i) a_t(aod_i)^H

with ``beta_i ~ CN(0, 1)`` and angles uniform on ``[-pi/2, pi/2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError
from .numerics import SvdResult, as_complex_matrix, complex_gaussian, svd


@dataclass(frozen=True)
class ChannelParams:
    num_tx: int
    num_rx: int
    num_paths: int
    seed: int = 0

    def __post_init__(self):
        if self.num_tx < 1 or self.num_rx < 1:
            raise ConfigurationError("num_tx and num_rx must be >= 1")
        if self.num_paths < 1:
            raise ConfigurationError("num_paths must be >= 1")
        if self.num_paths > min(self.num_tx, self.num_rx):
            raise ConfigurationError(
                f"num_paths={self.num_paths} exceeds min(num_tx, num_rx)="
                f"{min(self.num_tx, self.num_rx)}"
            )


@dataclass(frozen=True)
class NoiseParams:
    """Receiver (``sigma_r_sq``, at the MS) and transmitter (``sigma_t_sq``, at the BS) noise variances."""

    sigma_r_sq: float = 0.0
    sigma_t_sq: float = 0.0

    def __post_init__(self):
        if self.sigma_r_sq < 0 or self.sigma_t_sq < 0:
            raise ConfigurationError("noise variances must be non-negative")

    @property
    def is_noiseless(self) -> bool:
        return self.sigma_r_sq == 0.0 and self.sigma_t_sq == 0.0

    @classmethod
    def from_snr_db(cls, snr_db: float, p_s: float = 1.0) -> "NoiseParams":
        var = p_s * 10.0 ** (-snr_db / 10.0)
        return cls(var, var)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """An ``N x M`` channel with its path parameters and cached SVD."""

    h: np.ndarray
    path_gains: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    aoa: np.ndarray = field(default_factory=lambda: np.zeros(0))
    aod: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ground_truth: SvdResult | None = None

    def __post_init__(self):
        h = as_complex_matrix(self.h, "channel")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if self.ground_truth is None:
            object.__setattr__(self, "ground_truth", svd(h))

    @classmethod
    def from_matrix(cls, h) -> "ChannelRealization":
        """Wrap an arbitrary matrix (no path parameters)."""
        return cls(h=np.array(h, dtype=np.complex128))

    @property
    def num_rx(self) -> int:
        return self.h.shape[0]

    @property
    def num_tx(self) -> int:
        return self.h.shape[1]

    @property
    def num_paths(self) -> int:
        return len(self.path_gains)

    def rank(self, rtol: float = 1e-9) -> int:
        return self.ground_truth.rank(rtol)


def ula_response(angle: float, n: int) -> np.ndarray:
    """Unit-norm half-wavelength ULA response ``exp(j*pi*k*sin(angle)) / sqrt(n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not -np.pi / 2 - 1e-12 <= angle <= np.pi / 2 + 1e-12:
        raise ValueError(f"angle {angle} outside [-pi/2, pi/2]")
    k = np.arange(n)
    return np.exp(1j * np.pi * k * np.sin(angle)) / np.sqrt(n)


def channel_from_paths(num_tx: int, num_rx: int, path_gains, aoa, aod) -> ChannelRealization:
    """Assemble the geometric channel from explicit path parameters."""
    gains = np.asarray(path_gains, dtype=np.complex128).reshape(-1)
    aoa = np.asarray(aoa, dtype=float).reshape(-1)
    aod = np.asarray(aod, dtype=float).reshape(-1)
    n_paths = gains.size
    if not (aoa.size == aod.size == n_paths) or n_paths == 0:
        raise DimensionError("path_gains, aoa and aod must have the same non-zero length")
    a_r = np.stack([ula_response(x, num_rx) for x in aoa], axis=1)  # N x L
    a_t = np.stack([ula_response(x, num_tx) for x in aod], axis=1)  # M x L
    h = np.sqrt(num_tx * num_rx / n_paths) * (a_r * gains) @ a_t.conj().T
    return ChannelRealization(h=h, path_gains=gains, aoa=aoa, aod=aod)


def gen_channel(params: ChannelParams, rng: np.random.Generator | None = None) -> ChannelRealization:
    """Draw one channel realization.

    With ``rng=None`` a generator is seeded from ``params.seed``. Gains are
    drawn before angles and none of the draws depend on ``M`` or ``N``, so a
    given seed yields the same paths for any array size.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    L = params.num_paths
    gains = complex_gaussian(rng, L)
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, L)
    aod = rng.uniform(-np.pi / 2, np.pi / 2, L)
    return channel_from_paths(params.num_tx, params.num_rx, gains, aoa, aod)


def apply_awgn(x, variance: float, rng: np.random.Generator) -> np.ndarray:
    """``x + w`` with ``w`` i.i.d. CN(0, variance); exact identity for zero variance."""
    x = np.asarray(x, dtype=np.complex128)
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if variance == 0:
        return x.copy()
    return x + complex_gaussian(rng, x.shape[0], None if x.ndim == 1 else x.shape[1], variance)


def ground_truth_subspaces(ch: ChannelRealization, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Top-``d`` right (``M x d``) and left (``N x d``) singular vectors and values."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rank = ch.rank()
    if d > rank:
        raise ConfigurationError(f"requested d={d} exceeds channel rank {rank}")
    gt = ch.ground_truth
    return gt.right[:, :d].copy(), gt.left[:, :d].copy(), gt.singular_values[:d].copy()


def relative_eigengap(ch: ChannelRealization, d: int) -> float:
    """``(s_d^2 - s_{d+1}^2) / s_d^2``, the gap seen by an eigensolver on ``H^H H``."""
    s2 = ch.ground_truth.singular_values ** 2
    if d >= s2.size:
        return 1.0
    return float((s2[d - 1] - s2[d]) / s2[d - 1]) if s2[d - 1] > 0 else 0.0

