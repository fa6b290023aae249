"""Distributed singular-subspace estimation by echoing.

The transmitter probes the channel with a unit vector ``q``; the receiver
echoes what it hears, so the transmitter observes (a noisy, and in the
hybrid case distorted) ``H^H H q``. Feeding these echoes to an Arnoldi
iteration yields the dominant right singular subspace without ever forming
``H``. Running the same loop from the receiver side (operator ``H H^H``)
yields the left subspace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import ChannelRealization, NoiseParams
from .decomposition import beamform_decompose
from .errors import ConfigurationError, DimensionError, InsufficientRankError
from .numerics import as_complex_vector, complex_gaussian, dft_matrix, eig_dense, qr_thin

BREAKDOWN_TOL = 1e-10


class EchoVariant(str, enum.Enum):
    DIGITAL = "digital"
    HYBRID_NAIVE = "hybrid-naive"
    HYBRID_RAID = "hybrid-raid"


@dataclass(frozen=True)
class EchoMode:
    variant: EchoVariant = EchoVariant.DIGITAL
    noise: NoiseParams = field(default_factory=NoiseParams)
    rf_chains: int = 1
    streams: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", EchoVariant(self.variant))
        if self.streams < 1:
            raise ConfigurationError("streams (d) must be >= 1")
        if self.rf_chains < self.streams:
            raise ConfigurationError(
                f"streams d={self.streams} exceeds rf_chains r={self.rf_chains}"
            )

    def validate(self, num_tx: int, num_rx: int) -> None:
        """Check the dimension invariants against an ``num_rx x num_tx`` channel."""
        r = self.rf_chains
        if r > min(num_tx, num_rx):
            raise ConfigurationError(f"rf_chains r={r} exceeds min(M, N)={min(num_tx, num_rx)}")
        if self.variant is EchoVariant.HYBRID_RAID:
            if num_tx % r:
                raise ConfigurationError(f"rf_chains r={r} does not divide M={num_tx}")
            if num_rx % r:
                raise ConfigurationError(f"rf_chains r={r} does not divide N={num_rx}")


@dataclass
class KrylovState:
    """Arnoldi basis and projected matrix after ``steps_done`` echoes.

    ``q_basis`` holds ``steps_done + 1`` columns unless the iteration broke
    down, in which case it holds ``steps_done``. ``t_coeffs`` is the square
    ``steps_done x steps_done`` upper Hessenberg block and ``residual_norm``
    the last subdiagonal entry ``t_{l+1,l}``.
    """

    q_basis: np.ndarray
    t_coeffs: np.ndarray
    steps_done: int
    broke_down: bool
    residual_norm: float = 0.0


def _operator(ch: ChannelRealization, reverse: bool) -> np.ndarray:
    return ch.h.conj().T if reverse else ch.h


def _probe(q, dim: int) -> np.ndarray:
    q = as_complex_vector(q, "probe")
    if q.size != dim:
        raise DimensionError(f"probe has dimension {q.size}, expected {dim}")
    return q


def digital_echo(ch: ChannelRealization, q, noise: NoiseParams | None = None,
                 rng: np.random.Generator | None = None, *, reverse: bool = False) -> np.ndarray:
    """Amplify-and-forward echo ``H^H (H q + w_r) + w_t`` (two channel uses).

    With ``reverse=True`` the receiver initiates: ``H (H^H q + w_t) + w_r``.
    """
    h = _operator(ch, reverse)
    q = _probe(q, h.shape[1])
    if np.linalg.norm(q) > 1 + 1e-9:
        raise ValueError("echo probe must have norm <= 1")
    noise = noise or NoiseParams()
    first_var, second_var = noise.sigma_r_sq, noise.sigma_t_sq
    if reverse:
        first_var, second_var = second_var, first_var
    s = h @ q
    if first_var > 0:
        s = s + complex_gaussian(rng, s.size, None, first_var)
    p = h.conj().T @ s
    if second_var > 0:
        p = p + complex_gaussian(rng, p.size, None, second_var)
    return p


def naive_hybrid_echo(ch: ChannelRealization, q, mode: EchoMode,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Echo through fixed analog filters, ``F^H H^H W W^H H (f g)``.

    Both ends use the first ``r`` columns of their DFT matrix. The result is
    ``r``-dimensional and distorted; it only illustrates why a plain
    amplify-and-forward echo does not survive the hybrid architecture.
    """
    if mode.variant is not EchoVariant.HYBRID_NAIVE:
        raise ConfigurationError("naive_hybrid_echo requires the hybrid-naive variant")
    h = ch.h
    n, m = h.shape
    mode.validate(m, n)
    q = _probe(q, m)
    r = mode.rf_chains
    f_l = dft_matrix(m)[:, :r]
    w_l = dft_matrix(n)[:, :r]
    bf = beamform_decompose(q)
    x = bf.f * bf.g
    s = w_l.conj().T @ (h @ x)
    if mode.noise.sigma_r_sq > 0:
        s = s + complex_gaussian(rng, r, None, mode.noise.sigma_r_sq)
    p = f_l.conj().T @ (h.conj().T @ (w_l @ s))
    if mode.noise.sigma_t_sq > 0:
        p = p + complex_gaussian(rng, r, None, mode.noise.sigma_t_sq)
    return p


@dataclass(frozen=True)
class RaidTrace:
    """Intermediate quantities of one RAID echo (for diagnostics and tests)."""

    tx_error: np.ndarray      # e^(t): probe minus its rank-one analog/digital approximation
    rx_combined: np.ndarray   # s~: aggregated receiver samples
    rx_error: np.ndarray      # e^(r): s~ minus its approximation
    dl_soundings: int
    ul_soundings: int


def _sound(h: np.ndarray, x: np.ndarray, r: int, variance: float,
           rng: np.random.Generator | None) -> np.ndarray:
    """Send ``x`` ``n/r`` times, combine each with one DFT block and re-aggregate."""
    n = h.shape[0]
    blocks = dft_matrix(n)
    y = h @ x
    acc = np.zeros(n, dtype=np.complex128)
    for k in range(n // r):
        w_k = blocks[:, k * r:(k + 1) * r]
        rx = y if variance == 0 else y + complex_gaussian(rng, n, None, variance)
        acc += w_k @ (w_k.conj().T @ rx)
    return acc


def _rank_one(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not np.any(v):
        return np.zeros_like(v), np.zeros_like(v)
    bf = beamform_decompose(v)
    return bf.f * bf.g, bf.error


def raid_echo(ch: ChannelRealization, q, mode: EchoMode,
              rng: np.random.Generator | None = None, *, reverse: bool = False,
              return_trace: bool = False):
    """Repetition-aided echo through hybrid transceivers.

    The initiator approximates ``q`` by a constant-modulus beam times a
    scalar, sends it with array gain ``d`` once per ``r``-column block of the
    far end's DFT matrix, and the far end sums the block-combined samples,
    which undoes the analog combining exactly. The far end repeats the
    procedure back. Returns ``(p, channel_uses)`` where, without noise,
    ``p = d^2 H^H H q - d^2 H^H H e_t - d H^H e_r``.
    """
    if mode.variant is not EchoVariant.HYBRID_RAID:
        raise ConfigurationError("raid_echo requires the hybrid-raid variant")
    h = _operator(ch, reverse)
    n, m = h.shape
    if reverse:
        mode.validate(n, m)
    else:
        mode.validate(m, n)
    q = _probe(q, m)
    r, d = mode.rf_chains, mode.streams
    first_var, second_var = mode.noise.sigma_r_sq, mode.noise.sigma_t_sq
    if reverse:
        first_var, second_var = second_var, first_var

    x_t, e_t = _rank_one(q)
    s_tilde = _sound(h, d * x_t, r, first_var, rng)
    x_r, e_r = _rank_one(s_tilde)
    p = _sound(h.conj().T, d * x_r, r, second_var, rng)

    k_first, k_second = n // r, m // r
    uses = k_first + k_second
    if not return_trace:
        return p, uses
    dl, ul = (k_second, k_first) if reverse else (k_first, k_second)
    trace = RaidTrace(tx_error=e_t, rx_combined=s_tilde, rx_error=e_r,
                      dl_soundings=dl, ul_soundings=ul)
    return p, uses, trace


def se_arn(echo: Callable[[np.ndarray], np.ndarray], dim: int, d: int, m: int,
           rng: np.random.Generator, *, reorthogonalize: bool = False,
           q1=None) -> tuple[np.ndarray, KrylovState]:
    """Arnoldi subspace estimation driven by an echo oracle.

    ``echo(q)`` must return (an estimate of) ``A q`` for the Hermitian
    operator ``A`` whose dominant eigenvectors are sought. After ``m``
    echoes the ``d`` Ritz vectors of largest-modulus Ritz values are
    orthonormalized and returned as a ``dim x d`` matrix.

    A subdiagonal ``t_{l+1,l}`` below ``1e-10 * ||p_l||`` means the Krylov
    space is invariant; the loop stops there and the leading block is used.
    ``reorthogonalize`` adds a second Gram-Schmidt pass per step.
    """
    if not 1 <= d <= m <= dim:
        raise ConfigurationError(f"need 1 <= d <= m <= dim, got d={d}, m={m}, dim={dim}")
    if q1 is None:
        q1 = complex_gaussian(rng, dim)
    q = as_complex_vector(q1, "q1")
    if q.size != dim:
        raise DimensionError(f"q1 has dimension {q.size}, expected {dim}")
    q = q / np.linalg.norm(q)

    basis = np.zeros((dim, m + 1), dtype=np.complex128)
    t = np.zeros((m + 1, m), dtype=np.complex128)
    basis[:, 0] = q
    steps = 0
    broke_down = False
    for l in range(m):
        p = np.asarray(echo(basis[:, l]), dtype=np.complex128)
        if p.shape != (dim,):
            raise DimensionError(f"echo returned shape {p.shape}, expected ({dim},)")
        p_norm = np.linalg.norm(p)
        q_l = basis[:, : l + 1]
        coeffs = q_l.conj().T @ p
        resid = p - q_l @ coeffs
        if reorthogonalize:
            extra = q_l.conj().T @ resid
            resid -= q_l @ extra
            coeffs += extra
        t[: l + 1, l] = coeffs
        beta = np.linalg.norm(resid)
        t[l + 1, l] = beta
        steps = l + 1
        if beta <= BREAKDOWN_TOL * p_norm or p_norm == 0.0:
            broke_down = True
            break
        basis[:, l + 1] = resid / beta

    if steps < d:
        raise InsufficientRankError(
            f"Krylov space collapsed after {steps} step(s); cannot extract d={d} directions"
        )
    t_m = t[:steps, :steps].copy()
    q_m = basis[:, :steps]
    _, vecs = eig_dense(t_m)
    gamma, _ = qr_thin(q_m @ vecs[:, :d])

    state = KrylovState(
        q_basis=basis[:, : steps + (0 if broke_down else 1)].copy(),
        t_coeffs=t_m,
        steps_done=steps,
        broke_down=broke_down,
        residual_norm=float(t[steps, steps - 1].real),
    )
    return gamma, state


def chordal_distance(a, b, tol: float = 1e-6) -> float:
    """``||a a^H - b b^H||_F / sqrt(2)`` between two orthonormal bases."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    for name, x in (("a", a), ("b", b)):
        gram_dev = np.linalg.norm(x.conj().T @ x - np.eye(x.shape[1]))
        if gram_dev > tol:
            raise ValueError(f"{name} does not have orthonormal columns (deviation {gram_dev:.2e})")
    return float(np.linalg.norm(a @ a.conj().T - b @ b.conj().T) / np.sqrt(2.0))


@dataclass
class EchoCounter:
    """Wraps a channel and echo mode as the callable ``se_arn`` expects.

    Tracks channel uses and per-direction sounding counts as it goes.
    """

    ch: ChannelRealization
    mode: EchoMode
    rng: np.random.Generator
    reverse: bool = False
    channel_uses: int = 0
    dl_soundings: int = 0
    ul_soundings: int = 0
    echoes: int = 0

    def __call__(self, q: np.ndarray) -> np.ndarray:
        self.echoes += 1
        if self.mode.variant is EchoVariant.DIGITAL:
            p = digital_echo(self.ch, q, self.mode.noise, self.rng, reverse=self.reverse)
            self.channel_uses += 2
            self.dl_soundings += 1
            self.ul_soundings += 1
            return p
        if self.mode.variant is EchoVariant.HYBRID_RAID:
            p, uses, trace = raid_echo(self.ch, q, self.mode, self.rng,
                                       reverse=self.reverse, return_trace=True)
            self.channel_uses += uses
            self.dl_soundings += trace.dl_soundings
            self.ul_soundings += trace.ul_soundings
            return p
        raise ConfigurationError(
            "the hybrid-naive echo is a diagnostic with r-dimensional output; "
            "it cannot drive subspace estimation"
        )
