"""Analog/digital subspace decomposition.

An orthonormal ``M x d`` target is approximated by ``F @ G`` where ``F`` has
constant-modulus entries ``exp(j*phi)/sqrt(M)`` (phase shifters) and ``G``
is an unconstrained ``d x d`` baseband matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError
from .numerics import as_complex_matrix, as_complex_vector, complex_gaussian, dft_matrix

_COND_LIMIT = 1e12
_RIDGE = 1e-10


def project_unit_modulus(a) -> np.ndarray:
    """Euclidean projection onto matrices whose entries all have modulus ``1/sqrt(p)``.

    Keeps the phase of every entry; zero entries get phase 0.
    """
    a = np.asarray(a, dtype=np.complex128)
    p = a.shape[0]
    return np.exp(1j * np.angle(a)) / np.sqrt(p)


def is_unit_modulus(a, tol: float = 1e-12) -> bool:
    a = np.asarray(a)
    return bool(np.all(np.abs(np.abs(a) - 1.0 / np.sqrt(a.shape[0])) <= tol))


@dataclass
class DecompositionResult:
    """Outcome of a decomposition run.

    ``objective_trace`` holds ``||target - F G||_F^2`` after every round
    (BCD) or every selected atom (OMP). ``analog``/``digital`` are the best
    iterate seen, whose objective is ``objective``. ``power_trace`` and
    ``stationarity_trace`` record ``||F G||_F^2`` and
    ``max |F^H (target - F G)|`` after each digital update.
    """

    analog: np.ndarray
    digital: np.ndarray
    objective: float
    objective_trace: list[float]
    iterations: int
    converged: bool
    regularized: bool = False
    power_trace: list[float] = field(default_factory=list)
    stationarity_trace: list[float] = field(default_factory=list)
    support: list[int] | None = None

    @property
    def product(self) -> np.ndarray:
        return self.analog @ self.digital


@dataclass(frozen=True)
class BeamformResult:
    f: np.ndarray
    g: float
    error: np.ndarray

    @property
    def objective(self) -> float:
        return float(np.vdot(self.error, self.error).real)


@dataclass(frozen=True)
class BcdOptions:
    max_iters: int = 500
    tol: float = 1e-8
    warm_start: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("bcd max_iters must be >= 1")
        if self.tol < 0:
            raise ConfigurationError("bcd tol must be >= 0")


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``gram @ x = rhs`` for Hermitian PSD ``gram``, ridge-regularized if ill-conditioned."""
    ridged = False
    if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > _COND_LIMIT:
        scale = np.trace(gram).real
        if not np.isfinite(scale) or scale <= 0:
            scale = 1.0
        gram = gram + _RIDGE * scale * np.eye(gram.shape[0])
        ridged = True
    return np.linalg.solve(gram, rhs), ridged


def _analog_update(target: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, bool]:
    # target G^H (G G^H)^{-1}, solved on the transposed system
    x, ridged = _solve_gram(g @ g.conj().T, g @ target.conj().T)
    return x.conj().T, ridged


def _digital_update(target: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, bool]:
    return _solve_gram(f.conj().T @ f, f.conj().T @ target)


def _objective(target: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    return float(np.linalg.norm(target - f @ g) ** 2)


def bcd_sd(target, max_iters: int = 500, tol: float = 1e-8,
           rng: np.random.Generator | None = None, *, warm_start: bool = False,
           project: bool = True, g0=None) -> DecompositionResult:
    """Block coordinate descent for the analog/digital decomposition of ``target``.

    Alternates the least-squares analog update followed by the unit-modulus
    projection, and the least-squares digital update. Stops once a round
    changes the objective by less than ``tol`` relative, or after
    ``max_iters`` rounds, and returns the best iterate seen. ``project=False``
    drops the projection (plain alternating least squares), which is used to
    check monotonicity.
    """
    target = as_complex_matrix(target, "target")
    m, d = target.shape
    if d > m:
        raise DimensionError(f"target must be tall, got {target.shape}")
    if rng is None:
        rng = np.random.default_rng(0)

    regularized = False
    if g0 is not None:
        g = as_complex_matrix(g0, "g0")
        if g.shape != (d, d):
            raise DimensionError(f"g0 must be {d}x{d}")
    elif warm_start:
        g, regularized = _digital_update(target, project_unit_modulus(target))
    else:
        g = complex_gaussian(rng, d, d)

    trace: list[float] = []
    power: list[float] = []
    stationarity: list[float] = []
    best = (np.inf, None, None)
    converged = False
    prev = None
    k = 0
    for k in range(1, max_iters + 1):
        f, ridged_f = _analog_update(target, g)
        if project:
            f = project_unit_modulus(f)
        g, ridged_g = _digital_update(target, f)
        regularized |= ridged_f or ridged_g

        fg = f @ g
        resid = target - fg
        h0 = float(np.linalg.norm(resid) ** 2)
        trace.append(h0)
        power.append(float(np.linalg.norm(fg) ** 2))
        stationarity.append(float(np.max(np.abs(f.conj().T @ resid))))
        if h0 < best[0]:
            best = (h0, f, g)
        if prev is not None and abs(prev - h0) <= tol * max(prev, np.finfo(float).tiny):
            converged = True
            break
        prev = h0

    h_best, f_best, g_best = best
    return DecompositionResult(
        analog=f_best, digital=g_best, objective=h_best, objective_trace=trace,
        iterations=k, converged=converged, regularized=regularized,
        power_trace=power, stationarity_trace=stationarity,
    )


def beamform_decompose(gamma) -> BeamformResult:
    """Closed-form rank-one decomposition ``gamma ~ f * g``.

    ``f`` takes the phases of ``gamma`` (phase 0 on zero entries) with
    modulus ``1/sqrt(M)``; ``g = ||gamma||_1 / sqrt(M)`` is real and
    non-negative. This is the global optimum over constant-modulus ``f``
    and ``g >= 0``.
    """
    gamma = as_complex_vector(gamma, "gamma")
    mags = np.abs(gamma)
    if not np.any(mags > 0):
        raise ValueError("cannot decompose the zero vector")
    m = gamma.size
    f = np.exp(1j * np.angle(gamma)) / np.sqrt(m)
    g = float(mags.sum() / np.sqrt(m))
    return BeamformResult(f=f, g=g, error=gamma - f * g)


def dft_dictionary(m: int) -> np.ndarray:
    """Columns of the unitary ``m``-point DFT; each is a valid analog beam."""
    return dft_matrix(m)


def steering_dictionary(m: int, k: int) -> np.ndarray:
    """``k`` half-wavelength ULA beams on a uniform grid in ``sin(angle)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    u = -1.0 + 2.0 * (np.arange(k) + 0.5) / k
    return np.exp(1j * np.pi * np.outer(np.arange(m), u)) / np.sqrt(m)


def omp_decompose(target, dictionary=None, r: int | None = None) -> DecompositionResult:
    """Greedy analog selection followed by least-squares digital weights.

    At each of ``r`` steps the atom with the largest correlation energy
    ``||atom^H residual||^2`` joins the support, then the digital matrix is
    refit over the whole support. Defaults to the ``M``-point DFT dictionary
    and ``r = d``.
    """
    target = as_complex_matrix(target, "target")
    m, d = target.shape
    if dictionary is None:
        dictionary = dft_dictionary(m)
    dictionary = as_complex_matrix(dictionary, "dictionary")
    if dictionary.shape[0] != m:
        raise DimensionError(f"dictionary has {dictionary.shape[0]} rows, target has {m}")
    n_atoms = dictionary.shape[1]
    r = d if r is None else r
    if not d <= r <= n_atoms:
        raise ConfigurationError(f"need d <= r <= K, got d={d}, r={r}, K={n_atoms}")
    norms = np.linalg.norm(dictionary, axis=0)
    if not np.allclose(norms, 1.0, atol=1e-9):
        raise ValueError("dictionary columns must have unit norm")

    support: list[int] = []
    trace: list[float] = []
    power: list[float] = []
    residual = target
    g = None
    for _ in range(r):
        corr = np.sum(np.abs(dictionary.conj().T @ residual) ** 2, axis=1)
        corr[support] = -np.inf
        support.append(int(np.argmax(corr)))
        f = dictionary[:, support]
        g = np.linalg.lstsq(f, target, rcond=None)[0]
        residual = target - f @ g
        trace.append(float(np.linalg.norm(residual) ** 2))
        power.append(float(np.linalg.norm(f @ g) ** 2))

    f = dictionary[:, support]
    return DecompositionResult(
        analog=f, digital=g, objective=trace[-1], objective_trace=trace,
        iterations=r, converged=True, power_trace=power, support=support,
    )
