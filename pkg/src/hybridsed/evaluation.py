"""End-to-end link evaluation: estimation + decomposition, rates and overhead."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, ChannelRealization, NoiseParams, gen_channel
from .config import SCHEMES, ExperimentConfig, trial_seed
from .decomposition import BcdOptions, bcd_sd
from .errors import ConfigurationError, DimensionError, NumericalError
from .estimation import EchoCounter, EchoMode, EchoVariant, se_arn
from .numerics import complex_gaussian, dft_matrix, svd


@dataclass(frozen=True)
class HybridFactors:
    """Precoder ``F @ G`` (``M x d``) and combiner ``W @ U`` (``N x d``).

    Analog factors may be wider than ``d`` (e.g. a full ``r``-column DFT
    block) as long as the digital factors map them down to ``d`` streams.
    """

    f_analog: np.ndarray
    g_digital: np.ndarray
    w_analog: np.ndarray
    u_digital: np.ndarray

    def __post_init__(self):
        if self.f_analog.shape[1] != self.g_digital.shape[0]:
            raise DimensionError("f_analog and g_digital do not chain")
        if self.w_analog.shape[1] != self.u_digital.shape[0]:
            raise DimensionError("w_analog and u_digital do not chain")
        if self.g_digital.shape[1] != self.u_digital.shape[1]:
            raise DimensionError("precoder and combiner carry different stream counts")

    @property
    def streams(self) -> int:
        return self.g_digital.shape[1]

    @property
    def precoder(self) -> np.ndarray:
        return self.f_analog @ self.g_digital

    @property
    def combiner(self) -> np.ndarray:
        return self.w_analog @ self.u_digital

    @classmethod
    def fully_digital(cls, precoder, combiner) -> "HybridFactors":
        """Unconstrained filters, expressed with identity digital stages."""
        precoder = np.asarray(precoder, dtype=np.complex128)
        combiner = np.asarray(combiner, dtype=np.complex128)
        d = precoder.shape[1]
        return cls(precoder, np.eye(d, dtype=complex), combiner, np.eye(d, dtype=complex))


@dataclass(frozen=True)
class LinkBudget:
    p_s: float = 1.0
    sigma_r_sq: float = 1.0

    def __post_init__(self):
        if self.p_s <= 0 or self.sigma_r_sq <= 0:
            raise ConfigurationError("p_s and sigma_r_sq must be positive")

    @property
    def snr_db(self) -> float:
        return 10.0 * np.log10(self.p_s / self.sigma_r_sq)

    @property
    def snr(self) -> float:
        return self.p_s / self.sigma_r_sq

    @classmethod
    def from_snr_db(cls, snr_db: float, p_s: float = 1.0) -> "LinkBudget":
        return cls(p_s=p_s, sigma_r_sq=p_s * 10.0 ** (-snr_db / 10.0))


@dataclass(frozen=True)
class OverheadReport:
    channel_uses: int
    m: int
    dl_soundings: int = 0
    ul_soundings: int = 0
    m_eff_forward: int | None = None
    m_eff_reverse: int | None = None


def hybrid_overhead(m: int, num_tx: int, num_rx: int, r: int) -> int:
    """Nominal channel uses of the hybrid pipeline, ``2 m (M + N) / r``."""
    total = 2 * m * (num_tx + num_rx)
    if total % r:
        raise ConfigurationError(f"r={r} does not divide 2m(M+N)={total}")
    return total // r


def sed_pipeline(ch: ChannelRealization, d: int, m: int, mode: EchoMode,
                 bcd_opts: BcdOptions | None = None, rng: np.random.Generator | None = None,
                 *, return_details: bool = False):
    """Estimate both singular subspaces by echoing, then decompose each.

    Returns ``(factors, overhead)``; with ``return_details`` also a dict with
    the subspace estimates, Krylov states and decomposition results.
    """
    bcd_opts = bcd_opts or BcdOptions()
    rng = rng if rng is not None else np.random.default_rng(0)
    M, N = ch.num_tx, ch.num_rx
    mode.validate(M, N)
    if not 1 <= d <= m:
        raise ConfigurationError(f"need 1 <= d <= m, got d={d}, m={m}")
    fwd_rng, rev_rng, f_rng, w_rng = rng.spawn(4)
    # a second Gram-Schmidt pass whenever echoes are perturbed
    reorth = not mode.noise.is_noiseless or mode.variant is not EchoVariant.DIGITAL

    fwd = EchoCounter(ch, mode, fwd_rng)
    gamma, fwd_state = se_arn(fwd, M, d, m, fwd_rng, reorthogonalize=reorth)
    rev = EchoCounter(ch, mode, rev_rng, reverse=True)
    phi, rev_state = se_arn(rev, N, d, m, rev_rng, reorthogonalize=reorth)

    opts = dict(max_iters=bcd_opts.max_iters, tol=bcd_opts.tol, warm_start=bcd_opts.warm_start)
    tx = bcd_sd(gamma, rng=f_rng, **opts)
    rx = bcd_sd(phi, rng=w_rng, **opts)
    factors = HybridFactors(tx.analog, tx.digital, rx.analog, rx.digital)
    overhead = OverheadReport(
        channel_uses=fwd.channel_uses + rev.channel_uses,
        m=m,
        dl_soundings=fwd.dl_soundings + rev.dl_soundings,
        ul_soundings=fwd.ul_soundings + rev.ul_soundings,
        m_eff_forward=fwd_state.steps_done,
        m_eff_reverse=rev_state.steps_done,
    )
    if not return_details:
        return factors, overhead
    details = {
        "gamma_est": gamma, "phi_est": phi,
        "forward_state": fwd_state, "reverse_state": rev_state,
        "precoder_decomposition": tx, "combiner_decomposition": rx,
    }
    return factors, overhead, details


def _as_channel_matrix(ch) -> np.ndarray:
    return ch.h if isinstance(ch, ChannelRealization) else np.asarray(ch, dtype=np.complex128)


def user_rate(ch, factors: HybridFactors, budget: LinkBudget) -> float:
    """Equal-power user rate in bits/s/Hz.

    ``log2 det(I + P/(d s^2) E E^H C^{-1})`` with ``E = (W U)^H H F G`` and
    ``C = (W U)^H W U``; evaluated as ``logdet(C + c E E^H) - logdet(C)``.
    """
    h = _as_channel_matrix(ch)
    a = factors.combiner
    b = factors.precoder
    if a.shape[0] != h.shape[0] or b.shape[0] != h.shape[1]:
        raise DimensionError("factors do not match the channel dimensions")
    d = factors.streams
    eff = a.conj().T @ h @ b
    gram = a.conj().T @ a
    if np.linalg.cond(gram) > 1e12:
        raise NumericalError("combiner is rank-deficient")
    c = budget.p_s / (d * budget.sigma_r_sq)
    sign_num, log_num = np.linalg.slogdet(gram + c * (eff @ eff.conj().T))
    sign_den, log_den = np.linalg.slogdet(gram)
    if sign_num.real <= 0 or sign_den.real <= 0:
        raise NumericalError("rate determinant is not positive")
    return max(0.0, float((log_num - log_den) / np.log(2.0)))


def ideal_digital_rate(ch, d: int, budget: LinkBudget) -> float:
    """Equal-power rate over the top-``d`` singular values (perfect CSI)."""
    if isinstance(ch, ChannelRealization):
        s = ch.ground_truth.singular_values
    else:
        s = svd(ch).singular_values
    if d < 1 or d > s.size:
        raise ConfigurationError(f"d={d} outside 1..{s.size}")
    gains = budget.p_s * s[:d] ** 2 / (d * budget.sigma_r_sq)
    return float(np.sum(np.log2(1.0 + gains)))


def waterfill(sigmas, p_total: float, noise_var: float = 1.0) -> np.ndarray:
    """Capacity-optimal powers ``max(0, mu - noise_var / sigma_i^2)`` summing to ``p_total``."""
    sigmas = np.asarray(sigmas, dtype=float)
    if p_total <= 0:
        raise ValueError("p_total must be positive")
    if np.any(sigmas <= 0):
        raise ValueError("sigmas must be positive")
    floors = noise_var / sigmas ** 2
    order = np.argsort(floors, kind="stable")
    sorted_floors = floors[order]
    powers_sorted = np.zeros_like(sorted_floors)
    for k in range(sorted_floors.size, 0, -1):
        mu = (p_total + sorted_floors[:k].sum()) / k
        if mu > sorted_floors[k - 1]:
            powers_sorted[:k] = mu - sorted_floors[:k]
            break
    powers = np.empty_like(powers_sorted)
    powers[order] = powers_sorted
    return powers


def allocation_rate(sigmas, powers, noise_var: float = 1.0) -> float:
    """Rate of parallel channels ``sum log2(1 + p_i sigma_i^2 / noise_var)``."""
    sigmas = np.asarray(sigmas, dtype=float)
    powers = np.asarray(powers, dtype=float)
    return float(np.sum(np.log2(1.0 + powers * sigmas ** 2 / noise_var)))


def independent_sounding(ch: ChannelRealization, d: int, r: int,
                         budget: LinkBudget | None = None, *, metric: str = "frobenius",
                         noisy: bool = False, rng: np.random.Generator | None = None):
    """Exhaustive DFT-codebook beam-pair search followed by SVD filtering.

    Every pair of ``r``-column DFT blocks (one per side) is sounded once;
    the pair whose effective ``r x r`` channel is strongest (Frobenius norm,
    or largest singular value with ``metric="spectral"``) is kept and its
    top-``d`` singular vectors become the digital stages. With ``noisy``
    each effective-channel entry is observed in CN(0, 1/SNR) noise.
    """
    h = ch.h
    N, M = h.shape
    if M % r or N % r:
        raise ConfigurationError(f"r={r} must divide M={M} and N={N}")
    if not 1 <= d <= r:
        raise ConfigurationError(f"need 1 <= d <= r, got d={d}, r={r}")
    if metric not in ("frobenius", "spectral"):
        raise ConfigurationError(f"unknown selection metric {metric!r}")
    if noisy and budget is None:
        raise ConfigurationError("noisy sounding needs a link budget")
    dft_tx, dft_rx = dft_matrix(M), dft_matrix(N)
    best = (-np.inf, None)
    for i in range(M // r):
        f_i = dft_tx[:, i * r:(i + 1) * r]
        hf = h @ f_i
        for j in range(N // r):
            w_j = dft_rx[:, j * r:(j + 1) * r]
            eff = w_j.conj().T @ hf
            if noisy:
                eff = eff + complex_gaussian(rng, r, r, 1.0 / budget.snr)
            score = np.linalg.norm(eff) if metric == "frobenius" else np.linalg.norm(eff, 2)
            if score > best[0]:
                best = (score, (i, j, eff))
    i, j, eff = best[1]
    dec = svd(eff)
    factors = HybridFactors(
        f_analog=dft_tx[:, i * r:(i + 1) * r],
        g_digital=dec.right[:, :d],
        w_analog=dft_rx[:, j * r:(j + 1) * r],
        u_digital=dec.left[:, :d],
    )
    uses = (M // r) * (N // r)
    return factors, OverheadReport(channel_uses=uses, m=0, dl_soundings=uses)


@dataclass(frozen=True)
class RateRecord:
    snr_db: float
    scheme: str
    mean_rate: float
    std_rate: float
    overhead_uses: int
    trials: int

    CSV_HEADER = "snr_db,scheme,mean_rate,std_rate,overhead_uses,trials"

    def to_csv_row(self) -> str:
        return (f"{self.snr_db:.17g},{self.scheme},{self.mean_rate:.17g},"
                f"{self.std_rate:.17g},{self.overhead_uses},{self.trials}")


@dataclass
class TrialOutcome:
    """Rates (one entry per SNR point) and overhead of every scheme on one channel."""

    trial: int
    rates: dict[str, np.ndarray]
    overhead: dict[str, int]
    channel: ChannelRealization | None = None
    details: dict[str, list] = field(default_factory=dict)


_CHANNEL_STREAM = 0


def _scheme_stream(scheme: str) -> int:
    return 1 + SCHEMES.index(scheme)


def simulate_trial(config: ExperimentConfig, trial: int, *, keep_details: bool = False) -> TrialOutcome:
    """Run every configured scheme on channel number ``trial``.

    Randomness comes from ``(master_seed, trial, stream)`` seeds, one stream
    per scheme, so schemes and trials never share RNG state. Without echo
    noise the filters do not depend on SNR and are designed once per trial.
    """
    d, m, r = config.d, config.arnoldi_steps, config.rf_chains
    params = ChannelParams(config.m_antennas, config.n_antennas, config.paths)
    ch = gen_channel(params, np.random.default_rng(trial_seed(config.master_seed, trial, _CHANNEL_STREAM)))
    budgets = [LinkBudget.from_snr_db(s) for s in config.snr_db]
    outcome = TrialOutcome(trial=trial, rates={}, overhead={}, channel=ch if keep_details else None)

    for scheme in config.schemes:
        seed = trial_seed(config.master_seed, trial, _scheme_stream(scheme))
        rates = np.empty(len(budgets))
        if scheme == "ideal-digital":
            rates[:] = [ideal_digital_rate(ch, d, b) for b in budgets]
            outcome.overhead[scheme] = 0
        elif scheme in ("sed-digital", "sed-hybrid-raid"):
            variant = EchoVariant.DIGITAL if scheme == "sed-digital" else EchoVariant.HYBRID_RAID
            designs = {}
            for k, b in enumerate(budgets):
                noise = NoiseParams(b.sigma_r_sq, b.sigma_r_sq) if config.echo_noise else NoiseParams()
                key = k if config.echo_noise else None
                if key not in designs:
                    mode = EchoMode(variant, noise, rf_chains=r, streams=d)
                    designs[key] = sed_pipeline(ch, d, m, mode, config.bcd,
                                                np.random.default_rng(seed),
                                                return_details=keep_details)
                factors, overhead = designs[key][:2]
                rates[k] = user_rate(ch, factors, b)
            outcome.overhead[scheme] = max(v[1].channel_uses for v in designs.values())
            if keep_details:
                outcome.details[scheme] = [v[2] for v in designs.values()]
        elif scheme == "independent-sounding":
            designs = {}
            for k, b in enumerate(budgets):
                key = k if config.echo_noise else None
                if key not in designs:
                    designs[key] = independent_sounding(
                        ch, d, r, b, metric=config.sounding_metric,
                        noisy=config.echo_noise, rng=np.random.default_rng(seed))
                rates[k] = user_rate(ch, designs[key][0], b)
            outcome.overhead[scheme] = max(v[1].channel_uses for v in designs.values())
        else:
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        outcome.rates[scheme] = rates
    return outcome


def aggregate(config: ExperimentConfig, outcomes: list[TrialOutcome]) -> list[RateRecord]:
    """Per (SNR, scheme) mean/std over trials, sorted by ``(snr_db, scheme)``."""
    outcomes = sorted(outcomes, key=lambda o: o.trial)
    records = []
    for scheme in config.schemes:
        table = np.stack([o.rates[scheme] for o in outcomes])  # trials x snr
        means = table.mean(axis=0)
        stds = table.std(axis=0)
        uses = max(o.overhead[scheme] for o in outcomes)
        for k, snr in enumerate(config.snr_db):
            records.append(RateRecord(float(snr), scheme, float(means[k]), float(stds[k]),
                                      int(uses), len(outcomes)))
    records.sort(key=lambda rec: (rec.snr_db, rec.scheme))
    return records


def monte_carlo_rate(config: ExperimentConfig) -> list[RateRecord]:
    config.validate("rate-sweep")
    outcomes = [simulate_trial(config, t) for t in range(config.trials)]
    return aggregate(config, outcomes)
