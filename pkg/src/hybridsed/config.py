"""Experiment configuration: a flat ``key = value`` text format.

Example::

    name = sweep-d2
    m_antennas = 64
    n_antennas = 32
    rf_chains = 8
    streams = 2
    paths = 4
    arnoldi_steps = 4
    snr_db = -10:5:20
    trials = 100
    master_seed = 7
    schemes = sed-hybrid-raid, independent-sounding, ideal-digital

Lists are comma separated; ``snr_db`` also accepts ``start:step:stop``
(inclusive). Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decomposition import BcdOptions
from .errors import ConfigurationError
from .estimation import EchoVariant

SCHEMES = ("sed-digital", "sed-hybrid-raid", "independent-sounding", "ideal-digital")
SOUNDING_METRICS = ("frobenius", "spectral")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    m_antennas: int = 64
    n_antennas: int = 32
    rf_chains: int = 8
    streams: tuple[int, ...] = (2,)
    paths: int = 4
    arnoldi_steps: int = 4
    snr_db: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    trials: int = 100
    master_seed: int = 0
    schemes: tuple[str, ...] = SCHEMES
    mode: EchoVariant = EchoVariant.HYBRID_RAID
    echo_noise: bool = False
    sounding_metric: str = "frobenius"
    bcd_max_iters: int = 500
    bcd_tol: float = 1e-8
    bcd_warm_start: bool = False
    output_path: str = "results.csv"

    def __post_init__(self):
        if not isinstance(self.mode, EchoVariant):
            object.__setattr__(self, "mode", _parse_mode("mode", str(self.mode)))
        for name in ("streams", "snr_db", "schemes"):
            value = getattr(self, name)
            if isinstance(value, (int, float, str)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))

    @property
    def d(self) -> int:
        """The single stream count of a rate sweep."""
        if len(self.streams) != 1:
            raise ConfigurationError(
                f"streams: a rate sweep needs exactly one value, got {list(self.streams)}"
            )
        return self.streams[0]

    @property
    def bcd(self) -> BcdOptions:
        return BcdOptions(self.bcd_max_iters, self.bcd_tol, self.bcd_warm_start)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def validate(self, command: str = "rate-sweep") -> "ExperimentConfig":
        """Raise :class:`ConfigurationError` naming the first violated field."""
        M, N, r, L = self.m_antennas, self.n_antennas, self.rf_chains, self.paths
        if M < 1:
            raise ConfigurationError(f"m_antennas must be >= 1, got {M}")
        if N < 1:
            raise ConfigurationError(f"n_antennas must be >= 1, got {N}")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.master_seed < 0:
            raise ConfigurationError(f"master_seed must be non-negative, got {self.master_seed}")
        if command == "channel-dump":
            if not 1 <= L <= min(M, N):
                raise ConfigurationError(f"paths must satisfy 1 <= L <= min(M, N), got {L}")
            return self
        if not self.streams:
            raise ConfigurationError("streams must list at least one value")
        for d in self.streams:
            if d < 1:
                raise ConfigurationError(f"streams must be >= 1, got {d}")
            if d > r:
                raise ConfigurationError(f"streams d={d} exceeds rf_chains r={r}")
        if command == "decomp-bench":
            if r > M:
                raise ConfigurationError(f"rf_chains r={r} exceeds m_antennas M={M}")
            self.bcd  # noqa: B018  (validates the solver options)
            return self
        if command != "rate-sweep":
            raise ConfigurationError(f"unknown command {command!r}")

        d = self.d
        if r > min(M, N):
            raise ConfigurationError(f"rf_chains r={r} exceeds min(M, N)={min(M, N)}")
        needs_blocks = (
            self.mode is EchoVariant.HYBRID_RAID
            or "sed-hybrid-raid" in self.schemes
            or "independent-sounding" in self.schemes
        )
        if needs_blocks:
            if M % r:
                raise ConfigurationError(f"rf_chains r={r} must divide m_antennas M={M}")
            if N % r:
                raise ConfigurationError(f"rf_chains r={r} must divide n_antennas N={N}")
        if not 1 <= L <= min(M, N):
            raise ConfigurationError(f"paths must satisfy 1 <= L <= min(M, N), got {L}")
        if d > L:
            raise ConfigurationError(f"streams d={d} exceeds paths L={L} (channel rank)")
        if not d <= self.arnoldi_steps <= min(M, N):
            raise ConfigurationError(
                f"arnoldi_steps must satisfy d <= m <= min(M, N), got m={self.arnoldi_steps}"
            )
        if not self.snr_db:
            raise ConfigurationError("snr_db must list at least one value")
        if not self.schemes:
            raise ConfigurationError("schemes must list at least one scheme")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigurationError(f"schemes: unknown scheme {s!r} (known: {', '.join(SCHEMES)})")
        if self.sounding_metric not in SOUNDING_METRICS:
            raise ConfigurationError(f"sounding_metric must be one of {SOUNDING_METRICS}")
        self.bcd  # noqa: B018
        return self


def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"{key}: expected a boolean, got {text!r}")


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigurationError(f"{key}: expected an integer, got {text!r}") from None


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ConfigurationError(f"{key}: expected a number, got {text!r}") from None


def _split(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _parse_snr(key: str, text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"{key}: range syntax is start:step:stop, got {text!r}")
        start, step, stop = (_parse_float(key, p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigurationError(f"{key}: empty or invalid range {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + i * step) for i in range(count))
    return tuple(_parse_float(key, v) for v in _split(text))


_PARSERS = {
    "name": lambda k, v: v.strip(),
    "m_antennas": _parse_int,
    "n_antennas": _parse_int,
    "rf_chains": _parse_int,
    "streams": lambda k, v: tuple(_parse_int(k, x) for x in _split(v)),
    "paths": _parse_int,
    "arnoldi_steps": _parse_int,
    "snr_db": _parse_snr,
    "trials": _parse_int,
    "master_seed": _parse_int,
    "schemes": lambda k, v: tuple(_split(v)),
    "mode": lambda k, v: _parse_mode(k, v),
    "echo_noise": _parse_bool,
    "sounding_metric": lambda k, v: v.strip(),
    "bcd_max_iters": _parse_int,
    "bcd_tol": _parse_float,
    "bcd_warm_start": _parse_bool,
    "output_path": lambda k, v: v.strip(),
}


def _parse_mode(key: str, text: str) -> EchoVariant:
    try:
        return EchoVariant(text.strip())
    except ValueError:
        known = ", ".join(v.value for v in EchoVariant)
        raise ConfigurationError(f"{key}: unknown echo mode {text!r} (known: {known})") from None


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None, strict=True,
    )
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    values = {}
    for key, raw in parser["config"].items():
        if key not in _PARSERS:
            raise ConfigurationError(f"unknown config key {key!r}")
        values[key] = _PARSERS[key](key, raw)
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def format_config(cfg: ExperimentConfig) -> str:
    """Serialize back to the text format (round-trips through :func:`parse_config`)."""
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, EchoVariant):
            v = v.value
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def trial_seed(master_seed: int, trial: int, stream: int = 0) -> np.random.SeedSequence:
    """Independent seed for ``(trial, stream)``; unaffected by the total trial count."""
    return np.random.SeedSequence(master_seed, spawn_key=(trial, stream))


__all__ = [
    "ExperimentConfig", "SCHEMES", "SOUNDING_METRICS", "parse_config", "load_config",
    "format_config", "trial_seed",
]
