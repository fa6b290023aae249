"""Command-line experiment driver.

Subcommands::

    hybridsed rate-sweep    --config CFG [--seed S] [--out PATH] [--emit-plot-data]
    hybridsed decomp-bench  --config CFG [--seed S] [--out PATH] [--emit-plot-data]
    hybridsed channel-dump  --config CFG [--seed S] [--out PATH]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import ChannelParams, ChannelRealization, channel_from_paths, gen_channel
from .config import ExperimentConfig, load_config, trial_seed
from .decomposition import beamform_decompose, bcd_sd, omp_decompose
from .errors import ConfigurationError, NumericalError
from .evaluation import RateRecord, monte_carlo_rate
from .numerics import random_orthonormal

log = logging.getLogger("hybridsed")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DECOMP_HEADER = "d,method,mean_h0,std_h0,mean_iters"
ENTRY_HEADER = "row,col,re,im"
PATHS_HEADER = "i,beta_re,beta_im,aoa_rad,aod_rad"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_text(path: Path, text: str) -> None:
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigurationError(f"output_path: cannot write {path}: {exc.strerror}") from None


def _sibling(path: Path, suffix: str, ext: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}{ext}")


def rate_sweep_csv(records: list[RateRecord]) -> str:
    return "\n".join([RateRecord.CSV_HEADER, *(r.to_csv_row() for r in records)]) + "\n"


def run_rate_sweep(config: ExperimentConfig, out: str | Path | None = None,
                   emit_plot_data: bool = False) -> Path:
    config.validate("rate-sweep")
    path = Path(out or config.output_path)
    records = monte_carlo_rate(config)
    _write_text(path, rate_sweep_csv(records))
    if emit_plot_data:
        for scheme in config.schemes:
            rows = [f"{_fmt(r.snr_db)} {_fmt(r.mean_rate)}" for r in records if r.scheme == scheme]
            _write_text(_sibling(path, scheme, ".dat"), "\n".join(rows) + "\n")
    return path


def decomposition_bench(config: ExperimentConfig) -> list[tuple[int, str, float, float, float]]:
    """Rows ``(d, method, mean_h0, std_h0, mean_iters)`` over random orthonormal targets."""
    config.validate("decomp-bench")
    M, r = config.m_antennas, config.rf_chains
    rows = []
    for d in config.streams:
        results: dict[str, list[tuple[float, int]]] = {"bcd-sd": [], "omp": []}
        if d == 1:
            results["lemma1"] = []
        for t in range(config.trials):
            target = random_orthonormal(np.random.default_rng(trial_seed(config.master_seed, t, 1000 + d)), M, d)
            bcd = bcd_sd(target, config.bcd_max_iters, config.bcd_tol,
                         np.random.default_rng(trial_seed(config.master_seed, t, 2000 + d)),
                         warm_start=config.bcd_warm_start)
            results["bcd-sd"].append((bcd.objective, bcd.iterations))
            omp = omp_decompose(target, r=r)
            results["omp"].append((omp.objective, omp.iterations))
            if d == 1:
                results["lemma1"].append((beamform_decompose(target[:, 0]).objective, 1))
        for method in sorted(results):
            h0 = np.array([v[0] for v in results[method]])
            iters = np.array([v[1] for v in results[method]], dtype=float)
            rows.append((d, method, float(h0.mean()), float(h0.std()), float(iters.mean())))
    return rows


def run_decomp_bench(config: ExperimentConfig, out: str | Path | None = None,
                     emit_plot_data: bool = False) -> Path:
    path = Path(out or config.output_path)
    rows = decomposition_bench(config)
    lines = [DECOMP_HEADER] + [
        f"{d},{method},{_fmt(mean)},{_fmt(std)},{_fmt(iters)}" for d, method, mean, std, iters in rows
    ]
    _write_text(path, "\n".join(lines) + "\n")
    if emit_plot_data:
        for method in sorted({row[1] for row in rows}):
            data = [f"{d} {_fmt(mean)}" for d, m, mean, _, _ in rows if m == method]
            _write_text(_sibling(path, method, ".dat"), "\n".join(data) + "\n")
    return path


def dump_channel(config: ExperimentConfig, out: str | Path | None = None) -> tuple[Path, Path]:
    """Write the trial-0 channel of ``config`` as entry and path-parameter CSVs."""
    config.validate("channel-dump")
    path = Path(out or config.output_path)
    params = ChannelParams(config.m_antennas, config.n_antennas, config.paths)
    ch = gen_channel(params, np.random.default_rng(trial_seed(config.master_seed, 0, 0)))
    entries = [ENTRY_HEADER]
    for (i, j), v in np.ndenumerate(ch.h):
        entries.append(f"{i},{j},{_fmt(v.real)},{_fmt(v.imag)}")
    paths = [PATHS_HEADER]
    for i, (b, aoa, aod) in enumerate(zip(ch.path_gains, ch.aoa, ch.aod)):
        paths.append(f"{i},{_fmt(b.real)},{_fmt(b.imag)},{_fmt(aoa)},{_fmt(aod)}")
    side = _sibling(path, "paths", path.suffix or ".csv")
    _write_text(path, "\n".join(entries) + "\n")
    _write_text(side, "\n".join(paths) + "\n")
    return path, side


def read_channel_csv(path: str | Path) -> np.ndarray:
    """Rebuild the channel matrix written by :func:`dump_channel`."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="ascii")
    rows = data["row"].astype(int)
    cols = data["col"].astype(int)
    h = np.zeros((rows.max() + 1, cols.max() + 1), dtype=np.complex128)
    h[rows, cols] = data["re"] + 1j * data["im"]
    return h


def read_paths_csv(path: str | Path, num_tx: int, num_rx: int) -> ChannelRealization:
    """Rebuild a channel from its path-parameter CSV."""
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="ascii"))
    gains = data["beta_re"] + 1j * data["beta_im"]
    return channel_from_paths(num_tx, num_rx, gains, data["aoa_rad"], data["aod_rad"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridsed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("rate-sweep", "average user rate vs SNR for each scheme"),
        ("decomp-bench", "decomposition error of BCD-SD vs OMP"),
        ("channel-dump", "write one channel realization as CSV"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", default=None, help="override output_path")
        if name != "channel-dump":
            p.add_argument("--emit-plot-data", action="store_true",
                           help="also write two-column .dat files per curve")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigurationError(f"--seed must be non-negative, got {args.seed}")
            config = config.replace(master_seed=args.seed)
        if args.command == "rate-sweep":
            path = run_rate_sweep(config, args.out, args.emit_plot_data)
        elif args.command == "decomp-bench":
            path = run_decomp_bench(config, args.out, args.emit_plot_data)
        else:
            path, _ = dump_channel(config, args.out)
        log.info("wrote %s", path)
    except ConfigurationError as exc:
        print(f"hybridsed: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"hybridsed: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
