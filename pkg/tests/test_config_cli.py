import subprocess
import sys

import numpy as np
import pytest

from hybridsed.channel import ChannelParams, gen_channel
from hybridsed.cli import (
    DECOMP_HEADER,
    EXIT_CONFIG,
    EXIT_OK,
    decomposition_bench,
    main,
    read_channel_csv,
    read_paths_csv,
)
from hybridsed.config import ExperimentConfig, format_config, load_config, parse_config, trial_seed
from hybridsed.errors import ConfigurationError
from hybridsed.estimation import EchoVariant
from hybridsed.evaluation import RateRecord

SWEEP = """\
name = tiny
m_antennas = 16
n_antennas = 8
rf_chains = 4
streams = 2
paths = 4
arnoldi_steps = 4
snr_db = -10:10:10
trials = 2
master_seed = 5
bcd_max_iters = 100
"""


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_values(self):
        cfg = parse_config(SWEEP)
        assert (cfg.m_antennas, cfg.n_antennas, cfg.rf_chains) == (16, 8, 4)
        assert cfg.streams == (2,)
        assert cfg.snr_db == (-10.0, 0.0, 10.0)
        assert cfg.mode is EchoVariant.HYBRID_RAID

    def test_lists_and_comments(self):
        cfg = parse_config("# header\nsnr_db = 1.5, 3\nschemes = ideal-digital, sed-digital  # two\n")
        assert cfg.snr_db == (1.5, 3.0)
        assert cfg.schemes == ("ideal-digital", "sed-digital")

    def test_round_trip(self):
        cfg = parse_config(SWEEP).replace(echo_noise=True, bcd_tol=1e-7)
        assert parse_config(format_config(cfg)) == cfg

    @pytest.mark.parametrize("text,field", [
        ("bogus = 1", "bogus"),
        ("trials = many", "trials"),
        ("mode = analog", "mode"),
        ("echo_noise = maybe", "echo_noise"),
        ("snr_db = 5:1:0", "snr_db"),
    ])
    def test_bad_values_name_field(self, text, field):
        with pytest.raises(ConfigurationError, match=field):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.cfg")


class TestValidate:
    base = parse_config(SWEEP)

    @pytest.mark.parametrize("changes,field", [
        ({"streams": (0,)}, "streams"),
        ({"streams": (5,)}, "streams"),
        ({"rf_chains": 3}, "rf_chains"),
        ({"rf_chains": 16}, "rf_chains"),
        ({"trials": 0}, "trials"),
        ({"paths": 9}, "paths"),
        ({"arnoldi_steps": 1}, "arnoldi_steps"),
        ({"schemes": ("magic",)}, "schemes"),
        ({"streams": (1, 2)}, "streams"),
        ({"sounding_metric": "l1"}, "sounding_metric"),
    ])
    def test_rate_sweep_rejects(self, changes, field):
        with pytest.raises(ConfigurationError, match=field):
            self.base.replace(**changes).validate("rate-sweep")

    def test_digital_only_allows_indivisible_chains(self):
        cfg = self.base.replace(rf_chains=3, mode="digital", schemes=("sed-digital", "ideal-digital"))
        cfg.validate("rate-sweep")

    def test_bench_rejects_zero_streams(self):
        with pytest.raises(ConfigurationError, match="streams"):
            ExperimentConfig(m_antennas=64, rf_chains=10, streams=(0,)).validate("decomp-bench")


class TestSeeds:
    def test_trial_seed_stable(self):
        a = np.random.default_rng(trial_seed(7, 3)).standard_normal(4)
        b = np.random.default_rng(trial_seed(7, 3)).standard_normal(4)
        c = np.random.default_rng(trial_seed(7, 4)).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestRateSweepCli:
    def test_writes_csv(self, tmp_path):
        cfg = write(tmp_path, SWEEP)
        out = tmp_path / "rates.csv"
        assert main(["rate-sweep", "--config", str(cfg), "--out", str(out), "--emit-plot-data"]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == RateRecord.CSV_HEADER
        assert len(lines) == 1 + 3 * 4
        dat = (tmp_path / "rates_ideal-digital.dat").read_text().split()
        assert len(dat) == 6

    def test_byte_identical(self, tmp_path):
        cfg = write(tmp_path, SWEEP)
        outs = [tmp_path / f"run{k}.csv" for k in range(2)]
        for out in outs:
            main(["rate-sweep", "--config", str(cfg), "--out", str(out)])
        assert outs[0].read_bytes() == outs[1].read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, SWEEP)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["rate-sweep", "--config", str(cfg), "--out", str(a)])
        main(["rate-sweep", "--config", str(cfg), "--out", str(b), "--seed", "6"])
        assert a.read_text() != b.read_text()

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, SWEEP.replace("rf_chains = 4", "rf_chains = 3"))
        assert main(["rate-sweep", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
        assert "rf_chains" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path):
        cfg = write(tmp_path, SWEEP.replace("trials = 2", "trials = 1"))
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["channel-dump", "--config", str(cfg), "--out", str(blocker / "x.csv")]) == EXIT_CONFIG

    def test_module_entry_point(self, tmp_path):
        cfg = write(tmp_path, "streams = 0\nm_antennas = 8\nrf_chains = 2\n")
        proc = subprocess.run([sys.executable, "-m", "hybridsed", "decomp-bench", "--config", str(cfg)],
                              capture_output=True, text=True)
        assert proc.returncode == EXIT_CONFIG
        assert "streams" in proc.stderr


class TestDecompBench:
    def test_rows_and_lemma_agreement(self, tmp_path):
        cfg = write(tmp_path, "m_antennas = 64\nrf_chains = 10\nstreams = 1, 2\ntrials = 5\n")
        out = tmp_path / "bench.csv"
        assert main(["decomp-bench", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == DECOMP_HEADER
        rows = {(int(d), m): float(h) for d, m, h, *_ in (ln.split(",") for ln in lines[1:])}
        assert set(rows) == {(1, "bcd-sd"), (1, "lemma1"), (1, "omp"), (2, "bcd-sd"), (2, "omp")}
        assert abs(rows[(1, "bcd-sd")] - rows[(1, "lemma1")]) < 1e-6
        assert rows[(2, "bcd-sd")] < rows[(2, "omp")]

    def test_omp_runs_r_iterations(self):
        rows = decomposition_bench(ExperimentConfig(m_antennas=32, rf_chains=6, streams=(2,), trials=2))
        omp = [r for r in rows if r[1] == "omp"][0]
        assert omp[4] == 6


class TestChannelDump:
    def test_entry_count(self, tmp_path):
        cfg = write(tmp_path, "m_antennas = 4\nn_antennas = 2\npaths = 1\n")
        out = tmp_path / "ch.csv"
        assert main(["channel-dump", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "row,col,re,im" and len(lines) == 1 + 8
        assert (tmp_path / "ch_paths.csv").read_text().startswith("i,beta_re,beta_im,aoa_rad,aod_rad\n")

    def test_round_trip_bit_exact(self, tmp_path):
        cfg = write(tmp_path, "m_antennas = 16\nn_antennas = 8\npaths = 3\nmaster_seed = 11\n")
        out = tmp_path / "ch.csv"
        main(["channel-dump", "--config", str(cfg), "--out", str(out)])
        expected = gen_channel(ChannelParams(16, 8, 3), np.random.default_rng(trial_seed(11, 0, 0)))
        np.testing.assert_array_equal(read_channel_csv(out), expected.h)
        rebuilt = read_paths_csv(tmp_path / "ch_paths.csv", 16, 8)
        np.testing.assert_array_equal(rebuilt.h, expected.h)

    def test_rank_one_reload(self, tmp_path):
        cfg = write(tmp_path, "m_antennas = 8\nn_antennas = 4\npaths = 1\n")
        out = tmp_path / "ch.csv"
        main(["channel-dump", "--config", str(cfg), "--out", str(out)])
        s = np.linalg.svd(read_channel_csv(out), compute_uv=False)
        assert np.count_nonzero(s > 1e-9 * s[0]) == 1
