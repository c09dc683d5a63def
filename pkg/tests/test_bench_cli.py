import io
import subprocess
import sys

import numpy as np
import pytest

from rclab import bench_cli as bc
from rclab.channel import (
    AngleModel,
    PowerDelayProfile,
    apply_channel,
    load_pdp,
    sample_parametric_mimo,
)
from rclab.ofdm import OfdmNumerology, RsMode, build_grid, ofdm_modulate, payload_bit_count
from rclab.reservoir import random_reservoir


CONFIG_TEXT = """
[experiment]
seed = 11
n_slots = 2
snr_db = 15, 25
detectors = rc-td, lmmse
qam_order = 16

[ofdm]
n_sc = 256
n_cp = 32
n_symbols = 6
rs_spacing = 4

[channel]
pdp = cdl_d
mode = siso
require_phase = strictly_mp

[rc]
m = 3
l_f = 3
n_window = 3
d_max = 6
ridge = 1e-6
stats_n = 48
stats_obs = 80
"""


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "exp.ini"
    p.write_text(CONFIG_TEXT)
    return p


class TestExperimentConfig:
    def test_from_file(self, config_file):
        cfg = bc.ExperimentConfig.from_file(config_file)
        assert cfg.seed == 11
        assert cfg.snr_db == (15.0, 25.0)
        assert cfg.detectors == ("rc-td", "lmmse")
        assert cfg.n_sc == 256 and cfg.rs_spacing == 4
        assert cfg.require_phase == "strictly_mp"
        assert cfg.ridge == 1e-6

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[experiment]\nbogus = 1\n")
        with pytest.raises(bc.ConfigFileError, match="bogus"):
            bc.ExperimentConfig.from_file(p)

    def test_unknown_section(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[nope]\na = 1\n")
        with pytest.raises(bc.ConfigFileError, match="nope"):
            bc.ExperimentConfig.from_file(p)

    def test_bad_value(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[experiment]\nseed = abc\n")
        with pytest.raises(bc.ConfigFileError):
            bc.ExperimentConfig.from_file(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(bc.ConfigFileError):
            bc.ExperimentConfig.from_file(tmp_path / "nope.ini")

    def test_unknown_detector(self):
        with pytest.raises(bc.ConfigFileError):
            bc.ExperimentConfig(detectors=("zf",))

    def test_empty_snr(self):
        with pytest.raises(bc.ConfigFileError):
            bc.ExperimentConfig(snr_db=())

    def test_mimo_must_be_square(self):
        with pytest.raises(bc.ConfigFileError):
            bc.ExperimentConfig(channel_mode="mimo", n_tx=4, n_rx=2)


def detect_setup(n_sc=64, n_cp=8, n_sym=4, n_tx=1, mode=RsMode.LEARNING, seed=0, order=16):
    num = OfdmNumerology(n_sc, n_cp)
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, payload_bit_count(n_sc, n_sym, n_tx, order))
    grid = build_grid(num, n_tx, n_sym, 4, mode, bits, rng, order=order)
    tx = ofdm_modulate(grid, num)
    return num, grid, bits, tx


class TestRcDetect:
    def test_identity_channel_noiseless(self):
        num, grid, bits, tx = detect_setup()
        spec = random_reservoir(8, 0.4, 0.5, 1, 2, np.random.default_rng(1), activation="tanh")
        est = bc.rc_detect(tx, grid, num, spec, d_max=4)
        assert np.count_nonzero(est != bits) == 0

    def test_noise_only_input_is_chance_level(self):
        num, grid, bits, tx = detect_setup(n_sc=256, n_sym=12)
        rng = np.random.default_rng(2)
        noise = (rng.standard_normal(tx.shape) + 1j * rng.standard_normal(tx.shape)) / np.sqrt(2)
        spec = random_reservoir(8, 0.4, 0.5, 1, 2, np.random.default_rng(3))
        est = bc.rc_detect(noise, grid, num, spec, d_max=4)
        ber = np.count_nonzero(est != bits) / bits.size
        assert bits.size >= 10_000
        assert abs(ber - 0.5) < 0.05

    def test_rs_symbol_position_checked(self):
        num = OfdmNumerology(64, 8)
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, payload_bit_count(64, 4, 1, 16))
        grid = build_grid(num, 1, 4, 4, RsMode.LEARNING, bits, rng, rs_symbol=1)
        spec = random_reservoir(4, 0.4, 0.5, 1, 1, rng)
        with pytest.raises(ValueError):
            bc.rc_detect(np.zeros((1, 4 * 72)), grid, num, spec, d_max=2)


class TestLmmseDetect:
    def test_dense_rs_noiseless_exact(self):
        num, grid, bits, tx = detect_setup()
        h = np.array([1.0, 0.4 - 0.2j, 0.1j])
        # interpolation uses the operating profile: same delay support as h
        pdp = PowerDelayProfile.from_linear([0, 1, 2], [1.0, 0.2, 0.01])
        grid_dense = build_grid(num, 1, 4, 1, RsMode.CONVENTIONAL,
                                bits, np.random.default_rng(6), order=16)
        tx_dense = ofdm_modulate(grid_dense, num)
        y = apply_channel(h, tx_dense[0], None, None)
        est = bc.lmmse_detect(y[None, :], grid_dense, num, pdp, 0.0)
        assert np.count_nonzero(est != bits) == 0

    def test_mimo_orthogonal_combs_noiseless(self):
        # 256/(4*4) = 16 RS observations per antenna pair >= 13 channel taps
        num, grid, bits, tx = detect_setup(n_sc=256, n_cp=16, n_sym=4, n_tx=4,
                                           mode=RsMode.CONVENTIONAL, seed=7)
        pdp = load_pdp("cdl_d")
        ch = sample_parametric_mimo(pdp, AngleModel(), 4, 4, 20, np.random.default_rng(8))
        y = apply_channel(ch, tx, None, None)
        est = bc.lmmse_detect(y, grid, num, pdp, 0.0)
        assert np.count_nonzero(est != bits) == 0

    def test_perfect_csi_flat_awgn(self):
        num, grid, bits, tx = detect_setup(n_sc=256, n_sym=6, seed=9)
        h = np.array([1.0 + 0j])
        y, nv = apply_channel(h, tx[0], 14.0, np.random.default_rng(10), return_noise_var=True)
        est = bc.lmmse_detect(y[None, :], grid, num, load_pdp("flat"), nv, true_channel=h)
        ber = np.count_nonzero(est != bits) / bits.size
        assert 0.0005 < ber < 0.02  # loose sanity bracket at 14 dB

    def test_missing_rs_detected(self):
        num, grid, bits, tx = detect_setup(mode=RsMode.LEARNING, n_tx=2, n_sc=64)
        # learning grids share one comb: antenna 1's comb is fine, but wipe it
        grid.kind[:, 0, :] = 0
        with pytest.raises(ValueError, match="no RS"):
            bc.lmmse_detect(tx, grid, num, load_pdp("flat"), 0.0)


class TestRunBerExperiment:
    def test_zero_slots(self):
        cfg = bc.ExperimentConfig(n_slots=0, detectors=("lmmse",), n_sc=64, n_cp=8,
                                  n_symbols=4, stats_n=32, stats_obs=10)
        records = bc.run_ber_experiment(cfg)
        assert len(records) == 1
        assert records[0].n_bits == 0 and records[0].ber == 0.0

    def test_byte_identical_reruns_and_workers(self):
        cfg = bc.ExperimentConfig(
            seed=5, n_slots=3, snr_db=(18.0,), detectors=("rc-random", "lmmse"),
            n_sc=64, n_cp=8, n_symbols=4, rs_spacing=4, pdp="cdl_d",
            n_neurons=8, n_window=2, d_max=3, ridge=1e-6, stats_n=32, stats_obs=20,
        )
        outputs = []
        for workers in (1, 1, 3):
            import dataclasses

            c = dataclasses.replace(cfg, workers=workers)
            buf = io.StringIO()
            bc.write_ber_csv(bc.run_ber_experiment(c), buf)
            outputs.append(buf.getvalue())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_records_consistent(self):
        cfg = bc.ExperimentConfig(
            seed=2, n_slots=1, snr_db=(10.0, 20.0), detectors=("lmmse",),
            n_sc=64, n_cp=8, n_symbols=4, stats_n=32, stats_obs=10,
        )
        records = bc.run_ber_experiment(cfg)
        assert [r.snr_db for r in records] == [10.0, 20.0]
        for r in records:
            assert r.ber == r.n_errors / r.n_bits
            assert r.seed == 2

    def test_ber_monotone_in_snr(self):
        # +10 dB never hurts, per detector, median over seeds (MP channels)
        bers = {}
        for seed in range(3):
            cfg = bc.ExperimentConfig(
                seed=seed, n_slots=2, snr_db=(15.0, 25.0), detectors=("rc-random", "lmmse"),
                n_sc=256, n_cp=16, n_symbols=8, rs_spacing=4, pdp="cdl_d",
                require_phase="strictly_mp", n_neurons=16, n_window=3, d_max=6,
                ridge=1e-6, input_scale=0.3, stats_n=32, stats_obs=20,
            )
            for r in bc.run_ber_experiment(cfg):
                bers.setdefault((r.detector, r.snr_db), []).append(r.ber)
        for det in ("rc-random", "lmmse"):
            assert np.median(bers[(det, 25.0)]) <= np.median(bers[(det, 15.0)])

    def test_grid_mode_wiring(self):
        # with orthogonal (conventional) combs a noiseless 4x4 system is
        # exactly estimable; a cross-wired learning grid would interfere
        cfg = bc.ExperimentConfig(
            seed=3, n_slots=1, snr_db=(300.0,), detectors=("lmmse",),
            channel_mode="mimo", n_tx=4, n_rx=4, n_path=20,
            n_sc=256, n_cp=16, n_symbols=4, rs_spacing=4, stats_n=32, stats_obs=10,
        )
        (record,) = bc.run_ber_experiment(cfg)
        assert record.n_errors == 0


class TestCli:
    def test_unknown_flag_exits_2(self):
        assert bc.main(["run-ber", "--config", "x", "--bogus"]) == 2

    def test_missing_subcommand_exits_2(self):
        assert bc.main([]) == 2

    def test_missing_config_is_runtime_error(self, tmp_path):
        assert bc.main(["run-ber", "--config", str(tmp_path / "nope.ini")]) == 1

    def test_validate_theorem(self, tmp_path):
        out = tmp_path / "curves.csv"
        rc = bc.main([
            "validate-theorem", "--n", "48", "--nobs", "60",
            "--m", "1,4,16,48", "--seed", "7", "--out", str(out),
        ])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "M,numerical_normalized,theoretical_normalized"
        assert len(lines) == 5
        for ln in lines[1:]:
            _, num, theo = ln.split(",")
            assert abs(float(num) - float(theo)) <= 1e-8

    def test_run_ber_csv(self, config_file, tmp_path):
        out = tmp_path / "ber.csv"
        rc = bc.main(["run-ber", "--config", str(config_file), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "detector,snr_db,n_bits,n_errors,ber,seed"
        assert len(lines) == 1 + 2 * 2

    def test_seed_precedence(self, config_file, tmp_path, monkeypatch):
        out1, out2, out3 = (tmp_path / f"{i}.csv" for i in range(3))
        monkeypatch.setenv("RC_LAB_SEED", "77")
        bc.main(["run-ber", "--config", str(config_file), "--out", str(out1)])
        assert ",77\n" in out1.read_text()
        bc.main(["run-ber", "--config", str(config_file), "--out", str(out2), "--seed", "5"])
        assert ",5\n" in out2.read_text()
        monkeypatch.delenv("RC_LAB_SEED")
        bc.main(["run-ber", "--config", str(config_file), "--out", str(out3)])
        assert ",11\n" in out3.read_text()

    def test_bad_env_seed(self, config_file, monkeypatch):
        monkeypatch.setenv("RC_LAB_SEED", "not-an-int")
        assert bc.main(["run-ber", "--config", str(config_file)]) == 1

    def test_inspect_channel(self, tmp_path):
        out = tmp_path / "phases.csv"
        rc = bc.main(["inspect-channel", "--pdp", "mixed_3tap", "--draws", "200",
                      "--seed", "3", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "classification,count,fraction"
        counts = {ln.split(",")[0]: int(ln.split(",")[1]) for ln in lines[1:]}
        assert counts["strictly_mp"] + counts["strictly_nmp"] + counts["mixed"] == 200
        assert counts["mixed"] > 0

    def test_configure_and_dump(self, config_file, tmp_path):
        spec_out = tmp_path / "spec.txt"
        diag_out = tmp_path / "diag.csv"
        rc = bc.main(["configure", "--config", str(config_file), "--method", "td",
                      "--out", str(spec_out), "--diagnostics", str(diag_out)])
        assert rc == 0
        assert spec_out.read_text().startswith("neuron_index,")
        assert diag_out.read_text().startswith("m,b_m,")
        dump_out = tmp_path / "dump.txt"
        rc = bc.main(["dump-spec", "--config", str(config_file), "--method", "fd",
                      "--out", str(dump_out)])
        assert rc == 0
        text = dump_out.read_text()
        assert "neurons" in text and "max pole magnitude" in text

    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "c.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "rclab", "validate-theorem", "--n", "16",
             "--nobs", "10", "--m", "1,16", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert out.read_text().startswith("M,")
