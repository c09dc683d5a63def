"""End-to-end symbol-detection experiments and the ``rclab`` command line.

Detectors
---------
``rc-td`` / ``rc-fd``
    Windowed echo-state detector whose untrained weights come from the
    time/frequency-domain configuration pipeline.  Trained per slot on the
    known time-domain waveform of the reference-signal (RS) symbol, applied
    to the whole slot, then hard-demapped in the frequency domain.
``rc-random`` / ``vanilla-esn``
    Same detection flow with randomly generated weights (``vanilla-esn``
    additionally drops the input window).
``lmmse``
    Classical baseline: least-squares channel estimates on the RS comb,
    frequency-domain LMMSE interpolation to all subcarriers (block fading
    makes the time dimension constant), per-RE linear MMSE equalization with
    bias correction, hard demapping.

Seeding
-------
Every random draw comes from a stream keyed by ``(master_seed, purpose,
slot, ...)``, so results are byte-identical across runs and across worker
counts.  ``RC_LAB_SEED`` overrides the config seed; ``--seed`` overrides both.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import configparser
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .channel import (
    AngleModel,
    MimoChannelRealization,
    PowerDelayProfile,
    apply_channel,
    classify_phase,
    draw_channel,
    load_pdp,
    sample_parametric_mimo,
    sample_tdl,
)
from .filters import Phase, UnitCircleRootError
from .ofdm import (
    OfdmNumerology,
    ReKind,
    ResourceGrid,
    RsMode,
    build_grid,
    demap_data_bits,
    ofdm_demodulate,
    ofdm_modulate,
    payload_bit_count,
    rs_time_waveform,
)
from .reservoir import ReservoirSpec, dump_spec_text, predict, train_with_delay_search
from .weight_config import (
    MimoAssembly,
    assemble_mimo,
    configure_frequency_domain_report,
    configure_time_domain_report,
    diagnostics_csv,
)
from .theory import reproduce_fig5

DETECTOR_NAMES = ("rc-td", "rc-fd", "rc-random", "vanilla-esn", "lmmse")
RC_DETECTOR_NAMES = ("rc-td", "rc-fd", "rc-random", "vanilla-esn")
LMMSE_ESTIMATION_BACKOFF = 10.0 ** (6.0 / 10.0)  # 6 dB estimation-SNR back-off

# purpose tags for seed streams
_T_CHANNEL, _T_NOISE, _T_PAYLOAD, _T_RS, _T_STATS_TD, _T_STATS_FD, _T_RANDOM, _T_VANILLA = range(8)


def _stream(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(tuple(int(k) for k in key)))


class ConfigFileError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    n_slots: int = 1
    snr_db: tuple = (20.0,)
    detectors: tuple = ("rc-td", "lmmse")
    qam_order: int = 16
    workers: int = 1
    # ofdm
    n_sc: int = 1024
    n_cp: int = 160
    n_symbols: int = 14
    rs_spacing: int = 4
    # channel
    pdp: str = "cdl_d"
    channel_mode: str = "siso"  # "siso" | "mimo"
    n_tx: int = 1
    n_rx: int = 1
    n_path: int = 20
    sector_deg: float = 60.0
    angle_offset_deg: float = 5.0
    element_spacing: float = 0.5
    require_phase: str = "any"  # "any" | "strictly_mp"
    # reservoir computing
    m: int = 5
    l_f: int = 7
    l_rp: int = 7
    n_window: int = 5
    n_neurons: int = 35
    spectral_radius: float = 0.4
    sparsity: float = 0.6
    ridge: float = 0.0
    d_max: int = 12
    activation: str = "tanh"
    input_scale: float = 1.0
    stats_n: int = 128
    stats_obs: int = 300

    def __post_init__(self):
        if not self.snr_db:
            raise ConfigFileError("snr_db list must be non-empty")
        if not self.detectors:
            raise ConfigFileError("detector list must be non-empty")
        for d in self.detectors:
            if d not in DETECTOR_NAMES:
                raise ConfigFileError(f"unknown detector {d!r}; choose from {DETECTOR_NAMES}")
        if self.channel_mode not in ("siso", "mimo"):
            raise ConfigFileError("channel mode must be 'siso' or 'mimo'")
        if self.channel_mode == "siso" and (self.n_tx != 1 or self.n_rx != 1):
            raise ConfigFileError("siso mode requires n_tx = n_rx = 1")
        if self.channel_mode == "mimo" and self.n_tx != self.n_rx:
            raise ConfigFileError("the detectors assume a square MIMO system (n_tx = n_rx)")
        if self.require_phase not in ("any", "strictly_mp"):
            raise ConfigFileError("require_phase must be 'any' or 'strictly_mp'")
        if self.n_slots < 0 or self.workers < 1:
            raise ConfigFileError("need n_slots >= 0 and workers >= 1")

    @property
    def numerology(self) -> OfdmNumerology:
        return OfdmNumerology(self.n_sc, self.n_cp)

    def load_profile(self) -> PowerDelayProfile:
        return load_pdp(self.pdp)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(path)
        if not read:
            raise ConfigFileError(f"config file not found: {path}")
        spec = {
            "experiment": {
                "seed": int,
                "n_slots": int,
                "snr_db": _float_list,
                "detectors": _name_list,
                "qam_order": int,
                "workers": int,
            },
            "ofdm": {"n_sc": int, "n_cp": int, "n_symbols": int, "rs_spacing": int},
            "channel": {
                "pdp": str,
                "mode": str,
                "n_tx": int,
                "n_rx": int,
                "n_path": int,
                "sector_deg": float,
                "angle_offset_deg": float,
                "element_spacing": float,
                "require_phase": str,
            },
            "rc": {
                "m": int,
                "l_f": int,
                "l_rp": int,
                "n_window": int,
                "n_neurons": int,
                "spectral_radius": float,
                "sparsity": float,
                "ridge": float,
                "d_max": int,
                "activation": str,
                "input_scale": float,
                "stats_n": int,
                "stats_obs": int,
            },
        }
        rename = {("channel", "mode"): "channel_mode"}
        kwargs = {}
        for section in parser.sections():
            if section not in spec:
                raise ConfigFileError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in spec[section]:
                    raise ConfigFileError(f"unknown key {key!r} in section [{section}]")
                name = rename.get((section, key), key)
                try:
                    kwargs[name] = spec[section][key](raw)
                except ValueError as exc:
                    raise ConfigFileError(f"bad value for {section}.{key}: {raw!r}") from exc
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigFileError(str(exc)) from exc
        cfg.load_profile()  # fail early if the referenced PDP is missing
        return cfg


def _float_list(raw: str):
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def _name_list(raw: str):
    return tuple(tok.strip() for tok in raw.replace(",", " ").split())


@dataclass(frozen=True)
class BerRecord:
    detector: str
    snr_db: float
    n_bits: int
    n_errors: int
    seed: int

    @property
    def ber(self) -> float:
        return self.n_errors / self.n_bits if self.n_bits else 0.0


def write_ber_csv(records, fp) -> None:
    fp.write("detector,snr_db,n_bits,n_errors,ber,seed\n")
    for r in records:
        fp.write(f"{r.detector},{r.snr_db:.10g},{r.n_bits},{r.n_errors},{r.ber:.10g},{r.seed}\n")


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------

def rc_detect(
    rx_samples: np.ndarray,
    tx_grid: ResourceGrid,
    numerology: OfdmNumerology,
    spec: ReservoirSpec,
    d_max: int,
    ridge: float = 0.0,
) -> np.ndarray:
    """Train on the RS symbol's known waveform, equalize the slot, demap.

    The readout (including its decision delay) is refitted from scratch for
    every slot; no channel estimate is ever formed.
    """
    if tx_grid.rs_symbol_index != 0:
        raise ValueError("rc_detect expects the RS symbol at slot position 0")
    rx = np.atleast_2d(np.asarray(rx_samples, dtype=np.complex128))
    sym_len = numerology.symbol_len
    target = rs_time_waveform(tx_grid, numerology)
    readout = train_with_delay_search(spec, rx[:, :sym_len], target, d_max, ridge)
    equalized = predict(spec, readout, rx)
    est = ofdm_demodulate(equalized, numerology, tx_grid.n_sym)
    return demap_data_bits(est, tx_grid.kind, tx_grid.qam_order)


def _frequency_correlation(pdp: PowerDelayProfile, n_sc: int, cols: np.ndarray) -> np.ndarray:
    """Channel frequency-correlation columns R[:, cols] from the tap powers."""
    k = np.arange(n_sc)
    steer = np.exp(-2j * np.pi * np.outer(k, pdp.delays) / n_sc)  # (n_sc, taps)
    return (steer * pdp.powers) @ steer[cols].conj().T


def _estimate_channel_freq(
    rx_grid: np.ndarray,
    tx_grid: ResourceGrid,
    pdp: PowerDelayProfile,
    noise_var: float,
) -> np.ndarray:
    """LS at RS REs + frequency-domain LMMSE interpolation, per TX-RX pair."""
    n_sc, _, n_rx = rx_grid.shape
    rs_idx = tx_grid.rs_symbol_index
    sigma_est = noise_var * LMMSE_ESTIMATION_BACKOFF
    h = np.empty((n_sc, n_rx, tx_grid.n_tx), dtype=np.complex128)
    for tx in range(tx_grid.n_tx):
        ks = np.flatnonzero(tx_grid.kind[:, rs_idx, tx] == ReKind.RS)
        if ks.size == 0:
            raise ValueError(f"no RS resource elements for antenna {tx}")
        ls = rx_grid[ks, rs_idx, :] / tx_grid.symbols[ks, rs_idx, tx][:, None]
        r_cross = _frequency_correlation(pdp, n_sc, ks)  # (n_sc, n_ks)
        r_rs = r_cross[ks] + sigma_est * np.eye(ks.size)
        coef, _, _, _ = np.linalg.lstsq(r_rs, ls, rcond=None)
        h[:, :, tx] = r_cross @ coef
    return h


def lmmse_detect(
    rx_samples: np.ndarray,
    tx_grid: ResourceGrid,
    numerology: OfdmNumerology,
    pdp: PowerDelayProfile,
    noise_var: float,
    true_channel=None,
) -> np.ndarray:
    """Estimated-CSI LMMSE symbol detection (or perfect CSI via ``true_channel``).

    ``true_channel`` short-circuits estimation with the exact per-subcarrier
    response of the given taps (SISO vector or MIMO realization).
    """
    rx = np.atleast_2d(np.asarray(rx_samples, dtype=np.complex128))
    n_sc = numerology.n_sc
    rx_grid = ofdm_demodulate(rx, numerology, tx_grid.n_sym)  # (n_sc, n_sym, n_rx)
    if true_channel is not None:
        if isinstance(true_channel, MimoChannelRealization):
            h = np.fft.fft(true_channel.taps, n_sc, axis=0)  # (n_sc, n_r, n_t)
        else:
            h = np.fft.fft(np.asarray(true_channel, dtype=np.complex128), n_sc)[:, None, None]
    else:
        h = _estimate_channel_freq(rx_grid, tx_grid, pdp, noise_var)

    # per-RE MMSE equalizer H^H (H H^H + sigma^2 I)^{-1} with bias correction
    n_rx = h.shape[1]
    gram = h @ h.conj().transpose(0, 2, 1) + noise_var * np.eye(n_rx)[None]
    y = rx_grid.transpose(0, 2, 1)  # (n_sc, n_rx, n_sym)
    x_hat = h.conj().transpose(0, 2, 1) @ np.linalg.solve(gram, y)  # (n_sc, n_tx, n_sym)
    gains = np.einsum("kij,kji->ki", h.conj().transpose(0, 2, 1), np.linalg.solve(gram, h))
    safe = np.where(np.abs(gains) > 1e-12, gains, 1.0)
    x_hat = x_hat / safe[:, :, None]
    est = x_hat.transpose(0, 2, 1)  # (n_sc, n_sym, n_tx)
    return demap_data_bits(est, tx_grid.kind, tx_grid.qam_order)


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------

def _configured_specs(cfg: ExperimentConfig) -> dict:
    """Build every reservoir the configured detector list needs (once per run)."""
    pdp = cfg.load_profile()
    specs: dict[str, ReservoirSpec] = {}
    for det in cfg.detectors:
        if det == "rc-td":
            report = configure_time_domain_report(
                pdp, cfg.stats_n, cfg.stats_obs, cfg.m, cfg.l_f, cfg.n_window,
                _stream(cfg.seed, _T_STATS_TD), activation=cfg.activation, d_out=1,
            )
            siso = report.spec
            specs[det] = (
                siso
                if cfg.channel_mode == "siso"
                else assemble_mimo([siso], cfg.n_tx, MimoAssembly.PARAMETRIC_SHARED)
            )
        elif det == "rc-fd":
            report = configure_frequency_domain_report(
                pdp, cfg.stats_n, cfg.stats_obs, cfg.m, cfg.l_rp, cfg.n_window,
                _stream(cfg.seed, _T_STATS_FD), activation=cfg.activation, d_out=1,
            )
            siso = report.spec
            specs[det] = (
                siso
                if cfg.channel_mode == "siso"
                else assemble_mimo([siso], cfg.n_tx, MimoAssembly.PARAMETRIC_SHARED)
            )
        elif det == "rc-random":
            specs[det] = random_spec(cfg, cfg.n_window, _stream(cfg.seed, _T_RANDOM))
        elif det == "vanilla-esn":
            specs[det] = random_spec(cfg, 0, _stream(cfg.seed, _T_VANILLA))
    return specs


def random_spec(cfg: ExperimentConfig, n_window: int, rng: np.random.Generator) -> ReservoirSpec:
    from .reservoir import random_reservoir

    spec = random_reservoir(
        cfg.n_neurons,
        cfg.spectral_radius,
        cfg.sparsity,
        d_in=cfg.n_rx,
        n_window=n_window,
        rng=rng,
        d_out=cfg.n_tx,
        activation=cfg.activation,
    )
    if cfg.input_scale != 1.0:
        spec = ReservoirSpec(
            w_in=cfg.input_scale * spec.w_in,
            w_res=spec.w_res,
            activation=spec.activation,
            n_window=spec.n_window,
            d_out=spec.d_out,
            explicit_skip=spec.explicit_skip,
        )
    return spec


def _draw_slot_channel(cfg: ExperimentConfig, pdp: PowerDelayProfile, slot: int):
    rng = _stream(cfg.seed, _T_CHANNEL, slot)
    if cfg.channel_mode == "mimo":
        model = AngleModel(
            sector=(-np.deg2rad(cfg.sector_deg), np.deg2rad(cfg.sector_deg)),
            offset_scale=np.deg2rad(cfg.angle_offset_deg),
            spacing_over_wavelength=cfg.element_spacing,
        )
        return sample_parametric_mimo(pdp, model, cfg.n_tx, cfg.n_rx, cfg.n_path, rng)
    require = Phase.STRICTLY_MP if cfg.require_phase == "strictly_mp" else None
    h, _ = draw_channel(pdp, rng, require=require)
    return h


def _slot_errors(cfg: ExperimentConfig, specs: dict, slot: int) -> dict:
    """Error/bit counts for one slot: ``{(detector, snr_index): (errors, bits)}``."""
    pdp = cfg.load_profile()
    num = cfg.numerology
    ch = _draw_slot_channel(cfg, pdp, slot)
    bits = _stream(cfg.seed, _T_PAYLOAD, slot).integers(
        0, 2, payload_bit_count(cfg.n_sc, cfg.n_symbols, cfg.n_tx, cfg.qam_order)
    )
    rc_dets = [d for d in cfg.detectors if d in RC_DETECTOR_NAMES]
    use_lmmse = "lmmse" in cfg.detectors
    grids = {}
    if rc_dets:
        grids["learning"] = build_grid(
            num, cfg.n_tx, cfg.n_symbols, cfg.rs_spacing, RsMode.LEARNING,
            bits, _stream(cfg.seed, _T_RS, slot, 0), order=cfg.qam_order,
        )
    if use_lmmse:
        grids["conventional"] = build_grid(
            num, cfg.n_tx, cfg.n_symbols, cfg.rs_spacing, RsMode.CONVENTIONAL,
            bits, _stream(cfg.seed, _T_RS, slot, 1), order=cfg.qam_order,
        )
    tx = {name: ofdm_modulate(g, num) for name, g in grids.items()}

    out = {}
    for si, snr in enumerate(cfg.snr_db):
        received = {}
        for mode_idx, name in enumerate(("learning", "conventional")):
            if name in tx:
                x = tx[name] if cfg.channel_mode == "mimo" else tx[name][0]
                y, nv = apply_channel(
                    ch, x, snr, _stream(cfg.seed, _T_NOISE, slot, si, mode_idx),
                    return_noise_var=True,
                )
                received[name] = (np.atleast_2d(y), nv)
        for det in cfg.detectors:
            if det == "lmmse":
                y, nv = received["conventional"]
                est = lmmse_detect(y, grids["conventional"], num, pdp, nv)
            else:
                y, _ = received["learning"]
                est = rc_detect(y, grids["learning"], num, specs[det], cfg.d_max, cfg.ridge)
            out[(det, si)] = (int(np.count_nonzero(est != bits)), int(bits.size))
    return out


def run_ber_experiment(cfg: ExperimentConfig) -> list:
    """Monte-Carlo BER sweep over block-fading slots; deterministic per seed.

    Slot tasks are independent and keyed by ``(seed, slot)``, so worker-count
    changes reorder only the (exact, integer) accumulation and the output is
    byte-identical for any ``workers`` setting.
    """
    specs = _configured_specs(cfg)
    totals = {(det, si): [0, 0] for det in cfg.detectors for si in range(len(cfg.snr_db))}
    if cfg.n_slots > 0:
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(
                    pool.map(_slot_errors, *zip(*[(cfg, specs, s) for s in range(cfg.n_slots)]))
                )
        else:
            results = [_slot_errors(cfg, specs, s) for s in range(cfg.n_slots)]
        for res in results:
            for key, (err, nbits) in res.items():
                totals[key][0] += err
                totals[key][1] += nbits
    records = []
    for det in cfg.detectors:
        for si, snr in enumerate(cfg.snr_db):
            err, nbits = totals[(det, si)]
            records.append(
                BerRecord(detector=det, snr_db=snr, n_bits=nbits, n_errors=err, seed=cfg.seed)
            )
    return records


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------

def _resolve_seed(args, cfg_seed: int) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("RC_LAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigFileError(f"RC_LAB_SEED must be an integer, got {env!r}") from exc
    return cfg_seed


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline="\n"), True


def _write_to(path, writer) -> None:
    fp, close = _open_out(path)
    try:
        writer(fp)
    finally:
        if close:
            fp.close()


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    cfg = replace(cfg, seed=_resolve_seed(args, cfg.seed))
    if getattr(args, "workers", None):
        cfg = replace(cfg, workers=args.workers)
    return cfg


def cmd_run_ber(args) -> int:
    cfg = _load_config(args)
    records = run_ber_experiment(cfg)
    _write_to(args.out, lambda fp: write_ber_csv(records, fp))
    return 0


def cmd_validate_theorem(args) -> int:
    m_values = [int(tok) for tok in args.m.split(",") if tok]
    if not m_values:
        raise ConfigFileError("--m must list at least one subspace size")
    pdp = load_pdp(args.pdp)
    seed = _resolve_seed(args, 0)
    report = reproduce_fig5(pdp, args.n, args.nobs, m_values, seed)
    _write_to(args.out, report.write_csv)
    return 0


def cmd_configure(args) -> int:
    cfg = _load_config(args)
    pdp = cfg.load_profile()
    if args.method == "td":
        report = configure_time_domain_report(
            pdp, cfg.stats_n, cfg.stats_obs, cfg.m, cfg.l_f, cfg.n_window,
            _stream(cfg.seed, _T_STATS_TD), activation=cfg.activation,
        )
    else:
        report = configure_frequency_domain_report(
            pdp, cfg.stats_n, cfg.stats_obs, cfg.m, cfg.l_rp, cfg.n_window,
            _stream(cfg.seed, _T_STATS_FD), activation=cfg.activation,
        )
    _write_to(args.out, lambda fp: fp.write(dump_spec_text(report.spec)))
    if args.diagnostics:
        _write_to(args.diagnostics, lambda fp: diagnostics_csv(report.diagnostics, fp))
    return 0


def cmd_inspect_channel(args) -> int:
    pdp = load_pdp(args.pdp)
    rng = _stream(_resolve_seed(args, 0), _T_CHANNEL)
    counts = {p.value: 0 for p in Phase}
    ring_hits = 0
    for _ in range(args.draws):
        for _ in range(100):
            try:
                counts[classify_phase(sample_tdl(pdp, rng)).value] += 1
                break
            except UnitCircleRootError:
                ring_hits += 1
        else:
            raise UnitCircleRootError("resample budget exhausted; profile degenerate")

    def writer(fp):
        fp.write("classification,count,fraction\n")
        for name, count in counts.items():
            fp.write(f"{name},{count},{count / args.draws:.10g}\n")
        fp.write(f"ring_resampled,{ring_hits},{ring_hits / args.draws:.10g}\n")

    _write_to(args.out, writer)
    return 0


def cmd_dump_spec(args) -> int:
    cfg = _load_config(args)
    pdp = cfg.load_profile()
    if args.method == "td":
        report = configure_time_domain_report(
            pdp, cfg.stats_n, cfg.stats_obs, cfg.m, cfg.l_f, cfg.n_window,
            _stream(cfg.seed, _T_STATS_TD), activation=cfg.activation,
        )
        order = cfg.l_f
    else:
        report = configure_frequency_domain_report(
            pdp, cfg.stats_n, cfg.stats_obs, cfg.m, cfg.l_rp, cfg.n_window,
            _stream(cfg.seed, _T_STATS_FD), activation=cfg.activation,
        )
        order = cfg.l_rp

    def writer(fp):
        spec = report.spec
        fp.write(f"profile            : {pdp.label or cfg.pdp}\n")
        fp.write(f"method             : {args.method}\n")
        fp.write(f"neurons            : {spec.n_neurons} ({cfg.m} columns x {order} sections)\n")
        fp.write(f"window length      : {spec.n_window}\n")
        fp.write(f"activation         : {spec.activation}\n")
        fp.write(f"max pole magnitude : {np.max(np.abs(report.poles)):.6f}\n")
        fp.write("neuron  pole (mag, phase deg)        input weight (mag, phase deg)\n")
        for i, (p, c) in enumerate(zip(report.poles, report.input_weights)):
            fp.write(
                f"{i:>6}  ({np.abs(p):8.5f}, {np.degrees(np.angle(p)):8.2f})"
                f"        ({np.abs(c):10.5f}, {np.degrees(np.angle(c)):8.2f})\n"
            )
        fp.write("column  offset b_m   reduction error   reflected poles\n")
        for d in report.diagnostics:
            fp.write(
                f"{d.m:>6}  {d.offset:10.5g}   {d.reduce_order_error:15.5g}   {d.n_reflected_poles}\n"
            )

    _write_to(args.out, writer)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rclab",
        description="Reservoir-computing symbol detection experiments",
    )
    parser.add_argument("--version", action="version", version=f"rclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run-ber", help="Monte-Carlo BER sweep from a config file")
    run.add_argument("--config", required=True, help="experiment config file (ini-style)")
    run.add_argument("--out", help="output CSV path (default: stdout)")
    run.add_argument("--seed", type=int, help="override the config/environment seed")
    run.add_argument("--workers", type=int, help="parallel slot workers")
    run.set_defaults(func=cmd_run_ber)

    val = sub.add_parser("validate-theorem", help="numerical vs closed-form error curves")
    val.add_argument("--n", type=int, required=True, help="equalizer response length")
    val.add_argument("--nobs", type=int, required=True, help="number of channel draws")
    val.add_argument("--m", required=True, help="comma-separated subspace sizes")
    val.add_argument("--seed", type=int, help="master seed (default 0)")
    val.add_argument("--pdp", default="cdl_d", help="PDP file or packaged profile name")
    val.add_argument("--out", help="output CSV path (default: stdout)")
    val.set_defaults(func=cmd_validate_theorem)

    conf = sub.add_parser("configure", help="emit a configured reservoir dump")
    conf.add_argument("--config", required=True)
    conf.add_argument("--method", choices=("td", "fd"), default="td")
    conf.add_argument("--out", help="spec dump path (default: stdout)")
    conf.add_argument("--diagnostics", help="per-column diagnostics CSV path")
    conf.add_argument("--seed", type=int)
    conf.set_defaults(func=cmd_configure)

    insp = sub.add_parser("inspect-channel", help="phase classification histogram")
    insp.add_argument("--pdp", required=True)
    insp.add_argument("--draws", type=int, default=1000)
    insp.add_argument("--seed", type=int)
    insp.add_argument("--out", help="output CSV path (default: stdout)")
    insp.set_defaults(func=cmd_inspect_channel)

    dump = sub.add_parser("dump-spec", help="human-readable configured reservoir")
    dump.add_argument("--config", required=True)
    dump.add_argument("--method", choices=("td", "fd"), default="td")
    dump.add_argument("--out", help="output path (default: stdout)")
    dump.add_argument("--seed", type=int)
    dump.set_defaults(func=cmd_dump_spec)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigFileError, FileNotFoundError, ValueError) as exc:
        print(f"rclab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
