"""Frequency-selective channel generation and normalization.

Channels are tapped delay lines driven by a power delay profile (PDP).
Receiver automatic gain control is modeled as per-realization normalization
``||h||_2 = 1``, which removes path loss and shadowing from the problem.
MIMO realizations use the parametric form ``H_l = sum_q c_q a_r a_t^T / sqrt(N_p)``
built from uniform-linear-array steering vectors.

PDP file format: one tap per line as ``delay_samples power_db``, ``#`` comments,
optional header line ``k_factor_db <value>`` (Rician K applied to tap 0).
Coincident delays are merged (linear power sum) and powers renormalized.
"""

import importlib.resources
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.signal

from .filters import Phase, UnitCircleRootError, factorize_by_phase
from .signal_core import as_complex_seq

MAX_PHASE_RETRIES = 100


@dataclass(frozen=True)
class PowerDelayProfile:
    """Average tap powers of a multipath channel on the sample grid.

    ``delays`` are integer sample indices (strictly ascending, first = 0) and
    ``powers`` are linear weights summing to one.  ``k_factor`` is an optional
    linear Rician K applied to tap 0 (deterministic line-of-sight component).
    """

    delays: np.ndarray
    powers: np.ndarray
    k_factor: float | None = None
    label: str = ""

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=np.int64).ravel()
        p = np.asarray(self.powers, dtype=np.float64).ravel()
        if d.size == 0 or d.size != p.size:
            raise ValueError("delays and powers must be non-empty and equal length")
        if d[0] != 0:
            raise ValueError("first tap delay must be 0")
        if np.any(np.diff(d) <= 0):
            raise ValueError("delays must be strictly ascending")
        if np.any(p <= 0):
            raise ValueError("tap powers must be positive")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("tap powers must sum to 1 (use from_linear to normalize)")
        if self.k_factor is not None and self.k_factor < 0:
            raise ValueError("k_factor must be non-negative")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "powers", p)

    @property
    def n_taps(self) -> int:
        return int(self.delays.size)

    @property
    def length(self) -> int:
        """Impulse-response length in samples (last delay + 1)."""
        return int(self.delays[-1]) + 1

    @classmethod
    def from_linear(cls, delays, powers, k_factor=None, label="") -> "PowerDelayProfile":
        """Build from unnormalized linear powers, merging coincident delays."""
        d = np.asarray(delays, dtype=np.int64).ravel()
        p = np.asarray(powers, dtype=np.float64).ravel()
        merged: dict[int, float] = {}
        for di, pi in zip(d, p):
            merged[int(di)] = merged.get(int(di), 0.0) + float(pi)
        keys = sorted(merged)
        pw = np.array([merged[k] for k in keys], dtype=np.float64)
        return cls(
            delays=np.array(keys, dtype=np.int64),
            powers=pw / pw.sum(),
            k_factor=k_factor,
            label=label,
        )

    @classmethod
    def from_file(cls, path) -> "PowerDelayProfile":
        """Parse the ``delay_samples power_db`` text format described above."""
        text = Path(path).read_text()
        k_factor = None
        delays, powers_db = [], []
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "k_factor_db":
                if len(parts) != 2:
                    raise ValueError(f"{path}:{ln}: malformed k_factor_db line")
                k_factor = 10.0 ** (float(parts[1]) / 10.0)
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{ln}: expected 'delay_samples power_db'")
            delays.append(int(float(parts[0])))
            powers_db.append(float(parts[1]))
        if not delays:
            raise ValueError(f"{path}: no taps found")
        powers = 10.0 ** (np.asarray(powers_db) / 10.0)
        return cls.from_linear(delays, powers, k_factor=k_factor, label=Path(path).stem)


def load_pdp(name_or_path) -> PowerDelayProfile:
    """Load a PDP from a filesystem path or a profile shipped with the package.

    Bare names (``cdl_d``, ``cdl_e.pdp``, ...) resolve against the packaged
    profile directory.
    """
    p = Path(name_or_path)
    if p.exists():
        return PowerDelayProfile.from_file(p)
    name = p.name if p.name.endswith(".pdp") else p.name + ".pdp"
    resource = importlib.resources.files("rclab").joinpath("data", name)
    if resource.is_file():
        with importlib.resources.as_file(resource) as fp:
            return PowerDelayProfile.from_file(fp)
    raise FileNotFoundError(f"no PDP file or packaged profile named {name_or_path!r}")


def packaged_profiles() -> list[str]:
    data = importlib.resources.files("rclab").joinpath("data")
    return sorted(f.name[: -len(".pdp")] for f in data.iterdir() if f.name.endswith(".pdp"))


def normalize_agc(h_raw) -> np.ndarray:
    """Scale taps to unit Euclidean norm (receiver AGC model)."""
    h = as_complex_seq(h_raw, "h_raw")
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return h / norm


def _raw_taps(pdp: PowerDelayProfile, rng: np.random.Generator) -> np.ndarray:
    """Draw unnormalized taps: circular Gaussian per tap, Rician mean on tap 0."""
    h = np.zeros(pdp.length, dtype=np.complex128)
    scale = np.sqrt(pdp.powers / 2.0)
    noise = rng.standard_normal(pdp.n_taps) + 1j * rng.standard_normal(pdp.n_taps)
    h[pdp.delays] = scale * noise
    if pdp.k_factor is not None:
        k = pdp.k_factor
        p0 = pdp.powers[0]
        mean = np.sqrt(k / (k + 1.0) * p0)
        diffuse = np.sqrt(p0 / (k + 1.0) / 2.0)
        h[0] = mean + diffuse * (rng.standard_normal() + 1j * rng.standard_normal())
    return h


def sample_tdl(pdp: PowerDelayProfile, rng: np.random.Generator) -> np.ndarray:
    """One tapped-delay-line realization, AGC-normalized to unit norm."""
    return normalize_agc(_raw_taps(pdp, rng))


def classify_phase(h) -> Phase:
    """Phase class of the taps; consistent with :func:`filters.factorize_by_phase`."""
    return factorize_by_phase(h).classification


def draw_channel(
    pdp: PowerDelayProfile,
    rng: np.random.Generator,
    require: Phase | None = None,
    max_retries: int = MAX_PHASE_RETRIES,
):
    """Draw a realization whose roots avoid the unit-circle ring.

    Realizations hitting the ring (where the MP/NMP split is undefined) are
    redrawn, as are realizations not matching ``require`` when given.
    Returns ``(taps, classification)``.
    """
    for _ in range(max_retries):
        h = sample_tdl(pdp, rng)
        try:
            cls = classify_phase(h)
        except UnitCircleRootError:
            continue
        if require is None or cls is require:
            return h, cls
    raise UnitCircleRootError(
        f"no acceptable realization within {max_retries} draws of {pdp.label or 'pdp'}"
    )


@dataclass(frozen=True)
class SteeringConfig:
    """Uniform linear array response parameters."""

    n_elements: int
    spacing_over_wavelength: float
    angle: float

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if self.spacing_over_wavelength <= 0:
            raise ValueError("element spacing must be positive")


def steering_vector(cfg: SteeringConfig) -> np.ndarray:
    """ULA phase response ``exp(j 2 pi m (d/lambda) cos(angle))`` for m = 0..N-1."""
    m = np.arange(cfg.n_elements)
    return np.exp(2j * np.pi * m * cfg.spacing_over_wavelength * np.cos(cfg.angle))


@dataclass(frozen=True)
class AngleModel:
    """Path angle generator: uniform sector centers with Laplacian offsets.

    The sector is given in the broadside convention (0 = array normal);
    samples are converted to the axis-referenced angles that
    :func:`steering_vector` expects, so a +-60 degree sector spans spatial
    frequencies ``cos(theta)`` in roughly [-0.87, 0.87].
    """

    sector: tuple[float, float] = (-np.pi / 3.0, np.pi / 3.0)
    offset_scale: float = np.deg2rad(5.0)
    spacing_over_wavelength: float = 0.5

    def sample(self, n_path: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.sector
        centers = rng.uniform(lo, hi, size=n_path)
        offsets = rng.laplace(0.0, self.offset_scale, size=n_path)
        return np.pi / 2.0 - (centers + offsets)


@dataclass(frozen=True)
class MimoChannelRealization:
    """Per-tap MIMO matrices, optionally with their parametric decomposition.

    When the parametric form is present,
    ``taps[l] == a_rx @ diag(path_gains[:, l]) @ a_tx.T / sqrt(N_p)`` holds for
    every tap ``l``.
    """

    taps: np.ndarray  # (L, N_r, N_t)
    a_rx: np.ndarray | None = None  # (N_r, N_p)
    a_tx: np.ndarray | None = None  # (N_t, N_p)
    path_gains: np.ndarray | None = None  # (N_p, L)

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.complex128)
        if t.ndim != 3:
            raise ValueError("taps must have shape (L, N_r, N_t)")
        object.__setattr__(self, "taps", t)
        if self.a_rx is not None:
            err = self.parametric_mismatch()
            if err > 1e-9:
                raise ValueError(f"parametric form inconsistent with taps ({err:.2e})")

    @property
    def n_rx(self) -> int:
        return self.taps.shape[1]

    @property
    def n_tx(self) -> int:
        return self.taps.shape[2]

    @property
    def length(self) -> int:
        return self.taps.shape[0]

    def parametric_mismatch(self) -> float:
        rebuilt = np.einsum(
            "rq,ql,tq->lrt", self.a_rx, self.path_gains, self.a_tx
        ) / np.sqrt(self.a_rx.shape[1])
        return float(np.max(np.abs(rebuilt - self.taps)))


def sample_parametric_mimo(
    pdp: PowerDelayProfile,
    angle_model: AngleModel,
    n_tx: int,
    n_rx: int,
    n_path: int,
    rng: np.random.Generator,
) -> MimoChannelRealization:
    """Draw a parametric MIMO realization ``H_l = sum_q c_q^l a_r,q a_t,q^T / sqrt(N_p)``.

    Each tap's PDP power is split equally across the ``n_path`` paths; the
    Rician mean (when the PDP carries a K factor) rides on path 0 of tap 0.
    The realization is Frobenius-AGC normalized so ``sum_l ||H_l||_F^2 = N_r``.
    """
    if n_path < min(n_tx, n_rx):
        warnings.warn(
            f"n_path = {n_path} < min(n_tx, n_rx) = {min(n_tx, n_rx)}: "
            "per-tap matrices will be rank deficient",
            stacklevel=2,
        )
    aoa = angle_model.sample(n_path, rng)
    aod = angle_model.sample(n_path, rng)
    a_rx = np.column_stack(
        [steering_vector(SteeringConfig(n_rx, angle_model.spacing_over_wavelength, th)) for th in aoa]
    )
    a_tx = np.column_stack(
        [steering_vector(SteeringConfig(n_tx, angle_model.spacing_over_wavelength, th)) for th in aod]
    )

    # Each tap's PDP power splits equally over the paths with circular
    # Gaussian gains.  A SISO Rician K-factor does not transfer here: pinning
    # the line-of-sight power to a single path would leave the strongest tap
    # matrix rank one, which no detector could separate into n_tx streams.
    length = pdp.length
    gains = np.zeros((n_path, length), dtype=np.complex128)
    scale = np.sqrt(pdp.powers / 2.0)
    noise = rng.standard_normal((n_path, pdp.n_taps)) + 1j * rng.standard_normal(
        (n_path, pdp.n_taps)
    )
    gains[:, pdp.delays] = scale[None, :] * noise

    taps = np.einsum("rq,ql,tq->lrt", a_rx, gains, a_tx) / np.sqrt(n_path)
    total = np.sum(np.abs(taps) ** 2)
    s = np.sqrt(n_rx / total)
    return MimoChannelRealization(
        taps=taps * s, a_rx=a_rx, a_tx=a_tx, path_gains=gains * s
    )


def apply_channel(ch, x, snr_db, rng, return_noise_var: bool = False):
    """Convolve transmit streams with the channel and add AWGN.

    ``x`` is a 1-D sample vector for SISO or an ``(N_t, T)`` array for MIMO.
    The SNR is average received signal power over noise power, measured per
    receive antenna on the clean signal; ``snr_db=None`` (or ``inf``) disables
    noise.  Output is truncated to the input length.
    """
    if isinstance(ch, MimoChannelRealization):
        xs = np.atleast_2d(np.asarray(x, dtype=np.complex128))
        if xs.shape[0] != ch.n_tx:
            raise ValueError(f"expected {ch.n_tx} transmit streams, got {xs.shape[0]}")
        t = xs.shape[1]
        y = np.zeros((ch.n_rx, t), dtype=np.complex128)
        for r in range(ch.n_rx):
            for c in range(ch.n_tx):
                y[r] += scipy.signal.lfilter(ch.taps[:, r, c], [1.0], xs[c])
    else:
        hv = as_complex_seq(ch, "channel taps")
        xs = as_complex_seq(x, "x")
        y = scipy.signal.lfilter(hv, [1.0 + 0.0j], xs)

    if snr_db is None or np.isinf(snr_db):
        noise_var = 0.0
    else:
        snr = 10.0 ** (snr_db / 10.0)
        p_sig = np.mean(np.abs(y) ** 2, axis=-1, keepdims=True)
        noise_var = p_sig / snr
        noise = (
            rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        ) * np.sqrt(noise_var / 2.0)
        y = y + noise
        noise_var = float(np.mean(noise_var))
    if return_noise_var:
        return y, noise_var
    return y
