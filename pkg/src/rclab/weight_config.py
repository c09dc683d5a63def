"""Configure untrained reservoir weights from channel statistics.

Two routes produce the same kind of diagonal one-pole reservoir:

* time domain - collect zero-forcing equalizer impulse responses for many
  channel draws, PCA the collection, force each principal column to be
  strictly minimum-phase by lifting its first tap until it dominates the
  tail, truncate each column's inverse filter to ``l_f`` coefficients, and
  split the reduced all-pole filter into parallel one-pole sections.
* frequency domain - sample the inverse frequency response of each draw on a
  uniform grid, PCA, then fit each principal response with an all-pole
  rational function (Sanathanan-Koerner reweighted least squares) of
  denominator order ``l_rp``.

Mixed-phase draws contribute only their minimum-phase factor; the
non-minimum-phase remainder is left to the trained window taps of the
readout.  Unstable poles produced by truncation or fitting are reflected
inside the unit circle and counted in the per-column diagnostics.

MIMO reservoirs are assembled from SISO blocks: the per-stream cores are
replicated along the block diagonal and each block listens to one receive
stream.
"""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.signal

from .channel import PowerDelayProfile, draw_channel
from .filters import (
    POLE_SEPARATION_TOL,
    Phase,
    factorize_by_phase,
    perturb_clustered_poles,
    _residues_simple,
)
from .reservoir import ReservoirSpec
from .signal_core import hermitian_eig, toeplitz_inverse_first_column

COMPENSATION_MARGIN = 0.05
COMPENSATION_FLOOR = 1e-3
REFLECTION_CAP = 0.99
SK_ITERATIONS = 10
DEFAULT_GRID_SIZE = 256


class ConfigurationError(RuntimeError):
    """Weight-configuration pipeline failure (e.g. a diverged rational fit)."""


class MimoAssembly(enum.Enum):
    FACTORIZABLE = "factorizable"
    PARAMETRIC_DISTINCT = "parametric_distinct"
    PARAMETRIC_SHARED = "parametric_shared"


@dataclass(frozen=True)
class ChannelStatsDataset:
    """Per-realization statistics vectors feeding PCA.

    Rows of ``vectors`` are equalizer impulse responses (time domain) or
    sampled inverse frequency responses (frequency domain).
    """

    vectors: np.ndarray  # (n_obs, n)
    domain: str  # "time" | "frequency"
    pdp_label: str = ""

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.complex128)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("vectors must be a non-empty (n_obs, n) array")
        if self.domain not in ("time", "frequency"):
            raise ValueError("domain must be 'time' or 'frequency'")
        object.__setattr__(self, "vectors", v)

    @property
    def n_obs(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def empirical_covariance(self) -> np.ndarray:
        g = self.vectors
        return (g.T @ g.conj()) / g.shape[0]


@dataclass(frozen=True)
class ConfiguredBasis:
    """PCA basis split into strictly-MP columns plus first-tap compensation.

    ``f = p + b`` holds exactly; ``b`` is nonzero only in row 0 and carries
    the skip-connection offsets ``f[0, m] - offsets[m]``.
    """

    f: np.ndarray  # (n, m) orthonormal
    p: np.ndarray  # (n, m) strictly-MP impulse responses
    b: np.ndarray  # (n, m), row 0 only
    offsets: np.ndarray  # (m,) real, the lifted first taps


@dataclass(frozen=True)
class ColumnDiagnostics:
    m: int
    offset: float
    reduce_order_error: float
    n_reflected_poles: int


@dataclass(frozen=True)
class ConfigReport:
    spec: ReservoirSpec
    poles: np.ndarray
    input_weights: np.ndarray
    diagnostics: tuple
    basis: ConfiguredBasis | None = None


def collect_equalizer_irs(
    pdp: PowerDelayProfile,
    n: int,
    n_obs: int,
    rng: np.random.Generator,
    phase_policy: str = "mp_factor",
) -> ChannelStatsDataset:
    """Zero-forcing equalizer impulse responses for ``n_obs`` channel draws.

    ``phase_policy`` is either ``"mp_factor"`` (mixed/NMP draws contribute the
    inverse of their minimum-phase factor) or ``"require_mp"`` (draws are
    resampled until strictly minimum-phase).
    """
    if phase_policy not in ("mp_factor", "require_mp"):
        raise ValueError("phase_policy must be 'mp_factor' or 'require_mp'")
    if n < pdp.length:
        raise ValueError(f"n = {n} shorter than the channel length {pdp.length}")
    require = Phase.STRICTLY_MP if phase_policy == "require_mp" else None
    vectors = np.empty((n_obs, n), dtype=np.complex128)
    for i in range(n_obs):
        h, cls = draw_channel(pdp, rng, require=require)
        if cls is not Phase.STRICTLY_MP:
            h = factorize_by_phase(h).mp_factor
        vectors[i] = toeplitz_inverse_first_column(h, n)
    return ChannelStatsDataset(vectors=vectors, domain="time", pdp_label=pdp.label)


def pca_basis(dataset: ChannelStatsDataset, m: int) -> np.ndarray:
    """Top-``m`` eigenvectors of the empirical covariance, deterministic order."""
    if not 1 <= m <= dataset.n:
        raise ValueError(f"need 1 <= m <= {dataset.n}")
    eig = hermitian_eig(dataset.empirical_covariance())
    return eig.vectors[:, :m].copy()


def mp_compensate(
    f: np.ndarray,
    margin: float = COMPENSATION_MARGIN,
    floor: float = COMPENSATION_FLOOR,
) -> ConfiguredBasis:
    """Lift each column's first tap until it dominates the tail.

    The offset ``b_m = max((1 + margin) * sum_{n>=1} |f[n, m]|, floor)``
    guarantees every root of the lifted column lies strictly inside the unit
    circle (first-tap dominance).  Row 0 of ``p`` is exactly the real offset
    and the stored ``f`` is recomputed as ``p + b``, so the decomposition is
    exact in floating point (the stored basis differs from the input by at
    most one rounding in row 0).
    """
    fm = np.asarray(f, dtype=np.complex128)
    if fm.ndim != 2 or fm.size == 0:
        raise ValueError("f must be a non-empty (n, m) array")
    if not np.all(np.any(fm != 0, axis=0)):
        raise ValueError("f has an all-zero column")
    tails = np.sum(np.abs(fm[1:, :]), axis=0)
    offsets = np.maximum((1.0 + margin) * tails, floor)
    p = fm.copy()
    p[0, :] = offsets
    b = np.zeros_like(fm)
    b[0, :] = fm[0, :] - offsets
    f_stored = p.copy()
    f_stored[0, :] = p[0, :] + b[0, :]
    return ConfiguredBasis(f=f_stored, p=p, b=b, offsets=offsets)


def reduce_order(p_col, l_f: int):
    """Truncate the inverse filter of a strictly-MP impulse response.

    Returns ``(q, error)`` where ``q`` holds the first ``l_f`` coefficients of
    the exact length-``n`` inverse and ``error`` is the Euclidean mismatch
    between ``p_col`` and the impulse response of the reduced all-pole filter
    ``1/Q(z)``.
    """
    p = np.asarray(p_col, dtype=np.complex128).ravel()
    if l_f < 1:
        raise ValueError("l_f must be >= 1")
    n = p.size
    q_full = toeplitz_inverse_first_column(p, n)
    q = q_full[: min(l_f, n)].copy()
    impulse = np.zeros(n, dtype=np.complex128)
    impulse[0] = 1.0
    p_hat = scipy.signal.lfilter(np.ones(1, dtype=np.complex128), q, impulse)
    return q, float(np.linalg.norm(p - p_hat))


def _reflect_unstable(poles: np.ndarray, cap: float = REFLECTION_CAP):
    """Pull poles on or outside the unit circle back inside; count the events."""
    out = poles.copy()
    mags = np.abs(out)
    unstable = mags >= 1.0
    n_reflected = int(np.count_nonzero(unstable))
    if n_reflected:
        new_mag = np.minimum(1.0 / mags[unstable], cap)
        out[unstable] = out[unstable] / mags[unstable] * new_mag
    return out, n_reflected


def _denominator_to_sections(q: np.ndarray, l_f: int):
    """Poles and weights of ``1/Q(z)`` padded to exactly ``l_f`` sections.

    The denominator is normalized monic, its roots stabilized by reflection
    and de-clustered by the deterministic jitter, and the residues taken at
    the adjusted poles.  Missing sections (trailing-zero coefficients or a
    degree-zero denominator) are padded with zero poles and zero weights.
    """
    lead = q[0]
    if abs(lead) == 0.0:
        raise ConfigurationError("reduced denominator has a zero leading coefficient")
    monic = q / lead
    mags = np.abs(monic)
    keep = np.flatnonzero(mags > 1e-14 * mags.max())
    monic = monic[: keep[-1] + 1]
    if monic.size == 1:
        poles = np.zeros(0, dtype=np.complex128)
        n_reflected = 0
    else:
        poles = np.roots(monic)
        order = np.lexsort((poles.imag, poles.real))
        poles = poles[order]
        poles, n_reflected = _reflect_unstable(poles)
        if poles.size > 1:
            poles = perturb_clustered_poles(poles)
    weights = _residues_simple(poles) / lead if poles.size else np.zeros(0, complex)
    pad = l_f - poles.size
    if pad < 0:
        raise ConfigurationError("more poles than sections; check l_f")
    if pad:
        if poles.size == 0:
            # constant filter 1/lead: carry it on a zero pole
            weights = np.array([1.0 / lead], dtype=np.complex128)
            poles = np.zeros(1, dtype=np.complex128)
            pad -= 1
        poles = np.concatenate([poles, np.zeros(pad, dtype=np.complex128)])
        weights = np.concatenate([weights, np.zeros(pad, dtype=np.complex128)])
    return poles, weights, n_reflected


def basis_to_poles(basis: ConfiguredBasis, l_f: int):
    """Decompose every compensated basis column into ``l_f`` one-pole sections.

    Returns ``(poles, weights, diagnostics)`` with ``m * l_f`` entries; all
    pole magnitudes are strictly below one.
    """
    n, m = basis.p.shape
    poles = np.empty(m * l_f, dtype=np.complex128)
    weights = np.empty(m * l_f, dtype=np.complex128)
    diagnostics = []
    for col in range(m):
        q, err = reduce_order(basis.p[:, col], l_f)
        p_col, w_col, n_ref = _denominator_to_sections(q, l_f)
        poles[col * l_f : (col + 1) * l_f] = p_col
        weights[col * l_f : (col + 1) * l_f] = w_col
        diagnostics.append(
            ColumnDiagnostics(
                m=col,
                offset=float(basis.offsets[col]),
                reduce_order_error=err,
                n_reflected_poles=n_ref,
            )
        )
    return poles, weights, tuple(diagnostics)


STATE_RMS_TARGET = 0.005


def _drive_normalization(poles, weights, target: float = STATE_RMS_TARGET) -> float:
    """Single input gain bounding the RMS state magnitude of every neuron.

    For unit-power white input the state of a one-pole neuron has RMS
    ``|c| / sqrt(1 - |p|^2)``; one global scalar keeps that below ``target``
    for the worst neuron.  A common scale changes neither the spanned
    subspace nor the per-column recombinations (the trained readout absorbs
    it), but it keeps a tanh reservoir inside its near-linear range, where
    the configured pole bank behaves as designed.
    """
    p = np.abs(np.asarray(poles))
    c = np.abs(np.asarray(weights))
    active = c > 0
    if not np.any(active):
        return 1.0
    return float(np.min(target * np.sqrt(1.0 - p[active] ** 2) / c[active]))


def _spec_from_sections(poles, weights, n_window, activation, d_out) -> ReservoirSpec:
    gain = _drive_normalization(poles, weights)
    return ReservoirSpec(
        w_in=gain * np.asarray(weights, dtype=np.complex128)[:, None],
        w_res=np.diag(np.asarray(poles, dtype=np.complex128)),
        activation=activation,
        n_window=n_window,
        d_out=d_out,
        explicit_skip=(n_window == 0),
    )


def configure_time_domain_report(
    pdp: PowerDelayProfile,
    n: int,
    n_obs: int,
    m: int,
    l_f: int,
    n_window: int,
    rng: np.random.Generator,
    activation: str = "tanh",
    d_out: int = 1,
    phase_policy: str = "mp_factor",
) -> ConfigReport:
    """Full time-domain pipeline with per-column diagnostics."""
    dataset = collect_equalizer_irs(pdp, n, n_obs, rng, phase_policy=phase_policy)
    basis = mp_compensate(pca_basis(dataset, m))
    poles, weights, diagnostics = basis_to_poles(basis, l_f)
    spec = _spec_from_sections(poles, weights, n_window, activation, d_out)
    return ConfigReport(
        spec=spec, poles=poles, input_weights=weights, diagnostics=diagnostics, basis=basis
    )


def configure_time_domain(
    pdp: PowerDelayProfile,
    n: int,
    n_obs: int,
    m: int,
    l_f: int,
    n_window: int,
    rng: np.random.Generator,
    activation: str = "tanh",
    d_out: int = 1,
) -> ReservoirSpec:
    """Statistics -> equalizer PCA -> MP lift -> reduced filters -> diagonal core."""
    return configure_time_domain_report(
        pdp, n, n_obs, m, l_f, n_window, rng, activation=activation, d_out=d_out
    ).spec


# ---------------------------------------------------------------------------
# Frequency-domain route
# ---------------------------------------------------------------------------

def collect_inverse_responses(
    pdp: PowerDelayProfile,
    n_obs: int,
    rng: np.random.Generator,
    grid_size: int = DEFAULT_GRID_SIZE,
    phase_policy: str = "mp_factor",
) -> ChannelStatsDataset:
    """Inverse frequency responses ``1 / H_mp(e^{j w_k})`` on a uniform grid."""
    if grid_size < 8:
        raise ValueError("grid_size must be >= 8")
    require = Phase.STRICTLY_MP if phase_policy == "require_mp" else None
    vectors = np.empty((n_obs, grid_size), dtype=np.complex128)
    for i in range(n_obs):
        h, cls = draw_channel(pdp, rng, require=require)
        if cls is not Phase.STRICTLY_MP:
            h = factorize_by_phase(h).mp_factor
        vectors[i] = 1.0 / np.fft.fft(h, grid_size)
    return ChannelStatsDataset(vectors=vectors, domain="frequency", pdp_label=pdp.label)


def all_pole_fit(values: np.ndarray, order: int, iterations: int = SK_ITERATIONS):
    """Fit ``values(w_k) ~= c / Q(e^{j w_k})`` with ``order`` denominator coefficients.

    Iteratively reweighted linear least squares on ``c - values * Q = 0``
    (weights ``1/|Q_prev|``), denominator pinned monic in z^0.  Returns
    ``(c, q)`` with ``q[0] = 1``.
    """
    v = np.asarray(values, dtype=np.complex128).ravel()
    grid_size = v.size
    if order < 1:
        raise ValueError("order must be >= 1")
    omega = 2.0 * np.pi * np.arange(grid_size) / grid_size
    basis = np.exp(-1j * np.outer(omega, np.arange(1, order)))  # (grid, order-1)
    weights = np.ones(grid_size)
    c = np.complex128(0.0)
    q_tail = np.zeros(order - 1, dtype=np.complex128)
    for _ in range(iterations):
        a = np.concatenate([np.ones((grid_size, 1)), -v[:, None] * basis], axis=1)
        sol, _, _, _ = np.linalg.lstsq(a * weights[:, None], v * weights, rcond=None)
        c = sol[0]
        q_tail = sol[1:]
        q_eval = 1.0 + basis @ q_tail
        weights = 1.0 / np.maximum(np.abs(q_eval), 1e-12)
        if not np.all(np.isfinite(sol)):
            raise ConfigurationError("rational fit diverged (non-finite coefficients)")
    q = np.concatenate([[1.0 + 0.0j], q_tail])
    return c, q


def configure_frequency_domain_report(
    pdp: PowerDelayProfile,
    n: int,
    n_obs: int,
    m: int,
    l_rp: int,
    n_window: int,
    rng: np.random.Generator,
    grid_size: int = DEFAULT_GRID_SIZE,
    activation: str = "tanh",
    d_out: int = 1,
    phase_policy: str = "mp_factor",
) -> ConfigReport:
    """Full frequency-domain pipeline with per-column diagnostics."""
    dataset = collect_inverse_responses(
        pdp, n_obs, rng, grid_size=grid_size, phase_policy=phase_policy
    )
    f = pca_basis(dataset, m)
    poles = np.empty(m * l_rp, dtype=np.complex128)
    weights = np.empty(m * l_rp, dtype=np.complex128)
    diagnostics = []
    omega = 2.0 * np.pi * np.arange(grid_size) / grid_size
    for col in range(m):
        c, q = all_pole_fit(f[:, col], l_rp)
        p_col, w_col, n_ref = _denominator_to_sections(q, l_rp)
        w_col = w_col * c
        fit = c / (np.exp(-1j * np.outer(omega, np.arange(q.size))) @ q)
        err = float(np.linalg.norm(fit - f[:, col]))
        poles[col * l_rp : (col + 1) * l_rp] = p_col
        weights[col * l_rp : (col + 1) * l_rp] = w_col
        diagnostics.append(
            ColumnDiagnostics(
                m=col, offset=float("nan"), reduce_order_error=err, n_reflected_poles=n_ref
            )
        )
    spec = _spec_from_sections(poles, weights, n_window, activation, d_out)
    return ConfigReport(
        spec=spec, poles=poles, input_weights=weights, diagnostics=diagnostics, basis=None
    )


def configure_frequency_domain(
    pdp: PowerDelayProfile,
    n: int,
    n_obs: int,
    m: int,
    l_rp: int,
    n_window: int,
    rng: np.random.Generator,
    grid_size: int = DEFAULT_GRID_SIZE,
    activation: str = "tanh",
    d_out: int = 1,
) -> ReservoirSpec:
    """Statistics -> inverse-response PCA -> all-pole fits -> diagonal core."""
    return configure_frequency_domain_report(
        pdp, n, n_obs, m, l_rp, n_window, rng,
        grid_size=grid_size, activation=activation, d_out=d_out,
    ).spec


# ---------------------------------------------------------------------------
# MIMO assembly
# ---------------------------------------------------------------------------

def assemble_mimo(siso_specs, n_tx: int, mode: MimoAssembly) -> ReservoirSpec:
    """Block-diagonal MIMO reservoir from SISO building blocks.

    ``FACTORIZABLE`` and ``PARAMETRIC_SHARED`` replicate a single SISO core
    once per transmit stream (``n_tx * n_n`` neurons); ``PARAMETRIC_DISTINCT``
    stacks one core per propagation-path statistic inside each stream block
    (``n_tx * n_p * n_n`` neurons).  Block ``i`` listens to receive stream
    ``i`` only; the cross-stream mixing lives in the trained output weights.
    """
    specs = list(siso_specs)
    if mode in (MimoAssembly.FACTORIZABLE, MimoAssembly.PARAMETRIC_SHARED):
        if len(specs) != 1:
            raise ValueError(f"{mode.value} assembly takes exactly one SISO spec")
    elif len(specs) < 1:
        raise ValueError("parametric_distinct assembly needs at least one SISO spec")
    for s in specs:
        if s.d_in != 1:
            raise ValueError("SISO building blocks must have d_in = 1")
    n_window = specs[0].n_window
    activation = specs[0].activation
    if any(s.n_window != n_window or s.activation != activation for s in specs):
        raise ValueError("SISO specs must share window length and activation")

    per_stream_res = scipy.linalg.block_diag(*[s.w_res for s in specs])
    per_stream_in = np.vstack([s.w_in for s in specs])  # (n_block, 1)
    n_block = per_stream_res.shape[0]

    w_res = scipy.linalg.block_diag(*([per_stream_res] * n_tx))
    w_in = np.zeros((n_block * n_tx, n_tx), dtype=np.complex128)
    for i in range(n_tx):
        w_in[i * n_block : (i + 1) * n_block, i] = per_stream_in[:, 0]
    return ReservoirSpec(
        w_in=w_in,
        w_res=w_res,
        activation=activation,
        n_window=n_window,
        d_out=n_tx,
        explicit_skip=(n_window == 0),
    )


def diagnostics_csv(diagnostics, fp) -> None:
    """Per-column pipeline diagnostics: ``m,b_m,reduce_order_error,n_reflected_poles``."""
    fp.write("m,b_m,reduce_order_error,n_reflected_poles\n")
    for d in diagnostics:
        fp.write(f"{d.m},{d.offset:.12g},{d.reduce_order_error:.12g},{d.n_reflected_poles}\n")
