"""Echo-state network dynamics and readout training.

The recurrent core is fixed (never trained): either a random sparse matrix
rescaled to a target spectral radius, or a diagonal bank of one-pole filters
produced by the weight-configuration pipeline.  Only the linear readout is
fitted, by least squares against a (possibly delayed) target.  The windowed
variant (WESN) feeds the readout the current and ``n_window - 1`` past input
vectors alongside the states, which realizes an explicit FIR tap-delay line
``{z^0, ..., z^-(n_window-1)}``.

Complex tanh is applied split-wise, ``tanh(Re) + j tanh(Im)``, which reduces
to the linear case for small drive.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .signal_core import least_squares

ACTIVATIONS = ("linear", "tanh")


@dataclass(frozen=True)
class ReservoirSpec:
    """Untrained network: input weights, recurrent weights, window length.

    ``n_window = 0`` is a vanilla ESN.  ``explicit_skip`` appends the raw
    current input as an extra feature block; it is only meaningful for
    ``n_window = 0`` (a window already contains the ``z^0`` tap).
    """

    w_in: np.ndarray  # (n_neurons, d_in)
    w_res: np.ndarray  # (n_neurons, n_neurons)
    activation: str = "linear"
    n_window: int = 0
    d_out: int = 1
    explicit_skip: bool = False

    def __post_init__(self):
        w_in = np.atleast_2d(np.asarray(self.w_in, dtype=np.complex128))
        w_res = np.asarray(self.w_res, dtype=np.complex128)
        if w_res.ndim != 2 or w_res.shape[0] != w_res.shape[1]:
            raise ValueError("w_res must be square")
        if w_in.shape[0] != w_res.shape[0]:
            raise ValueError("w_in row count must equal the neuron count")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.n_window < 0:
            raise ValueError("n_window must be >= 0")
        object.__setattr__(self, "w_in", w_in)
        object.__setattr__(self, "w_res", w_res)

    @property
    def n_neurons(self) -> int:
        return self.w_res.shape[0]

    @property
    def d_in(self) -> int:
        return self.w_in.shape[1]

    @property
    def feature_dim(self) -> int:
        extra = self.d_in if (self.explicit_skip and self.n_window == 0) else 0
        return self.n_neurons + self.d_in * self.n_window + extra

    @property
    def is_diagonal(self) -> bool:
        off = self.w_res - np.diag(np.diagonal(self.w_res))
        return not np.any(off)


@dataclass(frozen=True)
class Readout:
    """Trained output weights and the learned decision delay."""

    w_out: np.ndarray  # (d_out, feature_dim)
    delay: int = 0

    def __post_init__(self):
        object.__setattr__(self, "w_out", np.atleast_2d(np.asarray(self.w_out, dtype=np.complex128)))
        if self.delay < 0:
            raise ValueError("delay must be >= 0")


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "linear":
        return z
    return np.tanh(z.real) + 1j * np.tanh(z.imag)


def run_states(spec: ReservoirSpec, x) -> np.ndarray:
    """State trajectory from a zero initial state; returns ``(n_neurons, T)``.

    Runs the recursion ``s[n] = act(W_res s[n-1] + W_in x[n])`` step by step;
    diagonal recurrent matrices take an elementwise fast path.
    """
    xs = np.atleast_2d(np.asarray(x, dtype=np.complex128))
    if xs.shape[0] != spec.d_in:
        raise ValueError(f"expected d_in = {spec.d_in} input rows, got {xs.shape[0]}")
    t = xs.shape[1]
    drive = spec.w_in @ xs
    states = np.empty((spec.n_neurons, t), dtype=np.complex128)
    s = np.zeros(spec.n_neurons, dtype=np.complex128)
    act = spec.activation
    if spec.is_diagonal:
        diag = np.diagonal(spec.w_res).copy()
        for n in range(t):
            s = _activate(diag * s + drive[:, n], act)
            states[:, n] = s
    else:
        w = spec.w_res
        for n in range(t):
            s = _activate(w @ s + drive[:, n], act)
            states[:, n] = s
    return states


def block_states(poles, y) -> np.ndarray:
    """Linear diagonal-reservoir states in one shot: row k is ``(y * psi_k)[:N]``.

    ``psi_k`` is the impulse response of ``1 / (1 - p_k z^{-1})`` (unit input
    weight convention).  Serves as the closed-form oracle for
    :func:`run_states` with linear activation and a diagonal core.
    """
    p = np.asarray(poles, dtype=np.complex128).ravel()
    yv = np.asarray(y, dtype=np.complex128).ravel()
    out = np.empty((p.size, yv.size), dtype=np.complex128)
    for k, pk in enumerate(p):
        out[k] = scipy.signal.lfilter([1.0 + 0.0j], [1.0, -pk], yv)
    return out


def wesn_features(spec: ReservoirSpec, x) -> np.ndarray:
    """States stacked with the windowed input history, ``(feature_dim, T)``."""
    xs = np.atleast_2d(np.asarray(x, dtype=np.complex128))
    states = run_states(spec, xs)
    rows = [states]
    for w in range(spec.n_window):
        shifted = np.zeros_like(xs)
        if w == 0:
            shifted[:] = xs
        else:
            shifted[:, w:] = xs[:, :-w]
        rows.append(shifted)
    if spec.explicit_skip and spec.n_window == 0:
        rows.append(xs)
    return np.vstack(rows)


def _delayed(target: np.ndarray, delay: int) -> np.ndarray:
    if delay == 0:
        return target
    out = np.zeros_like(target)
    out[:, delay:] = target[:, :-delay]
    return out


def _fit_weights(features: np.ndarray, target_d: np.ndarray, ridge: float) -> np.ndarray:
    # Rows are whitened to unit RMS before solving (the scales fold back into
    # the returned weights), so the ridge penalty treats every feature equally
    # regardless of the drive normalization of the states.
    f = features
    scale = np.sqrt(np.mean(np.abs(f) ** 2, axis=1))
    scale = np.where(scale > 1e-300, scale, 1.0)
    fw = f / scale[:, None]
    if ridge > 0.0:
        t = fw.shape[1]
        gram = fw @ fw.conj().T + (ridge * t) * np.eye(fw.shape[0])
        w = np.linalg.solve(gram, fw @ target_d.conj().T).conj().T
    else:
        w = least_squares(fw.T, target_d.T).T
    return w / scale[None, :]


def train_readout(features, target, delay: int = 0, ridge: float = 0.0) -> Readout:
    """Least-squares readout against the target delayed by ``delay`` samples.

    With ``ridge = 0`` this is the plain pseudoinverse fit, so the residual
    rows are orthogonal to the feature rows.
    """
    f = np.atleast_2d(np.asarray(features, dtype=np.complex128))
    tgt = np.atleast_2d(np.asarray(target, dtype=np.complex128))
    if f.shape[1] != tgt.shape[1]:
        raise ValueError("features and target must share the time axis")
    if tgt.shape[1] <= f.shape[0]:
        warnings.warn(
            f"only {tgt.shape[1]} samples for {f.shape[0]} features; fit is underdetermined",
            stacklevel=2,
        )
    w = _fit_weights(f, _delayed(tgt, delay), ridge)
    return Readout(w_out=w, delay=delay)


def _delay_search(features, target, d_max, ridge):
    f = np.atleast_2d(np.asarray(features, dtype=np.complex128))
    tgt = np.atleast_2d(np.asarray(target, dtype=np.complex128))
    # residuals within rounding error of each other count as ties, which go
    # to the smallest delay
    tie_tol = 1e-12 * float(np.linalg.norm(tgt) ** 2)
    best = None
    for d in range(d_max + 1):
        tgt_d = _delayed(tgt, d)
        w = _fit_weights(f, tgt_d, ridge)
        residual = float(np.linalg.norm(w @ f - tgt_d) ** 2)
        if best is None or residual < best[0] - tie_tol:
            best = (residual, d, w)
    return best


def learn_delay(spec: ReservoirSpec, train_input, train_target, d_max: int, ridge: float = 0.0) -> int:
    """Grid-search the target delay minimizing the post-training residual.

    Ties go to the smallest delay.  The winning delay matches the decision
    latency a stable inverse of the channel would incur.
    """
    if d_max < 0:
        raise ValueError("d_max must be >= 0")
    features = wesn_features(spec, train_input)
    _, d_star, _ = _delay_search(features, train_target, d_max, ridge)
    return d_star


def train_with_delay_search(
    spec: ReservoirSpec, train_input, train_target, d_max: int, ridge: float = 0.0
) -> Readout:
    """Run the reservoir once, search delays, and return the winning readout."""
    features = wesn_features(spec, train_input)
    _, d_star, w = _delay_search(features, train_target, d_max, ridge)
    return Readout(w_out=w, delay=d_star)


def predict(spec: ReservoirSpec, readout: Readout, x) -> np.ndarray:
    """Readout applied to the features, advanced by the learned delay.

    The input is padded with ``delay`` trailing zeros so the output stays
    aligned with the undelayed target and keeps the input's length.
    """
    xs = np.atleast_2d(np.asarray(x, dtype=np.complex128))
    if readout.w_out.shape[1] != spec.feature_dim:
        raise ValueError("readout does not match the spec's feature dimension")
    if readout.delay:
        xs = np.concatenate(
            [xs, np.zeros((xs.shape[0], readout.delay), dtype=np.complex128)], axis=1
        )
    out = readout.w_out @ wesn_features(spec, xs)
    return out[:, readout.delay :]


def random_reservoir(
    n_neurons: int,
    spectral_radius: float,
    sparsity: float,
    d_in: int,
    n_window: int,
    rng: np.random.Generator,
    d_out: int = 1,
    activation: str = "tanh",
) -> ReservoirSpec:
    """Random untrained network: sparse uniform recurrent matrix, rescaled.

    Exactly ``round(sparsity * n_neurons**2)`` recurrent entries are zeroed;
    the rest are complex uniform on the unit square, rescaled so the largest
    eigenvalue magnitude equals ``spectral_radius``.  Input weights are
    complex uniform on [-1, 1]^2.
    """
    if not 0.0 < spectral_radius < 1.0:
        raise ValueError("need 0 < spectral_radius < 1")
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("need 0 <= sparsity < 1")
    n_zero = int(round(sparsity * n_neurons * n_neurons))
    while True:
        w = rng.uniform(-1.0, 1.0, (n_neurons, n_neurons)) + 1j * rng.uniform(
            -1.0, 1.0, (n_neurons, n_neurons)
        )
        mask = rng.permutation(n_neurons * n_neurons)[:n_zero]
        w.ravel()[mask] = 0.0
        radius = np.max(np.abs(np.linalg.eigvals(w)))
        if radius > 0.0:
            break
    w *= spectral_radius / radius
    w_in = rng.uniform(-1.0, 1.0, (n_neurons, d_in)) + 1j * rng.uniform(
        -1.0, 1.0, (n_neurons, d_in)
    )
    return ReservoirSpec(
        w_in=w_in,
        w_res=w,
        activation=activation,
        n_window=n_window,
        d_out=d_out,
    )


def dump_spec_text(spec: ReservoirSpec) -> str:
    """Text dump of a diagonal single-input spec.

    One line per neuron: ``neuron_index,pole_real,pole_imag,w_in_real,w_in_imag``.
    """
    if not spec.is_diagonal or spec.d_in != 1:
        raise ValueError("text dump is defined for diagonal single-input specs")
    poles = np.diagonal(spec.w_res)
    lines = ["neuron_index,pole_real,pole_imag,w_in_real,w_in_imag"]
    for i, (p, c) in enumerate(zip(poles, spec.w_in[:, 0])):
        lines.append(f"{i},{p.real:.17g},{p.imag:.17g},{c.real:.17g},{c.imag:.17g}")
    return "\n".join(lines) + "\n"


def parse_spec_text(text: str, activation: str = "tanh", n_window: int = 0) -> ReservoirSpec:
    """Rebuild a diagonal single-input spec from :func:`dump_spec_text` output."""
    rows = [ln for ln in text.strip().splitlines() if ln and not ln.startswith("neuron_index")]
    poles, weights = [], []
    for row in rows:
        _, pr, pi, wr, wi = row.split(",")
        poles.append(complex(float(pr), float(pi)))
        weights.append(complex(float(wr), float(wi)))
    return ReservoirSpec(
        w_in=np.asarray(weights, dtype=np.complex128)[:, None],
        w_res=np.diag(np.asarray(poles, dtype=np.complex128)),
        activation=activation,
        n_window=n_window,
    )
