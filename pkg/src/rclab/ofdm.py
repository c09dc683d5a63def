"""OFDM transmit/receive chain: square-QAM mapping, resource grids with comb
reference-signal (RS) patterns, and cyclic-prefix modulation.

Grids are ``(n_sc, n_sym, n_tx)`` complex arrays with a parallel kind mask
partitioning resource elements (REs) into data, RS, and empty-RS.  One OFDM
symbol per slot carries the RS comb; the remaining symbols carry payload.
Two comb layouts are supported:

* ``conventional`` - antenna-orthogonal combs: antenna ``p`` transmits on
  subcarriers ``p * rs_spacing (mod rs_spacing * n_tx)`` while the other
  antennas keep those REs empty.  Suits estimators that need per-pair
  channel observability.
* ``learning`` - all antennas transmit distinct RS sequences on the same
  comb simultaneously, so a receiver can be trained on the full known
  time-domain waveform of the RS symbol.
"""

import enum
from dataclasses import dataclass

import numpy as np

QAM_ORDERS = (4, 16, 64)


class ReKind(enum.IntEnum):
    DATA = 0
    RS = 1
    EMPTY_RS = 2


class RsMode(enum.Enum):
    CONVENTIONAL = "conventional"
    LEARNING = "learning"


@dataclass(frozen=True)
class OfdmNumerology:
    n_sc: int
    n_cp: int

    def __post_init__(self):
        if self.n_sc < 2 or (self.n_sc & (self.n_sc - 1)) != 0:
            raise ValueError("n_sc must be a power of two")
        if not 0 <= self.n_cp < self.n_sc:
            raise ValueError("need 0 <= n_cp < n_sc")

    @property
    def symbol_len(self) -> int:
        return self.n_sc + self.n_cp


# ---------------------------------------------------------------------------
# Gray-coded square QAM with unit average energy
# ---------------------------------------------------------------------------

def _axis_tables(order: int):
    """(levels_by_gray_value, scale) for one I/Q axis of a square constellation."""
    if order not in QAM_ORDERS:
        raise ValueError(f"unsupported QAM order {order}")
    m = int(np.sqrt(order))
    levels = np.empty(m, dtype=np.float64)
    for idx in range(m):
        gray = idx ^ (idx >> 1)
        levels[gray] = 2 * idx - (m - 1)
    scale = np.sqrt(3.0 / (2.0 * (order - 1)))
    return levels, scale


def bits_per_symbol(order: int) -> int:
    if order not in QAM_ORDERS:
        raise ValueError(f"unsupported QAM order {order}")
    return int(np.log2(order))


def qam_map(bits, order: int) -> np.ndarray:
    """Map bits to unit-average-energy Gray-coded QAM symbols.

    Bits are consumed ``k`` at a time (``k = log2(order)``); even-position
    bits address the I axis, odd-position bits the Q axis.
    """
    b = np.asarray(bits, dtype=np.int64).ravel()
    k = bits_per_symbol(order)
    if b.size % k != 0:
        raise ValueError(f"bit count {b.size} not divisible by {k}")
    if b.size and (b.min() < 0 or b.max() > 1):
        raise ValueError("bits must be 0/1")
    levels, scale = _axis_tables(order)
    groups = b.reshape(-1, k)
    weights = 1 << np.arange(k // 2 - 1, -1, -1)
    i_idx = groups[:, 0::2] @ weights
    q_idx = groups[:, 1::2] @ weights
    return scale * (levels[i_idx] + 1j * levels[q_idx])


def qam_demap(symbols, order: int) -> np.ndarray:
    """Nearest-neighbor hard decisions back to bits (inverse of :func:`qam_map`)."""
    s = np.asarray(symbols, dtype=np.complex128).ravel()
    k = bits_per_symbol(order)
    m = int(np.sqrt(order))
    _, scale = _axis_tables(order)

    def axis_bits(vals):
        idx = np.clip(np.round((vals / scale + (m - 1)) / 2.0).astype(np.int64), 0, m - 1)
        gray = idx ^ (idx >> 1)
        shifts = np.arange(k // 2 - 1, -1, -1)
        return (gray[:, None] >> shifts) & 1

    i_bits = axis_bits(s.real)
    q_bits = axis_bits(s.imag)
    out = np.empty((s.size, k), dtype=np.int64)
    out[:, 0::2] = i_bits
    out[:, 1::2] = q_bits
    return out.ravel()


# ---------------------------------------------------------------------------
# Resource grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResourceGrid:
    """Subcarrier x symbol x antenna grid with an RE-kind mask."""

    symbols: np.ndarray  # (n_sc, n_sym, n_tx) complex
    kind: np.ndarray  # same shape, ReKind values
    rs_symbol_index: int
    qam_order: int

    @property
    def n_sc(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_sym(self) -> int:
        return self.symbols.shape[1]

    @property
    def n_tx(self) -> int:
        return self.symbols.shape[2]


def rs_subcarriers(n_sc: int, n_tx: int, rs_spacing: int, mode: RsMode, antenna: int) -> np.ndarray:
    """Comb subcarrier indices carrying RS for one antenna."""
    if n_sc % rs_spacing != 0:
        raise ValueError("rs_spacing must divide n_sc")
    if mode is RsMode.CONVENTIONAL:
        period = rs_spacing * n_tx
        if n_sc % period != 0:
            raise ValueError("rs_spacing * n_tx must divide n_sc in conventional mode")
        return np.arange(antenna * rs_spacing, n_sc, period)
    return np.arange(0, n_sc, rs_spacing)


def payload_bit_count(n_sc: int, n_sym: int, n_tx: int, order: int) -> int:
    """Bits needed to fill every data RE (the RS symbol carries no data)."""
    return n_sc * (n_sym - 1) * n_tx * bits_per_symbol(order)


def build_grid(
    numerology: OfdmNumerology,
    n_tx: int,
    n_sym: int,
    rs_spacing: int,
    mode: RsMode,
    payload_bits,
    rng: np.random.Generator,
    order: int = 16,
    rs_symbol: int = 0,
) -> ResourceGrid:
    """Assemble a transmit grid: one RS comb symbol plus payload symbols.

    RS REs carry unit-modulus QPSK sequences drawn from ``rng`` (distinct per
    antenna); within the RS symbol every non-RS RE is empty, so the whole RS
    waveform is known to the receiver in both comb modes and payload capacity
    is identical across modes.
    """
    n_sc = numerology.n_sc
    if not 0 <= rs_symbol < n_sym or n_sym < 2:
        raise ValueError("need n_sym >= 2 and a valid rs_symbol index")
    bits = np.asarray(payload_bits, dtype=np.int64).ravel()
    expected = payload_bit_count(n_sc, n_sym, n_tx, order)
    if bits.size != expected:
        raise ValueError(f"expected {expected} payload bits, got {bits.size}")

    symbols = np.zeros((n_sc, n_sym, n_tx), dtype=np.complex128)
    kind = np.full((n_sc, n_sym, n_tx), ReKind.DATA, dtype=np.int8)
    kind[:, rs_symbol, :] = ReKind.EMPTY_RS
    for p in range(n_tx):
        comb = rs_subcarriers(n_sc, n_tx, rs_spacing, mode, p)
        quads = rng.integers(0, 4, size=comb.size)
        symbols[comb, rs_symbol, p] = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * quads))
        kind[comb, rs_symbol, p] = ReKind.RS

    data_syms = qam_map(bits, order)
    pos = data_positions(kind)
    symbols[pos[:, 2], pos[:, 1], pos[:, 0]] = data_syms
    return ResourceGrid(symbols=symbols, kind=kind, rs_symbol_index=rs_symbol, qam_order=order)


def data_positions(kind: np.ndarray) -> np.ndarray:
    """Data-RE coordinates as rows ``(ant, sym, sc)`` in canonical fill order."""
    mask = np.transpose(kind, (2, 1, 0)) == ReKind.DATA
    return np.argwhere(mask)


def extract_data_symbols(symbols: np.ndarray, kind: np.ndarray) -> np.ndarray:
    """Data-RE values in the canonical order used by :func:`build_grid`."""
    pos = data_positions(kind)
    return symbols[pos[:, 2], pos[:, 1], pos[:, 0]]


def demap_data_bits(symbols: np.ndarray, kind: np.ndarray, order: int) -> np.ndarray:
    return qam_demap(extract_data_symbols(symbols, kind), order)


# ---------------------------------------------------------------------------
# Modulation
# ---------------------------------------------------------------------------

def ofdm_modulate(grid: ResourceGrid, numerology: OfdmNumerology) -> np.ndarray:
    """Unitary IFFT per symbol with cyclic prefix; returns ``(n_tx, n_sym * symbol_len)``."""
    if grid.n_sc != numerology.n_sc:
        raise ValueError("grid does not match numerology")
    time = np.fft.ifft(grid.symbols, axis=0, norm="ortho")
    with_cp = np.concatenate([time[numerology.n_sc - numerology.n_cp :], time], axis=0)
    return np.transpose(with_cp, (2, 1, 0)).reshape(grid.n_tx, -1)


def ofdm_demodulate(samples, numerology: OfdmNumerology, n_sym: int) -> np.ndarray:
    """Strip cyclic prefixes and apply the unitary FFT; returns ``(n_sc, n_sym, n_ant)``."""
    s = np.atleast_2d(np.asarray(samples, dtype=np.complex128))
    sym_len = numerology.symbol_len
    if s.shape[1] != n_sym * sym_len:
        raise ValueError(f"expected {n_sym * sym_len} samples per antenna, got {s.shape[1]}")
    blocks = s.reshape(s.shape[0], n_sym, sym_len)[:, :, numerology.n_cp :]
    return np.transpose(np.fft.fft(blocks, axis=2, norm="ortho"), (2, 1, 0))


def rs_time_waveform(grid: ResourceGrid, numerology: OfdmNumerology) -> np.ndarray:
    """Known transmitted time-domain waveform of the RS symbol, ``(n_tx, symbol_len)``."""
    col = grid.symbols[:, grid.rs_symbol_index, :]  # (n_sc, n_tx)
    time = np.fft.ifft(col, axis=0, norm="ortho")
    with_cp = np.concatenate([time[numerology.n_sc - numerology.n_cp :], time], axis=0)
    return with_cp.T.copy()


def dump_grid_csv(grid: ResourceGrid, fp) -> None:
    """Debug dump, one RE per line: ``sym,sc,ant,kind,re_real,re_imag``."""
    fp.write("sym,sc,ant,kind,re_real,re_imag\n")
    for a in range(grid.n_tx):
        for s in range(grid.n_sym):
            for k in range(grid.n_sc):
                v = grid.symbols[k, s, a]
                fp.write(
                    f"{s},{k},{a},{ReKind(grid.kind[k, s, a]).name},"
                    f"{v.real:.12g},{v.imag:.12g}\n"
                )
