"""FBMC-OQAM filter banks, OQAM<->QAM mapping, transmultiplexer response,
intrinsic interference, CFO injection, and a CP-OFDM baseline.

Grid conventions
----------------
OQAM grids are real arrays of shape (M, num_half_symbols); QAM grids are
complex arrays of shape (M, num_symbols).  Subcarrier index m is always the
leading axis.  Half-symbol k advances in steps of M/2 samples.

The synthesis basis is

    chi[m, k, l] = p[l - k*M/2] * exp(j*2*pi*m*(l - D)/M) * exp(j*phi[m, k])

with phi[m, k] = pi/2*(m + k) - pi*m*k and D = (L_p - 1)/2 the filter delay.
Referencing the modulation phase to the filter centre keeps the cross
correlations between basis functions free of per-subcarrier phase slopes, so
the real-field orthogonality condition holds to the residual of the prototype
itself rather than being limited by a half-sample delay mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidParameterError

SUPPORTED_OVERLAPS = (3, 4, 6, 8)


@dataclass(frozen=True)
class PrototypeFilter:
    """Sampled symmetric real pulse shaping every subcarrier.

    taps has length overlap * num_subcarriers, unit energy, and is symmetric:
    taps[l] == taps[len - 1 - l].
    """

    taps: np.ndarray
    num_subcarriers: int
    overlap: int

    @property
    def length(self) -> int:
        return self.taps.size

    @property
    def delay(self) -> float:
        """Group delay of the linear-phase pulse, in samples."""
        return (self.length - 1) / 2.0

    def export_taps(self, path) -> None:
        """Write the taps as a single-column plain-text file, one real per line."""
        np.savetxt(path, self.taps, fmt="%.17e")


def _folded_power(v2: np.ndarray, step: int) -> np.ndarray:
    """fold[r] = sum_k v2[r + k*step] for r in [0, step)."""
    n = v2.size
    pad = (-n) % step
    if pad:
        v2 = np.concatenate([v2, np.zeros(pad)])
    return v2.reshape(-1, step).sum(axis=0)


def build_iota(num_subcarriers: int, overlap: int = 4) -> PrototypeFilter:
    """Discretized IOTA pulse for M subcarriers, truncated to overlap*M taps.

    Standard isotropic orthogonal transform construction: a Gaussian matched
    to the OQAM lattice (T/2 in time, 1/T in frequency) is orthogonalized in
    time and then in frequency, then energy-normalized.  The residual
    orthogonality error of the truncated pulse is measured by
    transmux_response, not assumed zero.
    """
    M = num_subcarriers
    if M < 8 or M & (M - 1):
        raise InvalidParameterError(f"num_subcarriers must be a power of two >= 8, got {M}")
    if overlap not in SUPPORTED_OVERLAPS:
        raise InvalidParameterError(f"overlap must be one of {SUPPORTED_OVERLAPS}, got {overlap}")

    n = overlap * M
    # Time axis in units of the QAM symbol duration T; sampling rate M/T.
    t = (np.arange(n) - (n - 1) / 2.0) / M
    # Gaussian 2^(1/4) exp(-pi tau^2) in the isotropic coordinate tau = sqrt(2) t,
    # which squares up the (T/2, 1/T) lattice.
    g = 2.0**0.25 * np.exp(-2.0 * np.pi * t * t)

    # Orthogonalize in time at spacing T/2 (M/2 samples): flatten the folded power.
    fold_t = _folded_power(g * g, M // 2)
    a = g / np.sqrt(fold_t[np.arange(n) % (M // 2)])

    # Orthogonalize in frequency at spacing 1/T (overlap DFT bins of length n).
    A = np.fft.fft(a)
    fold_f = _folded_power(np.abs(A) ** 2, overlap)
    Z = A / np.sqrt(fold_f[np.arange(n) % overlap])
    z = np.fft.ifft(Z).real

    z /= np.linalg.norm(z)
    return PrototypeFilter(taps=z, num_subcarriers=M, overlap=overlap)


# ---------------------------------------------------------------------------
# OQAM <-> QAM staggering
# ---------------------------------------------------------------------------

def qam_to_oqam(c: np.ndarray) -> np.ndarray:
    """Stagger complex QAM symbols (M, K) into real OQAM half-symbols (M, 2K).

    Even subcarriers carry Re first then Im; odd subcarriers the reverse, so
    that oqam_to_qam is an exact inverse.
    """
    c = np.asarray(c)
    M, K = c.shape
    d = np.empty((M, 2 * K))
    even = np.arange(M) % 2 == 0
    d[even, 0::2] = c[even].real
    d[even, 1::2] = c[even].imag
    d[~even, 1::2] = c[~even].real
    d[~even, 0::2] = c[~even].imag
    return d


def oqam_to_qam(d: np.ndarray) -> np.ndarray:
    """Collapse real OQAM half-symbols (M, 2K) back into complex QAM (M, K)."""
    d = np.asarray(d)
    M, K2 = d.shape
    if K2 % 2:
        raise InvalidParameterError("OQAM grid needs an even number of half-symbols")
    even = np.arange(M) % 2 == 0
    c = np.empty((M, K2 // 2), dtype=complex)
    c[even] = d[even, 0::2] + 1j * d[even, 1::2]
    c[~even] = d[~even, 1::2] + 1j * d[~even, 0::2]
    return c


# ---------------------------------------------------------------------------
# Synthesis / analysis filter banks
# ---------------------------------------------------------------------------

def num_samples(pfilter: PrototypeFilter, num_half_symbols: int) -> int:
    return (num_half_symbols - 1) * pfilter.num_subcarriers // 2 + pfilter.length


def _phase_vector(pfilter: PrototypeFilter) -> np.ndarray:
    """Per-subcarrier factor j^m exp(-j 2 pi m D / M)."""
    M = pfilter.num_subcarriers
    m = np.arange(M)
    return (1j**m) * np.exp(-2j * np.pi * m * pfilter.delay / M)


def synthesize(d: np.ndarray, pfilter: PrototypeFilter) -> np.ndarray:
    """Polyphase FBMC synthesis of a real OQAM grid into baseband samples.

    Equivalent (to ~1e-10) to the direct sum over the basis functions; one
    M-point IFFT per half-symbol plus an overlap-add of the windowed block.
    """
    d = np.asarray(d)
    M = pfilter.num_subcarriers
    if d.shape[0] != M:
        raise InvalidParameterError(
            f"grid has {d.shape[0]} subcarriers, filter expects {M}"
        )
    K = d.shape[1]
    half = M // 2
    phase_m = _phase_vector(pfilter)
    s = np.zeros(num_samples(pfilter, K), dtype=complex)
    reps = pfilter.length // M
    # s[k*M/2 + tau] += p[tau] * M * ifft(d[:, k] * j^(m+k) * e^{-j2pi m D/M})[tau % M]
    w = np.fft.ifft(phase_m[:, None] * d * (1j ** (np.arange(K) % 4))[None, :], axis=0) * M
    blocks = pfilter.taps[:, None] * np.tile(w, (reps, 1))
    for k in range(K):
        s[k * half : k * half + pfilter.length] += blocks[:, k]
    return s


def analyze(samples: np.ndarray, pfilter: PrototypeFilter, num_half_symbols: int) -> np.ndarray:
    """Matched-filter the samples against every basis function.

    samples may be 1-D (one stream) or 2-D (streams, samples); the result has
    shape (M, K) or (streams, M, K).  For an ideal channel and zero noise the
    real part recovers the transmitted OQAM grid up to the prototype's
    orthogonality residual; the imaginary part is the intrinsic interference.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=complex))
    M = pfilter.num_subcarriers
    half = M // 2
    need = num_samples(pfilter, num_half_symbols)
    if x.shape[-1] < need:
        raise InvalidParameterError(
            f"need {need} samples for {num_half_symbols} half-symbols, got {x.shape[-1]}"
        )
    conj_phase = np.conj(_phase_vector(pfilter))
    out = np.empty((x.shape[0], M, num_half_symbols), dtype=complex)
    for k in range(num_half_symbols):
        block = x[:, k * half : k * half + pfilter.length] * pfilter.taps
        folded = block.reshape(x.shape[0], -1, M).sum(axis=1)
        out[:, :, k] = np.fft.fft(folded, axis=1) * conj_phase * (1j ** (-k % 4))
    return out[0] if np.asarray(samples).ndim == 1 else out


# ---------------------------------------------------------------------------
# Transmultiplexer response and intrinsic interference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransmultiplexerResponse:
    """Cross-correlation xi between basis functions over a (dm, dk) window.

    table[p, dm + radius, dk + radius] is the response seen at a reference
    subcarrier of parity p (even/odd) from a neighbour offset by (dm, dk).
    The response does not depend on the reference half-symbol index, and for
    dk = 0 it is parity-independent; both facts are exercised by tests.
    The centre entry is ~1 and every off-centre entry is ~purely imaginary
    (real-field orthogonality); imaginary parts are the interference weights.

    Because the filter length is even, the delay-centred modulation is
    anti-periodic in the subcarrier index (chi[m + M] = -chi[m]), so a
    neighbour reached by wrapping across the m = 0 / m = M - 1 boundary
    contributes with an extra minus sign; wrap_signs supplies it.
    """

    table: np.ndarray  # (2, 2R+1, 2R+1) complex
    radius: int
    num_subcarriers: int

    def wrap_signs(self, m, dm: int):
        """+/-1 factor for the neighbour m + dm, -1 when it wraps out of [0, M)."""
        wrapped = (np.asarray(m) + dm) // self.num_subcarriers != 0
        return np.where(wrapped, -1.0, 1.0)

    def response(self, dm: int, dk: int, parity: int = 0) -> complex:
        R = self.radius
        return complex(self.table[parity % 2, dm + R, dk + R])

    def weights(self, parity: int = 0) -> np.ndarray:
        """Interference weights <xi> = Im{xi} with the centre zeroed, (2R+1, 2R+1)."""
        w = self.table[parity % 2].imag.copy()
        w[self.radius, self.radius] = 0.0
        return w

    def max_real_residual(self) -> float:
        """Largest |Re{xi}| off centre plus the centre's deviation from 1."""
        res = 0.0
        for p in range(2):
            t = self.table[p].real.copy()
            t[self.radius, self.radius] -= 1.0
            res = max(res, float(np.max(np.abs(t))))
        return res

    def sum_abs_squared(self, parity: int = 0) -> float:
        """sum |xi|^2 over the whole window, centre included (~2 for a tight frame)."""
        return float(np.sum(np.abs(self.table[parity % 2]) ** 2))


def _basis(pfilter: PrototypeFilter, m: int, k: int, length: int) -> np.ndarray:
    """chi[m, k] evaluated on [0, length) (direct definition, used for tables/tests)."""
    M = pfilter.num_subcarriers
    out = np.zeros(length, dtype=complex)
    start = k * (M // 2)
    l = np.arange(start, start + pfilter.length)
    phi = 0.5 * np.pi * (m + k) - np.pi * m * k
    out[l] = pfilter.taps * np.exp(2j * np.pi * m * (l - pfilter.delay) / M + 1j * phi)
    return out


def transmux_response(pfilter: PrototypeFilter, radius: int = 4) -> TransmultiplexerResponse:
    """Compute xi by direct summation of basis-function cross-correlations."""
    if radius < 1:
        raise InvalidParameterError("radius must be >= 1")
    M = pfilter.num_subcarriers
    k_ref = 2 * radius  # keep every neighbour's support inside the sample grid
    length = num_samples(pfilter, k_ref + radius + 1)
    table = np.empty((2, 2 * radius + 1, 2 * radius + 1), dtype=complex)
    for parity in range(2):
        ref = np.conj(_basis(pfilter, parity, k_ref, length))
        for dm in range(-radius, radius + 1):
            for dk in range(-radius, radius + 1):
                # parity + dm may leave [0, M); _basis is happy with that and
                # it keeps the table translation-invariant (no wrap sign here).
                nb = _basis(pfilter, parity + dm, k_ref + dk, length)
                table[parity, dm + radius, dk + radius] = np.sum(nb * ref)
    return TransmultiplexerResponse(table=table, radius=radius, num_subcarriers=M)


def intrinsic_interference(
    d: np.ndarray, table: TransmultiplexerResponse, m: int, k: int
) -> float:
    """Interference leaking onto position (m, k) from its neighbourhood.

    I = sum over the window (excluding the centre) of d[m+dm, k+dk] * <xi>.
    Subcarrier offsets wrap modulo M (the exponentials are cyclic in m);
    (m, k) must sit at least radius half-symbols away from the time edges.
    """
    R = table.radius
    M, K = d.shape
    if not (R <= k < K - R):
        raise InvalidParameterError("position is not interior to the grid in time")
    w = table.weights(parity=m % 2)
    offsets = np.arange(-R, R + 1)
    signs = np.array([table.wrap_signs(m, dm) for dm in offsets])
    patch = d[np.ix_((m + offsets) % M, np.arange(k - R, k + R + 1))]
    return float(np.sum(patch * w * signs[:, None]))


def interference_grid(d: np.ndarray, table: TransmultiplexerResponse) -> np.ndarray:
    """Intrinsic interference at every interior time position, shape (M, K - 2R).

    Vectorized counterpart of intrinsic_interference: cyclic in subcarrier,
    valid (interior) in time.
    """
    R = table.radius
    M, K = d.shape
    cols = K - 2 * R
    if cols <= 0:
        raise InvalidParameterError("grid too short for the table radius")
    out = np.zeros((M, cols))
    rows = np.arange(M)
    for parity in range(2):
        w = table.weights(parity=parity)
        sel = rows % 2 == parity
        acc = np.zeros((int(sel.sum()), cols))
        for i, dm in enumerate(range(-R, R + 1)):
            signs = table.wrap_signs(rows[sel], dm)
            shifted = signs[:, None] * d[(rows[sel] + dm) % M]
            for j, dk in enumerate(range(-R, R + 1)):
                if w[i, j] != 0.0:
                    acc += w[i, j] * shifted[:, R + dk : R + dk + cols]
        out[sel] = acc
    return out


# ---------------------------------------------------------------------------
# CFO and the CP-OFDM baseline
# ---------------------------------------------------------------------------

def apply_cfo(samples: np.ndarray, epsilon: float, num_subcarriers: int) -> np.ndarray:
    """Rotate samples by a carrier frequency offset normalized to the subcarrier spacing."""
    if abs(epsilon) > 0.5:
        raise InvalidParameterError(f"|epsilon| must be <= 0.5, got {epsilon}")
    l = np.arange(np.asarray(samples).shape[-1])
    return samples * np.exp(2j * np.pi * epsilon * l / num_subcarriers)


def ofdm_modulate(c: np.ndarray, cp_len: int) -> np.ndarray:
    """CP-OFDM modulation of a QAM grid (M, K) into a sample stream.

    Unitary scaling: per-sample transmit power equals the QAM symbol power,
    matching the FBMC chain, and the demodulated noise variance equals the
    time-domain noise variance.
    """
    if cp_len < 0:
        raise InvalidParameterError("cp_len must be >= 0")
    c = np.asarray(c, dtype=complex)
    M, K = c.shape
    x = np.fft.ifft(c, axis=0) * np.sqrt(M)
    if cp_len:
        x = np.vstack([x[-cp_len:], x])
    return x.T.reshape(-1)


def ofdm_demodulate(
    samples: np.ndarray, num_subcarriers: int, cp_len: int, num_symbols: int | None = None
) -> np.ndarray:
    """Strip cyclic prefixes and DFT back to a QAM grid.

    Over an L-tap channel with cp_len >= L - 1 the result is exactly
    G_m * c[m, k] plus demodulated noise.  samples may be 1-D or 2-D
    (streams, samples); output (M, K) or (streams, M, K).
    """
    x = np.atleast_2d(np.asarray(samples, dtype=complex))
    M = num_subcarriers
    step = M + cp_len
    if num_symbols is None:
        num_symbols = x.shape[-1] // step
    need = num_symbols * step
    if x.shape[-1] < need:
        raise InvalidParameterError(f"need {need} samples, got {x.shape[-1]}")
    blocks = x[:, :need].reshape(x.shape[0], num_symbols, step)[:, :, cp_len:]
    out = np.fft.fft(blocks, axis=2) / np.sqrt(M)
    out = np.transpose(out, (0, 2, 1))
    return out[0] if np.asarray(samples).ndim == 1 else out
