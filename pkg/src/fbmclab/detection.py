"""Linear combining (MRC / ZF / MMSE), OQAM-to-QAM reconstruction, and
empirical SINR / SER measurement.

measure_sinr is the Monte Carlo mirror of analysis.conditional_sinr: it holds
the CSI that the closed form conditions on (the true channel with perfect CSI,
the estimates with imperfect CSI), generates everything else - data symbols,
noise, estimation errors, and for the multi-cell expressions the cross-cell
channels their statistics describe - and measures the signal / residual split
directly at the combiner output.  Agreement of the two routes is the core
correctness gate of the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidParameterError, complex_normal, gram, hermitian_solve
from . import waveform as wf
from .analysis import Case, LinkParams
from .channel import draw_taps, frequency_response, propagate
from .estimation import MultiCellEstimate, SingleCellEstimate


@dataclass(frozen=True)
class Combiner:
    """Receive combining matrix A (N x U) of one kind for one subcarrier."""

    kind: str
    matrix: np.ndarray
    csi: str = "perfect"


def build_combiner(
    kind: str,
    G: np.ndarray,
    noise_var: float = 1.0,
    symbol_power: float = 1.0,
    loading: float | None = None,
    csi: str = "perfect",
) -> Combiner:
    """MRC, ZF, or MMSE combiner built from the (true or estimated) channel.

    The MMSE combiner uses the identity (G G^H + c I_N)^{-1} G =
    G (G^H G + c I_U)^{-1}, so only a U x U system is solved; the default
    loading is noise_var / symbol_power.  ZF requires N >= U and raises a
    numeric error on rank-deficient input.
    """
    G = np.asarray(G)
    N, U = G.shape
    if kind == "mrc":
        A = G.copy()
    elif kind == "zf":
        if N < U:
            raise InvalidParameterError("ZF needs at least as many antennas as users")
        A = hermitian_solve(gram(G), G.conj().T).conj().T
    elif kind == "mmse":
        c = noise_var / symbol_power if loading is None else loading
        A = hermitian_solve(gram(G) + c * np.eye(U), G.conj().T).conj().T
    else:
        raise InvalidParameterError(f"unknown combiner kind {kind!r}")
    return Combiner(kind=kind, matrix=A, csi=csi)


def combine(combiner: Combiner, y: np.ndarray) -> np.ndarray:
    """Real OQAM estimates d_hat = Re{A^H y}; y may be (N,) or (N, batch)."""
    return (combiner.matrix.conj().T @ y).real


def reconstruct_qam(d_hat: np.ndarray) -> np.ndarray:
    """Collapse detected OQAM half-symbol estimates back into QAM estimates."""
    return wf.oqam_to_qam(d_hat)


# ---------------------------------------------------------------------------
# Empirical SINR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionStats:
    """Signal / interference split measured at the combiner output."""

    signal_power: np.ndarray        # (U,)
    interference_power: np.ndarray  # (U,)
    samples: int

    @property
    def sinr(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(
                ~self.unbounded,
                self.signal_power / np.maximum(self.interference_power, 1e-300),
                np.inf,
            )

    @property
    def unbounded(self) -> np.ndarray:
        """Residual power at the floating-point noise floor counts as zero."""
        return self.interference_power <= 1e-20 * np.maximum(self.signal_power, 1e-300)

    @staticmethod
    def merge(parts: list["DetectionStats"]) -> "DetectionStats":
        total = sum(s.samples for s in parts)
        sig = sum(s.signal_power * s.samples for s in parts) / total
        intf = sum(s.interference_power * s.samples for s in parts) / total
        return DetectionStats(signal_power=sig, interference_power=intf, samples=total)


def _imperfect_loading(e: SingleCellEstimate, p: LinkParams) -> float:
    return float(e.err_var.sum()) + p.noise_var / p.symbol_power


def measure_sinr(
    case: Case,
    p: LinkParams,
    rng: np.random.Generator,
    channel: np.ndarray | None = None,
    estimate: SingleCellEstimate | MultiCellEstimate | None = None,
    samples: int = 20000,
    chunk: int = 2000,
) -> DetectionStats:
    """Empirical per-user SINR for one realization, by brute-force simulation.

    The conditioning realization is fixed; each Monte Carlo sample draws fresh
    virtual data symbols (CN(0, symbol_power): real part data, imaginary part
    intrinsic interference), fresh noise, fresh estimation errors, and - where
    the corresponding closed form treats them statistically - fresh cross-cell
    channels.  The signal coefficient is the data-term gain Re{a_u^H g_u}
    (norm^2 for MRC, 1 for ZF, the real positive alpha for MMSE); everything
    else at the output counts as interference-plus-noise.
    """
    if samples < 1:
        raise InvalidParameterError("need at least one sample")
    P2, s2 = p.symbol_power, p.noise_var
    U = p.num_users

    if case.csi == "perfect":
        G_all = np.asarray(channel)
        G_cond = G_all if case.cells == "single" else G_all[0]
    else:
        G_cond = estimate.ghat
    if case.csi == "imperfect" and case.cells == "single" and case.receiver == "mmse":
        comb = build_combiner("mmse", G_cond, loading=_imperfect_loading(estimate, p))
    else:
        comb = build_combiner(case.receiver, G_cond, s2, P2)
    A = comb.matrix
    coef = np.real(np.einsum("nu,nu->u", A.conj(), G_cond))

    resid_sq = np.zeros(U)
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        b = complex_normal(rng, (U, n), P2)
        if case.cells == "single":
            if case.csi == "perfect":
                y = G_all @ b
            else:
                err = complex_normal(rng, (G_cond.shape[0], U, n), 1.0) * np.sqrt(
                    estimate.err_var
                )[None, :, None]
                y = G_cond @ b + np.einsum("nuk,uk->nk", err, b)
        else:
            N = G_cond.shape[0]
            if case.csi == "perfect":
                y = G_all[0] @ b
                for Gi, beta_i in zip(G_all[1:], p.beta_cells[1:]):
                    bi = complex_normal(rng, (U, n), P2)
                    if case.receiver == "zf":
                        # the ZF expression conditions on the home channel only
                        Gi = complex_normal(rng, (N, U, n), 1.0) * np.sqrt(beta_i)[None, :, None]
                        y += np.einsum("nuk,uk->nk", Gi, bi)
                    else:
                        y += Gi @ bi
            else:
                e: MultiCellEstimate = estimate
                y = np.zeros((N, n), dtype=complex)
                for i in range(e.num_cells):
                    bi = b if i == 0 else complex_normal(rng, (U, n), P2)
                    err_var = e.err_var_home if i == 0 else e.err_var_cross[i]
                    err = complex_normal(rng, (N, U, n), 1.0) * np.sqrt(err_var)[None, :, None]
                    y += e.ghat_cross(i) @ bi if i else G_cond @ bi
                    y += np.einsum("nuk,uk->nk", err, bi)
        y += complex_normal(rng, y.shape, s2)
        out = combine(comb, y)
        resid = out - coef[:, None] * b.real
        resid_sq += np.sum(resid**2, axis=1)
        done += n

    half_power = P2 / 2.0
    return DetectionStats(
        signal_power=coef**2 * half_power,
        interference_power=resid_sq / samples,
        samples=samples,
    )


def empirical_sinr(outputs: np.ndarray, references: np.ndarray) -> tuple[float, float]:
    """Least-squares gain and SINR from (detected, transmitted) sample pairs.

    Returns (gain, sinr).  Used by the waveform-mode experiments, where the
    signal coefficient is not known in closed form because residual dispersion
    and CFO leakage perturb it.
    """
    x = np.asarray(references, dtype=float).ravel()
    yv = np.asarray(outputs, dtype=float).ravel()
    sx = float(x @ x)
    if sx == 0.0:
        raise InvalidParameterError("reference symbols are all zero")
    gain = float(yv @ x) / sx
    resid = yv - gain * x
    noise = float(resid @ resid) / max(x.size - 1, 1)
    signal = gain**2 * sx / x.size
    return gain, signal / max(noise, 1e-300)


# ---------------------------------------------------------------------------
# Symbol error rate over the full waveform chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SerChain:
    """Configuration of one waveform SER experiment (uplink, perfect CSI)."""

    waveform: str                 # "fbmc" | "ofdm"
    modulation: str               # "bpsk" | "4qam"
    num_antennas: int
    num_users: int
    num_subcarriers: int
    num_taps: int
    symbol_power: float           # QAM symbol power, linear
    noise_var: float = 1.0
    cfo: float = 0.0
    receiver: str = "zf"
    beta: np.ndarray | None = None
    symbols_per_frame: int = 24
    cp_len: int | None = None
    unit_channel: bool = False    # force all taps to an ideal unit channel


@dataclass(frozen=True)
class SerResult:
    errors: int
    decisions: int

    @property
    def ser(self) -> float:
        return self.errors / self.decisions

    def wilson_interval(self, z: float = 1.96) -> tuple[float, float]:
        """Wilson score interval for the error probability."""
        n, k = self.decisions, self.errors
        ph = k / n
        den = 1.0 + z**2 / n
        centre = (ph + z**2 / (2 * n)) / den
        half = z * np.sqrt(ph * (1 - ph) / n + z**2 / (4 * n**2)) / den
        return max(centre - half, 0.0), min(centre + half, 1.0)

    @property
    def wilson_halfwidth(self) -> float:
        lo, hi = self.wilson_interval()
        return (hi - lo) / 2.0


def _constellation(chain: SerChain, rng: np.random.Generator, shape) -> np.ndarray:
    amp = np.sqrt(chain.symbol_power)
    if chain.modulation == "bpsk":
        return amp * rng.choice([-1.0, 1.0], size=shape).astype(complex)
    if chain.modulation == "4qam":
        return (amp / np.sqrt(2.0)) * (
            rng.choice([-1.0, 1.0], size=shape) + 1j * rng.choice([-1.0, 1.0], size=shape)
        )
    raise InvalidParameterError(f"unknown modulation {chain.modulation!r}")


def _count_errors(chain: SerChain, detected: np.ndarray, sent: np.ndarray) -> int:
    wrong = np.sign(detected.real) != np.sign(sent.real)
    if chain.modulation == "4qam":
        wrong |= np.sign(detected.imag) != np.sign(sent.imag)
    return int(np.count_nonzero(wrong))


def _frame_taps(chain: SerChain, rng: np.random.Generator) -> np.ndarray:
    if chain.unit_channel:
        taps = np.zeros((chain.num_antennas, chain.num_users, chain.num_taps), dtype=complex)
        taps[:, :, 0] = 1.0
        return taps
    taps = draw_taps(rng, chain.num_antennas, chain.num_users, chain.num_taps)
    if chain.beta is not None:
        taps = taps * np.sqrt(np.asarray(chain.beta))[None, :, None]
    return taps


def _frame_combiners(chain: SerChain, taps: np.ndarray) -> np.ndarray:
    """Per-subcarrier combiner matrices (M, N, U) from the true responses."""
    G = frequency_response(taps, chain.num_subcarriers)
    A = np.empty_like(G)
    for m in range(chain.num_subcarriers):
        A[m] = build_combiner(
            chain.receiver, G[m], chain.noise_var, chain.symbol_power
        ).matrix
    return A


def _run_fbmc_frame(
    chain: SerChain, pfilter: wf.PrototypeFilter, rng: np.random.Generator
) -> tuple[int, int]:
    M, U = chain.num_subcarriers, chain.num_users
    C = chain.symbols_per_frame
    pad = 2 * pfilter.overlap
    taps = _frame_taps(chain, rng)
    A = _frame_combiners(chain, taps)

    c = _constellation(chain, rng, (U, M, C))
    cols = 2 * C + 2 * pad
    streams = np.empty((U, wf.num_samples(pfilter, cols)), dtype=complex)
    for u in range(U):
        grid = np.zeros((M, cols))
        grid[:, pad : pad + 2 * C] = wf.qam_to_oqam(c[u])
        s = wf.synthesize(grid, pfilter)
        if chain.cfo:
            s = wf.apply_cfo(s, chain.cfo, M)
        streams[u] = s

    y = propagate(streams, taps, chain.noise_var, rng)
    demod = wf.analyze(y[:, : streams.shape[1]], pfilter, cols)
    if chain.cfo:
        # genie common-phase derotation: each half-symbol sits at k*M/2 + delay
        k = np.arange(cols)
        theta = 2.0 * np.pi * chain.cfo * (k * M / 2.0 + pfilter.delay) / M
        demod = demod * np.exp(-1j * theta)[None, None, :]

    data = demod[:, :, pad : pad + 2 * C]
    d_hat = np.einsum("mnu,nmc->umc", A.conj(), data).real
    errors = 0
    for u in range(U):
        errors += _count_errors(chain, wf.oqam_to_qam(d_hat[u]), c[u])
    return errors, U * M * C


def _run_ofdm_frame(chain: SerChain, rng: np.random.Generator) -> tuple[int, int]:
    M, U = chain.num_subcarriers, chain.num_users
    C = chain.symbols_per_frame
    cp = chain.num_taps if chain.cp_len is None else chain.cp_len
    taps = _frame_taps(chain, rng)
    A = _frame_combiners(chain, taps)

    c = _constellation(chain, rng, (U, M, C))
    streams = np.empty((U, C * (M + cp)), dtype=complex)
    for u in range(U):
        s = wf.ofdm_modulate(c[u], cp)
        if chain.cfo:
            s = wf.apply_cfo(s, chain.cfo, M)
        streams[u] = s

    y = propagate(streams, taps, chain.noise_var, rng)
    demod = wf.ofdm_demodulate(y[:, : streams.shape[1]], M, cp, C)
    if chain.cfo:
        k = np.arange(C)
        theta = 2.0 * np.pi * chain.cfo * (k * (M + cp) + cp + (M - 1) / 2.0) / M
        demod = demod * np.exp(-1j * theta)[None, None, :]

    c_hat = np.einsum("mnu,nmc->umc", A.conj(), demod)
    errors = 0
    for u in range(U):
        errors += _count_errors(chain, c_hat[u], c[u])
    return errors, U * M * C


def measure_ser(
    chain: SerChain,
    frames: int,
    rng: np.random.Generator,
    target_errors: int | None = None,
) -> SerResult:
    """Hard-decision symbol error rate over the configured waveform chain.

    Runs up to `frames` independent channel frames; with target_errors set,
    stops early once that many errors have accumulated (the Wilson interval is
    then already tight enough for ordering comparisons).
    """
    if frames < 1:
        raise InvalidParameterError("need at least one frame")
    pfilter = (
        wf.build_iota(chain.num_subcarriers) if chain.waveform == "fbmc" else None
    )
    errors = 0
    decisions = 0
    for _ in range(frames):
        if chain.waveform == "fbmc":
            e, d = _run_fbmc_frame(chain, pfilter, rng)
        elif chain.waveform == "ofdm":
            e, d = _run_ofdm_frame(chain, rng)
        else:
            raise InvalidParameterError(f"unknown waveform {chain.waveform!r}")
        errors += e
        decisions += d
        if target_errors is not None and errors >= target_errors:
            break
    return SerResult(errors=errors, decisions=decisions)
