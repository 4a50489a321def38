"""Closed-form SINRs, achievable-rate lower bounds, power-scaling limits, and
sum-rate aggregation for the linear receivers, in single- and multi-cell
uplinks with perfect or estimated CSI.

Conventions
-----------
All powers are linear (dB conversion happens at the CLI boundary).  The
per-user transmit power is the QAM symbol power `symbol_power` = 2 P_d; the
real half-symbols carry P_d each.  Per-draw SINRs condition on exactly the CSI
the corresponding formula references (the true channel for perfect CSI, the
estimates for imperfect CSI) and average over data symbols, noise, and
estimation errors; detection.measure_sinr is the empirical mirror of the same
conditioning.

Multi-cell specifics.  The home cell is row 0 of the beta tensor.  Formulas
containing the degrees-of-freedom factors use (N - 1) and (N - U) with N the
antenna count.  The multi-cell ZF bound with estimated CSI treats the
contaminated cross-cell estimates through their covariances; the exactly
collinear component this leaves out is negligible for geometry-scale
cross-cell gains (squared gains enter) but grows with strong synthetic
contamination - the acceptance suite evaluates the ZF oracle on
geometry-drawn tensors for this reason.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import InvalidParameterError, complex_normal, hermitian_solve, inverse_diagonal
from .estimation import MultiCellEstimate, SingleCellEstimate

RECEIVERS = ("mrc", "zf", "mmse")
CSI_MODES = ("perfect", "imperfect")
SCALINGS = ("none", "inv_sqrt_n", "inv_n")


@dataclass(frozen=True)
class LinkParams:
    """Static link parameters shared by every bound and SINR expression."""

    num_antennas: int
    num_users: int
    num_pilots: int
    symbol_power: float                 # 2 P_d
    noise_var: float = 1.0
    beta: np.ndarray | None = None      # (U,) single-cell large-scale gains
    beta_cells: np.ndarray | None = None  # (N_c, U); row 0 all ones
    coherence_symbols: int = 196

    def __post_init__(self):
        if self.symbol_power <= 0 or self.noise_var < 0:
            raise InvalidParameterError("powers must be positive")
        if self.num_pilots < self.num_users:
            raise InvalidParameterError("need num_pilots >= num_users")
        if self.coherence_symbols <= self.num_pilots:
            raise InvalidParameterError("coherence interval must exceed the training length")
        if self.beta is not None:
            object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
            if self.beta.shape != (self.num_users,) or np.any(self.beta <= 0):
                raise InvalidParameterError("beta must be positive with one entry per user")
        if self.beta_cells is not None:
            bc = np.asarray(self.beta_cells, dtype=float)
            object.__setattr__(self, "beta_cells", bc)
            if bc.ndim != 2 or bc.shape[1] != self.num_users or np.any(bc < 0):
                raise InvalidParameterError("beta_cells must be (N_c, U) and non-negative")
            if not np.allclose(bc[0], 1.0):
                raise InvalidParameterError("home-cell gains (row 0) must be 1")

    @property
    def half_power(self) -> float:
        return self.symbol_power / 2.0

    @property
    def pilot_power(self) -> float:
        return self.symbol_power * self.num_pilots

    def with_symbol_power(self, symbol_power: float) -> "LinkParams":
        return replace(self, symbol_power=symbol_power)


@dataclass(frozen=True)
class Case:
    """Selects one analysed configuration: cell layout, receiver, CSI, scaling."""

    cells: str                       # "single" | "multi"
    receiver: str                    # "mrc" | "zf" | "mmse"
    csi: str                         # "perfect" | "imperfect"
    scaling: str = "none"            # "none" | "inv_sqrt_n" | "inv_n"
    ref_power: float | None = None   # reference power E, linear

    def __post_init__(self):
        if self.cells not in ("single", "multi"):
            raise InvalidParameterError(f"unknown cell layout {self.cells!r}")
        if self.receiver not in RECEIVERS:
            raise InvalidParameterError(f"unknown receiver {self.receiver!r}")
        if self.csi not in CSI_MODES:
            raise InvalidParameterError(f"unknown CSI mode {self.csi!r}")
        if self.scaling not in SCALINGS:
            raise InvalidParameterError(f"unknown scaling {self.scaling!r}")
        if self.scaling != "none" and self.ref_power is None:
            raise InvalidParameterError("scaled cases need a reference power")


def scaled_symbol_power(case: Case, num_antennas: int) -> float:
    """Per-user symbol power under the case's scaling schedule at N antennas."""
    if case.scaling == "none":
        raise InvalidParameterError("case has no scaling schedule")
    if case.scaling == "inv_sqrt_n":
        return case.ref_power / np.sqrt(num_antennas)
    return case.ref_power / num_antennas


# ---------------------------------------------------------------------------
# Multi-cell aggregates
# ---------------------------------------------------------------------------

def contamination_gain(p: LinkParams) -> np.ndarray:
    """gamma[u] = 1 + sum of cross-cell large-scale gains for user u."""
    if p.beta_cells is None:
        raise InvalidParameterError("multi-cell parameters required")
    return 1.0 + p.beta_cells[1:].sum(axis=0)


def total_error_variance(p: LinkParams) -> float:
    """Sum of every LMMSE error variance seen at the observing BS.

    Cross-cell error terms plus the home-cell ones; this is the aggregate
    that multiplies the combiner norm in the estimated-CSI variances.
    """
    gamma = contamination_gain(p)
    P_p, s2 = p.pilot_power, p.noise_var
    denom = P_p * gamma + s2
    cross = p.beta_cells[1:] * (P_p * (gamma - p.beta_cells[1:]) + s2) / denom
    home = (P_p * (gamma - 1.0) + s2) / denom
    return float(cross.sum() + home.sum())


def _cross_beta_sum(p: LinkParams) -> float:
    return float(p.beta_cells[1:].sum())


def _cross_est_var_sum(p: LinkParams) -> float:
    """Sum over cells i != home and all users of the contaminated-estimate variances."""
    gamma = contamination_gain(p)
    return float(
        (p.pilot_power * p.beta_cells[1:] ** 2 / (p.pilot_power * gamma + p.noise_var)).sum()
    )


# ---------------------------------------------------------------------------
# Closed-form rate lower bounds
# ---------------------------------------------------------------------------

def rate_lower_bound(case: Case, p: LinkParams) -> np.ndarray:
    """Per-user closed-form lower bound on the ergodic rate, bits/s/Hz.

    Deterministic in the link parameters.  MRC needs N >= 2 and ZF needs
    N > U; the MMSE receiver has no closed-form bound here (its ergodic rate
    is computed exactly by mmse_ergodic_rate instead).
    """
    N, U = p.num_antennas, p.num_users
    P2, s2, P_p = p.symbol_power, p.noise_var, p.pilot_power
    if case.receiver == "mmse":
        raise InvalidParameterError(
            "no closed-form lower bound for the MMSE receiver; use mmse_ergodic_rate"
        )
    if case.receiver == "mrc" and N < 2:
        raise InvalidParameterError("MRC bound needs at least 2 antennas")
    if case.receiver == "zf" and N <= U:
        raise InvalidParameterError("ZF bound needs more antennas than users")

    if case.cells == "single":
        beta = p.beta if p.beta is not None else np.ones(U)
        if case.csi == "perfect":
            if case.receiver == "mrc":
                other = beta.sum() - beta
                sinr = P2 * (N - 1) * beta / (P2 * other + s2)
            else:
                sinr = P2 * beta * (N - U) / s2
        else:
            err_sum = float((beta * s2 / (P_p * beta + s2)).sum())
            if case.receiver == "mrc":
                other = beta.sum() - beta
                den = (P_p * beta + s2) * (other + s2 / P2) + beta * s2
                sinr = P_p * (N - 1) * beta**2 / den
            else:
                den = (P_p * beta + s2) * (err_sum + s2 / P2)
                sinr = P_p * (N - U) * beta**2 / den
        return np.log2(1.0 + sinr)

    gamma = contamination_gain(p)
    cross = _cross_beta_sum(p)
    if case.csi == "perfect":
        if case.receiver == "mrc":
            intra = float(p.beta_cells[0].sum()) - p.beta_cells[0]
            sinr = P2 * (N - 1) * p.beta_cells[0] / (P2 * (cross + intra) + s2)
        else:
            sinr = P2 * (N - U) * p.beta_cells[0] / (P2 * cross + s2)
        return np.log2(1.0 + sinr)

    contaminated_sq = (p.beta_cells[1:] ** 2).sum(axis=0)  # per user
    if case.receiver == "mrc":
        den = (P_p * gamma + s2) * (P2 * U + P2 * cross + s2) + P2 * P_p * (
            (N - 2) * contaminated_sq - 1.0
        )
        sinr = P2 * P_p * (N - 1) / den
    else:
        pilot_gain = P2 * P_p / (P_p * gamma + s2)
        other_gain = pilot_gain.sum() - pilot_gain
        den = (P_p * gamma + s2) * (P2 * U + P2 * cross - other_gain + s2) - P2 * P_p
        sinr = P2 * P_p * (N - U) / den
    return np.log2(1.0 + sinr)


def power_scaling_limit(case: Case, p: LinkParams) -> np.ndarray:
    """Large-N limit of the per-user rate under the case's power schedule.

    Supported combinations: perfect CSI with 1/N scaling (non-zero limit),
    imperfect CSI with 1/sqrt(N) (non-zero limit), and imperfect CSI with 1/N
    (rate vanishes).  Anything else has no stated finite limit.
    """
    if case.scaling == "none":
        raise InvalidParameterError("asymptotes are defined for scaled power only")
    E = case.ref_power
    beta = (
        p.beta_cells[0]
        if case.cells == "multi" and p.beta_cells is not None
        else (p.beta if p.beta is not None else np.ones(p.num_users))
    )
    if case.csi == "perfect" and case.scaling == "inv_n":
        return np.log2(1.0 + E * beta / p.noise_var)
    if case.csi == "imperfect" and case.scaling == "inv_n":
        return np.zeros(p.num_users)
    if case.csi == "imperfect" and case.scaling == "inv_sqrt_n":
        if case.cells == "multi":
            raise InvalidParameterError(
                "no stated limit for the contaminated uplink under 1/sqrt(N) scaling"
            )
        return np.log2(1.0 + p.num_pilots * (E * beta) ** 2 / p.noise_var**2)
    raise InvalidParameterError(
        f"no stated limit for csi={case.csi!r} with scaling={case.scaling!r}"
    )


# ---------------------------------------------------------------------------
# Per-draw SINRs (conditional on one channel/estimate realization)
# ---------------------------------------------------------------------------

def _mrc_perfect_sinr(G: np.ndarray, P2: float, s2: float, G_cross=None) -> np.ndarray:
    norms2 = np.sum(np.abs(G) ** 2, axis=0)
    cross = np.abs(G.conj().T @ G) ** 2
    np.fill_diagonal(cross, 0.0)
    inter = cross.sum(axis=1)
    if G_cross is not None:
        for Gi in G_cross:
            inter = inter + (np.abs(G.conj().T @ Gi) ** 2).sum(axis=1)
    return P2 * norms2**2 / (P2 * inter + s2 * norms2)


def conditional_sinr(
    case: Case,
    p: LinkParams,
    channel: np.ndarray | None = None,
    estimate: SingleCellEstimate | MultiCellEstimate | None = None,
) -> np.ndarray:
    """Per-user SINR conditioned on one realization, as used inside rate MC.

    Perfect CSI expects `channel`: (N, U) single cell, or (N_c, N, U) with the
    home cell first for the multi-cell MRC case (the multi-cell ZF expression
    conditions on the home channel only).  Imperfect CSI expects `estimate`.
    """
    P2, s2 = p.symbol_power, p.noise_var
    U = p.num_users

    if case.cells == "single":
        if case.csi == "perfect":
            G = np.asarray(channel)
            if case.receiver == "mrc":
                return _mrc_perfect_sinr(G, P2, s2)
            A = gram_matrix(G)
            if case.receiver == "zf":
                return P2 / (s2 * inverse_diagonal(A))
            return mmse_sinr_from_gram(A, P2 / s2)
        e = estimate
        err_sum = float(e.err_var.sum())
        if case.receiver == "mrc":
            Gh = e.ghat
            norms2 = np.sum(np.abs(Gh) ** 2, axis=0)
            cross = np.abs(Gh.conj().T @ Gh) ** 2
            np.fill_diagonal(cross, 0.0)
            leak = cross.sum(axis=1) / norms2
            return P2 * norms2 / (P2 * (leak + err_sum) + s2)
        c0 = 1.0 / (err_sum + s2 / P2)
        A = gram_matrix(e.ghat)
        if case.receiver == "zf":
            return c0 / inverse_diagonal(A)
        return mmse_sinr_from_gram(A, c0)

    if case.receiver == "mmse":
        raise InvalidParameterError("multi-cell analysis covers the MRC and ZF receivers")

    if case.csi == "perfect":
        G_all = np.asarray(channel)
        if case.receiver == "mrc":
            return _mrc_perfect_sinr(G_all[0], P2, s2, G_cross=G_all[1:])
        G_home = G_all[0] if G_all.ndim == 3 else G_all
        A = gram_matrix(G_home)
        return P2 / ((P2 * _cross_beta_sum(p) + s2) * inverse_diagonal(A))

    e = estimate
    if case.receiver == "mrc":
        norms2 = np.sum(np.abs(e.ghat) ** 2, axis=0)
        var = contaminated_mrc_variance(e, p)
        return P2 * norms2**2 / (2.0 * var)
    # Exact conditional variance at the contaminated ZF output: estimation
    # errors and noise pass through (Ghat^H Ghat)^{-1}; the collinear
    # cross-cell estimates survive zero-forcing as a rank-one floor with the
    # squared cross gains (they are *not* suppressed with the array size).
    floor = (p.beta_cells[1:] ** 2).sum(axis=0)
    A = gram_matrix(e.ghat)
    total = total_error_variance(p) + s2 / P2
    return 1.0 / (total * inverse_diagonal(A) + floor)


def gram_matrix(G: np.ndarray) -> np.ndarray:
    A = G.conj().T @ G
    return 0.5 * (A + A.conj().T)


def mmse_sinr_from_gram(A: np.ndarray, c: float) -> np.ndarray:
    """Per-user MMSE SINR via 1 / [(I + c A)^{-1}]_uu - 1 with A = G^H G."""
    U = A.shape[0]
    inv_diag = inverse_diagonal(np.eye(U) + c * A)
    return 1.0 / inv_diag - 1.0


def contaminated_mrc_variance(e: MultiCellEstimate, p: LinkParams) -> np.ndarray:
    """Noise-plus-interference variance at the contaminated MRC output, per user.

    Conditional on the home-cell estimates: intra-cell leakage and cross-cell
    leakage through the collinear contaminated estimates are evaluated on the
    realized estimates; estimation errors and noise enter through their exact
    covariances.  The quadratic own-user contamination term scales with the
    squared cross-cell gains and the fourth power of the estimate norm.
    """
    P_d, s2 = p.half_power, p.noise_var
    Gh = e.ghat
    norms2 = np.sum(np.abs(Gh) ** 2, axis=0)
    cross = np.abs(Gh.conj().T @ Gh) ** 2
    np.fill_diagonal(cross, 0.0)
    intra = cross.sum(axis=1)
    # cross-cell estimated interference: ghat_cross(i, j) = beta[i, j] ghat_j
    beta_sq = (e.beta[1:] ** 2).sum(axis=0)  # per user j
    cross_cells = (cross * beta_sq[None, :]).sum(axis=1)
    mu = total_error_variance(p)
    own = (e.beta[1:] ** 2).sum(axis=0) * norms2**2
    return P_d * (intra + cross_cells + (mu + s2 / (2.0 * P_d)) * norms2 + own)


def mmse_ergodic_rate(
    case: Case, p: LinkParams, draws: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Exact ergodic MMSE rate by Monte Carlo over channel draws.

    Returns (per-user mean rate, 95% normal-approximation half-width).  With
    perfect CSI the loading constant is symbol_power/noise; with estimated CSI
    the Gram matrix is built from estimate draws and the loading folds in the
    total estimation-error variance.
    """
    if draws < 100:
        raise InvalidParameterError("need at least 100 draws")
    N, U = p.num_antennas, p.num_users
    beta = p.beta if p.beta is not None else np.ones(U)
    if case.csi == "perfect":
        col_var = beta
        c = p.symbol_power / p.noise_var
    else:
        P_p = p.pilot_power
        col_var = P_p * beta**2 / (P_p * beta + p.noise_var)
        err_sum = float((beta * p.noise_var / (P_p * beta + p.noise_var)).sum())
        c = 1.0 / (err_sum + p.noise_var / p.symbol_power)
    rates = np.empty((draws, U))
    for t in range(draws):
        G = complex_normal(rng, (N, U), 1.0) * np.sqrt(col_var)
        rates[t] = np.log2(1.0 / inverse_diagonal(np.eye(U) + c * gram_matrix(G)))
    mean = rates.mean(axis=0)
    half = 1.96 * rates.std(axis=0, ddof=1) / np.sqrt(draws)
    return mean, half


def sum_rate(per_user_rates: np.ndarray, csi: str, p: LinkParams) -> float:
    """Sum over users with the training-overhead factor for estimated CSI."""
    rates = np.asarray(per_user_rates, dtype=float)
    if not np.all(np.isfinite(rates)):
        raise InvalidParameterError("per-user rates must be finite")
    factor = 1.0
    if csi == "imperfect":
        T0 = p.coherence_symbols
        factor = (T0 - p.num_pilots) / T0
    return float(factor * rates.sum())
