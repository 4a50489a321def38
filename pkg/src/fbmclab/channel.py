"""Random multipath channels, per-subcarrier frequency responses, large-scale
fading for single- and multi-cell layouts, time-domain propagation, and AWGN.

Two propagation modes exist side by side.  The analytic mode works directly on
the per-subcarrier model y = G b + eta (quasi-static, frequency flat across a
subcarrier) and drives every sum-rate and bound experiment.  The waveform mode
convolves actual synthesized sample streams with the taps and is used where
the flat-fading approximation error is itself the object of study (delay
spread, CFO).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import InvalidParameterError, complex_normal


def draw_taps(
    rng: np.random.Generator, num_antennas: int, num_users: int, num_taps: int
) -> np.ndarray:
    """Equal-power complex Gaussian taps, shape (N, U, L), each CN(0, 1/L).

    The 1/L normalization makes every frequency-response entry CN(0, 1), so
    the per-subcarrier channel matrices are unit variance regardless of L.
    """
    if num_taps < 1:
        raise InvalidParameterError("num_taps must be >= 1")
    return complex_normal(
        rng, (num_antennas, num_users, num_taps), 1.0 / num_taps
    )


def frequency_response(
    taps: np.ndarray, num_subcarriers: int, beta=None
) -> np.ndarray:
    """Per-subcarrier channel matrices G[m] = H[m] diag(beta)^(1/2), shape (M, N, U).

    H[m] is the tap DFT at subcarrier m; beta (length U) applies the
    large-scale gains column-wise.  beta=None means all ones.
    """
    taps = np.asarray(taps)
    L = taps.shape[-1]
    m = np.arange(num_subcarriers)
    phase = np.exp(-2j * np.pi * np.outer(m, np.arange(L)) / num_subcarriers)
    G = np.einsum("nul,ml->mnu", taps, phase)
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        if np.any(beta < 0):
            raise InvalidParameterError("large-scale gains must be non-negative")
        G = G * np.sqrt(beta)[None, None, :]
    return G


def propagate(
    user_samples: np.ndarray,
    taps: np.ndarray,
    noise_var: float,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Received per-antenna streams y[n] = sum_u s[u] * g[n, u] + noise.

    user_samples: (U, L_s); taps: (N, U, L).  Returns (N, L_s + L - 1).
    The tap count is small here, so the convolution loops over taps with
    vectorized shifts rather than going through FFTs.
    """
    s = np.atleast_2d(np.asarray(user_samples, dtype=complex))
    N, U, L = taps.shape
    if s.shape[0] != U:
        raise InvalidParameterError(f"expected {U} user streams, got {s.shape[0]}")
    Ls = s.shape[1]
    y = np.zeros((N, Ls + L - 1), dtype=complex)
    for l in range(L):
        y[:, l : l + Ls] += taps[:, :, l] @ s
    if noise_var > 0 and rng is not None:
        y += complex_normal(rng, y.shape, noise_var)
    return y


def flat_receive(
    G: np.ndarray, b: np.ndarray, noise_var: float, rng: np.random.Generator | None
) -> np.ndarray:
    """One shot of the per-subcarrier model y = G b + eta (analytic mode)."""
    G = np.asarray(G)
    b = np.asarray(b)
    if G.shape[1] != b.shape[0]:
        raise InvalidParameterError(
            f"G has {G.shape[1]} columns but b has length {b.shape[0]}"
        )
    y = G @ b
    if noise_var > 0 and rng is not None:
        y = y + complex_normal(rng, y.shape, noise_var)
    return y


# ---------------------------------------------------------------------------
# Multi-cell geometry and large-scale fading
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiCellScene:
    """Cell layout and large-scale fading seen by the observing base station.

    beta[i, u] is the gain from user u of cell i to the observing BS (cell 0);
    the home row beta[0] is identically 1.  Positions are in metres.
    """

    bs_xy: np.ndarray       # (N_c, 2)
    user_xy: np.ndarray     # (N_c, U, 2)
    beta: np.ndarray        # (N_c, U)
    cell_radius: float
    inner_radius: float
    pathloss_exp: float
    shadow_std_db: float

    @property
    def num_cells(self) -> int:
        return self.beta.shape[0]

    @property
    def num_users(self) -> int:
        return self.beta.shape[1]

    def save(self, path) -> None:
        """Structured text dump (JSON) of positions and the beta tensor."""
        doc = {
            "cell_radius_m": self.cell_radius,
            "inner_radius_m": self.inner_radius,
            "pathloss_exponent": self.pathloss_exp,
            "shadow_std_db": self.shadow_std_db,
            "bs_positions_m": self.bs_xy.tolist(),
            "user_positions_m": self.user_xy.tolist(),
            "beta": self.beta.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)


def generate_multicell_scene(
    rng: np.random.Generator,
    num_cells: int = 7,
    num_users: int = 8,
    cell_radius: float = 1000.0,
    inner_radius: float = 100.0,
    pathloss_exp: float = 3.8,
    shadow_std_db: float = 8.0,
) -> MultiCellScene:
    """Hexagonal-ring layout with users uniform in each cell's annulus.

    Interfering base stations sit on a ring of centre distance sqrt(3) * r
    around the observing cell (standard hexagonal tessellation; the layout is
    recorded in the scene so results can be audited).  Cross-cell gains are
    beta = z / (d / r_h)^nu with log-normal shadowing z (shadow_std_db in dB);
    home-cell gains are fixed at 1.
    """
    if not (cell_radius > inner_radius > 0):
        raise InvalidParameterError("need cell_radius > inner_radius > 0")
    if num_cells < 1:
        raise InvalidParameterError("num_cells must be >= 1")
    bs = np.zeros((num_cells, 2))
    ring = np.sqrt(3.0) * cell_radius
    for i in range(1, num_cells):
        ang = 2.0 * np.pi * (i - 1) / max(num_cells - 1, 1)
        bs[i] = ring * np.array([np.cos(ang), np.sin(ang)])

    # Uniform over the annulus area: radius = sqrt(U(r_h^2, r^2)).
    rad = np.sqrt(rng.uniform(inner_radius**2, cell_radius**2, (num_cells, num_users)))
    ang = rng.uniform(0.0, 2.0 * np.pi, (num_cells, num_users))
    user = bs[:, None, :] + rad[:, :, None] * np.stack(
        [np.cos(ang), np.sin(ang)], axis=-1
    )

    beta = np.ones((num_cells, num_users))
    if num_cells > 1:
        dist = np.linalg.norm(user[1:], axis=-1)  # to the observing BS at the origin
        shadow = 10.0 ** (shadow_std_db * rng.standard_normal(dist.shape) / 10.0)
        beta[1:] = shadow / (dist / inner_radius) ** pathloss_exp
    return MultiCellScene(
        bs_xy=bs,
        user_xy=user,
        beta=beta,
        cell_radius=cell_radius,
        inner_radius=inner_radius,
        pathloss_exp=pathloss_exp,
        shadow_std_db=shadow_std_db,
    )
