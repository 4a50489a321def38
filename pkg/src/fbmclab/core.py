"""Complex linear algebra kernels and reproducible random streams.

Everything here is deliberately dense-and-direct: the problem sizes in this
laboratory (N <= 1024 antennas, U <= 16 users, K <= 16 pilots) never justify
iterative or sparse methods.  All arithmetic is 64-bit; bound comparisons in
the analysis module need ~1e-3 relative accuracy over 1e5 trials, which single
precision would erode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class InvalidParameterError(ValueError):
    """An argument violates an operation's contract."""


class NumericError(RuntimeError):
    """A numerical routine failed on its input (singular / not positive definite)."""


HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class RngStream:
    """Counter-style random stream addressed by (root_seed, stream_id).

    Philox is keyed on the pair, so the draw sequence depends only on the two
    integers: identical streams reproduce bit-for-bit, distinct stream ids are
    statistically independent, and parallel trials are reproducible regardless
    of thread scheduling.
    """

    root_seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        """Fresh generator at the start of this stream (pure: same stream, same draws)."""
        key = np.array(
            [self.root_seed % (1 << 64), self.stream_id % (1 << 64)], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))


def rand_cn(stream: RngStream, n: int, variance: float = 1.0) -> np.ndarray:
    """n i.i.d. circularly symmetric complex Gaussian samples CN(0, variance).

    Real and imaginary parts each carry variance/2.  Pure in the stream: the
    same (root_seed, stream_id) always returns the same vector.
    """
    if variance <= 0:
        raise InvalidParameterError(f"variance must be positive, got {variance}")
    rng = stream.generator()
    return complex_normal(rng, n, variance)


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """CN(0, variance) array drawn from an existing generator."""
    scale = np.sqrt(np.asarray(variance) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def hermitian_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian positive definite A via Cholesky.

    Raises NumericError naming the failing pivot when A is not positive
    definite.  In debug mode (python without -O) the Hermitian precondition
    max|A - A^H| <= 1e-10 is checked.
    """
    A = np.asarray(A)
    if __debug__:
        dev = np.max(np.abs(A - A.conj().T)) if A.size else 0.0
        if dev > HERMITIAN_TOL:
            raise InvalidParameterError(
                f"matrix is not Hermitian: max|A - A^H| = {dev:.3e}"
            )
    try:
        c, low = cho_factor(A, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"matrix not positive definite: {exc}") from exc
    return cho_solve((c, low), B, check_finite=False)


def gram(G: np.ndarray) -> np.ndarray:
    """G^H G, conjugate-symmetrized so the result is exactly Hermitian."""
    A = G.conj().T @ G
    return 0.5 * (A + A.conj().T)


def inv_uu(A: np.ndarray, u: int) -> float:
    """The (u, u) entry of A^{-1} for Hermitian positive definite A."""
    n = A.shape[0]
    e = np.zeros(n)
    e[u] = 1.0
    x = hermitian_solve(A, e)
    return float(x[u].real)


def inverse_diagonal(A: np.ndarray) -> np.ndarray:
    """Diagonal of A^{-1} for Hermitian positive definite A (all entries at once)."""
    X = hermitian_solve(A, np.eye(A.shape[0], dtype=complex))
    return np.diagonal(X).real.copy()


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))
