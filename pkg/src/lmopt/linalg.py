"""Dense linear algebra primitives.

Reduced SVD with deterministic sign conventions, Newton-Schulz orthogonalization,
semi-orthogonal initializers, and a small counter-based PRNG (splitmix64 + Box-Muller)
so that every random draw is reproducible across platforms and numpy versions.
All operations are pure functions of their inputs; there is no hidden state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative cutoff below which trailing singular values are treated as rank deficiency.
RANK_RTOL = 1e-10

# Aggressive quintic coefficients for the Newton-Schulz phase. They maximize the slope
# at zero, so 5 passes lift even badly conditioned spectra, at the cost of orbiting a
# two-cycle around 1 instead of converging. Two cubic refinement passes afterwards pull
# the singular values back onto a tight band around 1.
NS_QUINTIC = (3.4445, -4.7750, 2.0315)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce input to a finite float64 2-D array, rejecting NaN/Inf and bad shapes."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def _check_dims(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be >= 1, got ({rows}, {cols})")


@dataclass(frozen=True)
class SvdResult:
    """Reduced SVD factors: u is (rows, r), sigma is (r,) nonincreasing, vt is (r, cols)."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.size)

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt

    def orthogonal_factor(self) -> np.ndarray:
        """The polar direction u @ vt, the closest semi-orthogonal matrix in the row/col span."""
        return self.u @ self.vt


def svd_reduced(a) -> SvdResult:
    """Reduced SVD, rank-truncated at RANK_RTOL relative to the largest singular value.

    Left singular vectors are sign-canonicalized (largest-magnitude entry made
    positive) so repeated calls are deterministic. Raises on an all-zero matrix;
    callers that need an lmo of zero handle that case separately.
    """
    m = as_matrix(a)
    if not m.any():
        raise ValueError("zero matrix has no reduced SVD")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    keep = s > RANK_RTOL * s[0]
    u, s, vt = u[:, keep], s[keep], vt[keep, :]
    for j in range(s.size):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0.0:
            u[:, j] = -u[:, j]
            vt[j, :] = -vt[j, :]
    return SvdResult(u=u, sigma=s, vt=vt)


def newton_schulz_orthogonalize(a, iters: int = 5) -> np.ndarray:
    """Approximate the orthogonal factor u @ vt of `a` with matrix products only.

    The input is normalized by its Frobenius norm, run through `iters` quintic
    passes x <- a*x + b*(x x^T) x + c*(x x^T)^2 x with NS_QUINTIC coefficients,
    then through two cubic refinement passes x <- 1.5 x - 0.5 (x x^T) x. For
    inputs with condition number <= 100 at desk-scale sizes the output singular
    values land well inside [0.65, 1.35]. iters=0 returns the normalized input
    unchanged; a zero matrix maps to zero by convention.
    """
    if iters < 0:
        raise ValueError(f"iters must be >= 0, got {iters}")
    m = as_matrix(a)
    if not m.any():
        return np.zeros_like(m)
    transposed = m.shape[0] > m.shape[1]
    x = m.T.copy() if transposed else m.copy()
    x /= np.linalg.norm(x)
    if iters > 0:
        ca, cb, cc = NS_QUINTIC
        for _ in range(iters):
            xxt = x @ x.T
            x = ca * x + (cb * xxt + cc * (xxt @ xxt)) @ x
        for _ in range(2):
            x = 1.5 * x - 0.5 * (x @ x.T) @ x
    return x.T if transposed else x


def _mix64_int(z: int) -> int:
    z = (z ^ (z >> 30)) * _MIX_A & _MASK64
    z = (z ^ (z >> 27)) * _MIX_B & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    """Fold indices into a seed, giving independent substreams per (seed, index...)."""
    s = int(seed) & _MASK64
    for i in indices:
        s = _mix64_int((s + ((int(i) + 1) * _GOLDEN)) & _MASK64)
    return s


def _bits(count: int, seed: int) -> np.ndarray:
    # splitmix64 in counter form: value i is mix(seed + (i+1)*GOLDEN) mod 2^64.
    s = np.uint64(int(seed) & _MASK64)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = s + idx * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


def _uniform01(count: int, seed: int) -> np.ndarray:
    # Top 53 bits shifted into (0, 1]; never 0, so log() below is safe.
    b = _bits(count, seed)
    return ((b >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def rng_gaussian(rows: int, cols: int, seed: int) -> np.ndarray:
    """Standard normal matrix via Box-Muller over the splitmix64 counter stream."""
    _check_dims(rows, cols)
    n = rows * cols
    half = (n + 1) // 2
    u = _uniform01(2 * half, seed)
    r = np.sqrt(-2.0 * np.log(u[:half]))
    theta = (2.0 * np.pi) * u[half:]
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
    return z.reshape(rows, cols)


def rng_rademacher(rows: int, cols: int, seed: int) -> np.ndarray:
    """Matrix of independent +/-1 entries, deterministic per seed."""
    _check_dims(rows, cols)
    b = _bits(rows * cols, seed)
    return (1.0 - 2.0 * (b & np.uint64(1)).astype(np.float64)).reshape(rows, cols)


def rng_permutation(n: int, seed: int) -> np.ndarray:
    """Deterministic permutation of range(n): argsort of the counter stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return np.argsort(_bits(n, seed), kind="stable")


def semi_orthogonal_init(d_out: int, d_in: int, seed: int) -> np.ndarray:
    """Semi-orthogonal (d_out, d_in) matrix from the QR factorization of a Gaussian draw.

    The Q factor's column signs are fixed with sign(diag(R)), removing the QR sign
    ambiguity. The thin dimension carries an exactly orthonormal frame: columns are
    orthonormal when d_in <= d_out, rows when d_in > d_out. Its largest singular
    value is 1, so scaling by a radius puts the matrix on that norm-ball boundary.
    """
    _check_dims(d_out, d_in)
    wide = d_in > d_out
    rows, cols = (d_in, d_out) if wide else (d_out, d_in)
    g = rng_gaussian(rows, cols, seed)
    q, r = np.linalg.qr(g)
    q = q * np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    return q.T if wide else q
