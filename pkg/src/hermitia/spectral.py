"""Hermite analysis/synthesis and the diagonal functional calculus.

A function f is represented by its truncated coefficient vector over the
shell-major ball enumeration, and a bounded function of the oscillator is
a table of values over shells: the operator sum_k mu_k P_k acts by
multiplying every coefficient in shell k by mu_k.  All symbol tables are
indexed by the shell k and evaluated at the eigenvalue lambda = 2k + n,
which is the convention used consistently across the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from hermitia import basis
from hermitia.basis import GridFunction, QuadratureGrid, UniformGrid
from hermitia.errors import PrecisionError


@dataclass(frozen=True)
class SpectralField:
    """Truncated Hermite coefficient vector c_alpha over {|alpha| <= kmax}."""
    coeffs: np.ndarray
    n: int
    kmax: int

    def __post_init__(self):
        if self.coeffs.shape != (basis.ball_size(self.n, self.kmax),):
            raise ValueError("coefficient vector has wrong length")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients")
        self.coeffs.setflags(write=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class DiagonalMultiplier:
    """Values mu_k for k = 0..kmax; the operator sum_k mu_k P_k."""
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("multiplier table must be a nonempty vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite multiplier values")
        self.values.setflags(write=False)

    @property
    def kmax(self) -> int:
        return self.values.size - 1

    def operator_norm(self) -> float:
        """L^2 -> L^2 norm of the truncated operator: max_k |mu_k|, exactly."""
        return float(np.max(np.abs(self.values)))


def eigenvalues(n: int, kmax: int) -> np.ndarray:
    """lambda_k = 2k + n for k = 0..kmax."""
    return 2.0 * np.arange(kmax + 1) + n


def _weighted_axis_matrix(grid: QuadratureGrid, kmax: int) -> np.ndarray:
    H = basis.hermite_functions(kmax, grid.nodes)
    return H * grid.weights


def analyze(f: GridFunction, kmax: int) -> SpectralField:
    """Hermite transform: c_alpha = int f Phi_alpha by quadrature.

    Requires f sampled on a QuadratureGrid with q >= kmax+1 per axis so that
    band-limited inputs are transformed exactly.
    """
    grid = f.grid
    if not isinstance(grid, QuadratureGrid):
        raise TypeError("analyze needs samples on a QuadratureGrid")
    if grid.q < kmax + 1:
        raise PrecisionError(
            f"quadrature size {grid.q} < kmax+1 = {kmax + 1}: transform would "
            f"not resolve the requested band")
    HW = _weighted_axis_matrix(grid, kmax)
    v = f.values
    n = grid.n
    if n == 1:
        dense = HW @ v
    elif n == 2:
        dense = np.einsum("ai,bj,ij->ab", HW, HW, v)
    else:
        dense = np.einsum("ai,bj,ck,ijk->abc", HW, HW, HW, v)
    idx = basis._ball_axis_indices(n, kmax)
    return SpectralField(coeffs=np.ascontiguousarray(dense[idx]), n=n, kmax=kmax)


def synthesize(field: SpectralField, grid: QuadratureGrid | UniformGrid) -> GridFunction:
    """Evaluate sum_alpha c_alpha Phi_alpha on the grid (left inverse of analyze)."""
    if grid.n != field.n:
        raise ValueError("grid dimension does not match field dimension")
    n, kmax = field.n, field.kmax
    dense = np.zeros((kmax + 1,) * n, dtype=complex)
    dense[basis._ball_axis_indices(n, kmax)] = field.coeffs
    H = basis.hermite_functions(kmax, grid.nodes)
    if n == 1:
        vals = H.T @ dense
    elif n == 2:
        vals = np.einsum("ai,bj,ab->ij", H, H, dense)
    else:
        vals = np.einsum("ai,bj,ck,abc->ijk", H, H, H, dense)
    return GridFunction(values=vals, grid=grid)


def apply_diagonal(mu: DiagonalMultiplier, field: SpectralField) -> SpectralField:
    """c_alpha -> mu_{|alpha|} c_alpha."""
    if mu.kmax != field.kmax:
        raise ValueError("multiplier length does not match field truncation")
    deg = basis.ball_degrees(field.n, field.kmax)
    return SpectralField(coeffs=field.coeffs * mu.values[deg],
                         n=field.n, kmax=field.kmax)


def diagonal_from_function(phi: Callable[[np.ndarray], np.ndarray],
                           n: int, kmax: int) -> DiagonalMultiplier:
    """Tabulate phi at the eigenvalues 2k+n."""
    vals = np.asarray(phi(eigenvalues(n, kmax)), dtype=complex)
    return DiagonalMultiplier(values=vals)


def heat_multiplier(t: float, n: int, kmax: int) -> DiagonalMultiplier:
    """exp(-t H) on shells: mu_k = exp(-(2k+n) t)."""
    return DiagonalMultiplier(values=np.exp(-eigenvalues(n, kmax) * t) + 0j)


def unitary_multiplier(t: float, n: int, kmax: int) -> DiagonalMultiplier:
    """exp(-i t H): mu_k = exp(-i (2k+n) t); an isometry on coefficients."""
    return DiagonalMultiplier(values=np.exp(-1j * eigenvalues(n, kmax) * t))


def dyadic_block(N: int, n: int, kmax: int) -> DiagonalMultiplier:
    """Indicator of the dyadic band 2^(N-1) <= 2k+n < 2^N (empty for N = 0)."""
    if N < 0:
        raise ValueError("dyadic index must be >= 0")
    lam = eigenvalues(n, kmax)
    if N == 0:
        vals = np.zeros(kmax + 1, dtype=complex)
    else:
        vals = ((lam >= 2.0 ** (N - 1)) & (lam < 2.0 ** N)).astype(complex)
    return DiagonalMultiplier(values=vals)


def littlewood_paley(j: int, n: int, kmax: int) -> DiagonalMultiplier:
    """Heat-difference band S_j with t_j = 2^{-j}.

    For j >= 1 the symbol is exp(-t_{j+1} lambda) - exp(-t_j lambda); the
    j = 0 piece is exp(-t_1 lambda), so that sum_{j<=N} S_j = exp(-t_{N+1} H).
    """
    if j < 0:
        raise ValueError("band index must be >= 0")
    lam = eigenvalues(n, kmax)
    if j == 0:
        vals = np.exp(-0.5 * lam)
    else:
        vals = np.exp(-2.0 ** -(j + 1) * lam) - np.exp(-2.0 ** -j * lam)
    return DiagonalMultiplier(values=vals + 0j)


def partial_sum_multiplier(N: int, n: int, kmax: int) -> DiagonalMultiplier:
    """sum_{j=0..N} S_j, accumulated term by term (telescopes to heat)."""
    acc = np.zeros(kmax + 1, dtype=complex)
    for j in range(N + 1):
        acc = acc + littlewood_paley(j, n, kmax).values
    return DiagonalMultiplier(values=acc)


def shell_synthesis(field: SpectralField, points: np.ndarray) -> np.ndarray:
    """Per-shell synthesis (P_k f)(x) for every shell at the given points.

    Returns an array of shape (kmax+1, npoints); summing over the first axis
    reproduces the full synthesis.
    """
    B = basis.ball_basis(field.n, field.kmax, points)
    weighted = field.coeffs[:, None] * B
    starts = [sl.start for sl in basis.shell_slices(field.n, field.kmax)]
    return np.add.reduceat(weighted, starts, axis=0)


def random_band_limited(rng: np.random.Generator, n: int, kmax: int,
                        band: int | None = None) -> SpectralField:
    """Random coefficients supported on shells <= band (default all)."""
    band = kmax if band is None else band
    size = basis.ball_size(n, kmax)
    c = np.zeros(size, dtype=complex)
    m = basis.ball_size(n, band)
    c[:m] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return SpectralField(coeffs=c, n=n, kmax=kmax)
