"""Pseudo-multiplier symbols m(x, k), their difference calculus, and the
periodic-symbol pipeline.

A symbol is a function of a spatial point x and a shell index k; the
associated operator acts as f -> sum_k m(x, 2k+n) (P_k f)(x).  Symbols are
evaluated lazily and cached as (x-grid x k) tables, since the same table
feeds operator application, matrix assembly, and class-constant scans.

Finite differences in k past the truncation are defined by clamping
m(., k) = m(., kmax); the clamp region is excluded from class-constant
scans so no phantom boundary spikes appear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from hermitia import basis, spectral
from hermitia.basis import GridFunction, QuadratureGrid, UniformGrid
from hermitia.errors import ConsistencyError


def _as_points(points: np.ndarray, n: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != n:
        raise ValueError("points have wrong dimension")
    return pts


@dataclass(frozen=True)
class Symbol:
    """Tabulated/callable symbol m(x, k) with optional x-gradient.

    ``func(points, k)`` maps an (m, n) array of points and a shell index to
    an (m,) complex array; ``grad`` likewise returns (m, n).  ``x_free``
    marks symbols independent of x, which unlocks exact diagonal fast paths.
    """
    n: int
    kmax: int
    func: Callable[[np.ndarray, int], np.ndarray]
    grad: Callable[[np.ndarray, int], np.ndarray] | None = None
    x_free: bool = False
    _cache: dict = dc_field(default_factory=dict, repr=False, compare=False)

    def eval(self, points, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("shell index must be >= 0")
        pts = _as_points(points, self.n)
        out = np.asarray(self.func(pts, min(k, self.kmax)), dtype=complex)
        if not np.all(np.isfinite(out)):
            raise ValueError("symbol evaluated to a non-finite value")
        return out

    def tabulate(self, points) -> np.ndarray:
        """Table m(x_i, k) of shape (npoints, kmax+1), cached per point set."""
        pts = _as_points(points, self.n)
        key = (pts.shape, hash(pts.tobytes()))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        table = np.empty((pts.shape[0], self.kmax + 1), dtype=complex)
        for k in range(self.kmax + 1):
            table[:, k] = self.eval(pts, k)
        table.setflags(write=False)
        self._cache[key] = table
        return table

    def tabulate_grad(self, points) -> np.ndarray:
        """Gradient table of shape (npoints, n, kmax+1); requires ``grad``."""
        if self.grad is None:
            raise ValueError("symbol carries no gradient evaluator")
        pts = _as_points(points, self.n)
        table = np.empty((pts.shape[0], self.n, self.kmax + 1), dtype=complex)
        for k in range(self.kmax + 1):
            table[:, :, k] = np.asarray(self.grad(pts, k), dtype=complex)
        return table


# ---------------------------------------------------------------------------
# Built-in symbols
# ---------------------------------------------------------------------------

def symbol_one(n: int, kmax: int) -> Symbol:
    return Symbol(n, kmax, lambda p, k: np.ones(p.shape[0], complex),
                  grad=lambda p, k: np.zeros((p.shape[0], n), complex),
                  x_free=True)


def symbol_mihlin(n: int, kmax: int, power: float = 1.0) -> Symbol:
    """m(x, k) = (2k+n)^(i*power): bounded, Mihlin-type difference decay."""
    def f(p, k):
        lam = 2.0 * k + n
        return np.full(p.shape[0], lam ** (1j * power), dtype=complex)
    return Symbol(n, kmax, f,
                  grad=lambda p, k: np.zeros((p.shape[0], n), complex),
                  x_free=True)


def symbol_heat(n: int, kmax: int, t: float = 1.0) -> Symbol:
    def f(p, k):
        return np.full(p.shape[0], math.exp(-t * (2 * k + n)), dtype=complex)
    return Symbol(n, kmax, f,
                  grad=lambda p, k: np.zeros((p.shape[0], n), complex),
                  x_free=True)


def symbol_alternating(n: int, kmax: int) -> Symbol:
    """m(x, k) = (-1)^k: bounded but fails every difference-decay condition."""
    def f(p, k):
        return np.full(p.shape[0], (-1.0) ** k, dtype=complex)
    return Symbol(n, kmax, f,
                  grad=lambda p, k: np.zeros((p.shape[0], n), complex),
                  x_free=True)


def _b_one(p):
    return np.ones(p.shape[0]), np.zeros_like(p)


def _b_inverse_quadratic(p):
    r2 = np.sum(p * p, axis=1)
    b = 1.0 / (1.0 + r2)
    return b, -2.0 * p * (b * b)[:, None]


def _b_gaussian(p):
    r2 = np.sum(p * p, axis=1)
    b = np.exp(-0.5 * r2)
    return b, -p * b[:, None]


SPATIAL_FACTORS = {
    "one": _b_one,
    "inv1px2": _b_inverse_quadratic,
    "gaussian": _b_gaussian,
}


def symbol_separable(n: int, kmax: int, b_name: str, m0: Symbol) -> Symbol:
    """m(x, k) = b(x) * m0(k) for a named bounded factor b with gradient."""
    if not m0.x_free:
        raise ValueError("the shell factor of a separable symbol must be x-free")
    bfun = SPATIAL_FACTORS[b_name]

    def f(p, k):
        b, _ = bfun(p)
        return b * m0.eval(p, k)

    def g(p, k):
        _, db = bfun(p)
        return db * m0.eval(p, k)[:, None]

    return Symbol(n, kmax, f, grad=g, x_free=False)


def symbol_from_table(n: int, kmax: int, x_points, values) -> Symbol:
    """Symbol given by a table over a fixed point set (nearest-point lookup)."""
    pts = _as_points(np.asarray(x_points, float), n)
    table = np.asarray(values, complex)
    if table.shape != (pts.shape[0], kmax + 1):
        raise ValueError("table shape must be (npoints, kmax+1)")

    def f(p, k):
        d2 = np.sum((p[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        return table[np.argmin(d2, axis=1), k]

    return Symbol(n, kmax, f, x_free=False)


# ---------------------------------------------------------------------------
# Difference calculus
# ---------------------------------------------------------------------------

def delta_k(sym: Symbol, order: int) -> Symbol:
    """Iterated forward difference in the shell variable at fixed x.

    Values past the truncation are clamped, so the result is defined on all
    shells; scans that must avoid the clamp stop at kmax - order.
    """
    if order < 1:
        raise ValueError("difference order must be >= 1")
    coeff = [(-1.0) ** (order - i) * math.comb(order, i) for i in range(order + 1)]

    def f(p, k):
        acc = np.zeros(p.shape[0], dtype=complex)
        for i, c in enumerate(coeff):
            acc += c * sym.eval(p, min(k + i, sym.kmax))
        return acc

    g = None
    if sym.grad is not None:
        def g(p, k):
            acc = np.zeros((p.shape[0], sym.n), dtype=complex)
            for i, c in enumerate(coeff):
                acc += c * np.asarray(sym.grad(p, min(k + i, sym.kmax)), complex)
            return acc

    return Symbol(sym.n, sym.kmax, f, grad=g, x_free=sym.x_free)


def eigen_difference(phi: Callable, sign: str = "+", order: int = 1) -> Callable:
    """Step-2 forward/backward differences in the eigenvalue variable.

    D_+ phi(lam) = phi(lam+2) - phi(lam); D_- phi(lam) = phi(lam) - phi(lam-2).
    Returns a new callable; iterate by ``order``.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if order < 0:
        raise ValueError("order must be >= 0")
    f = phi
    for _ in range(order):
        prev = f
        if sign == "+":
            f = (lambda g: (lambda lam: g(lam + 2) - g(lam)))(prev)
        else:
            f = (lambda g: (lambda lam: g(lam) - g(lam - 2)))(prev)
    return f


@dataclass(frozen=True)
class SymbolClassReport:
    """Difference-decay constants C_j = sup |Delta^j m| (2k+n)^j over a scan.

    The sup over all of R^n is unverifiable; ``scan`` records the point set
    and shell range actually used, and constants are monotone under
    enlarging it.
    """
    order: int
    constants: np.ndarray
    grad_constants: np.ndarray | None
    scan: str
    threshold: float | None = None

    @property
    def passed(self) -> bool | None:
        if self.threshold is None:
            return None
        ok = bool(np.all(self.constants <= self.threshold))
        if self.grad_constants is not None:
            ok = ok and bool(np.all(self.grad_constants <= self.threshold))
        return ok


def default_scan_points(n: int, kmax: int, half_width: float | None = None,
                        uniform: int = 65) -> np.ndarray:
    """Quadrature nodes plus a uniform grid, the default class-check domain."""
    quad = basis.gauss_hermite(min(kmax + 1, 128), n).points()
    L = half_width if half_width is not None else math.sqrt(2 * (2 * kmax + n)) + 4
    grid = UniformGrid(half_width=L, points=uniform, n=n).grid_points()
    return np.vstack([quad, grid])


def symbol_class_check(sym: Symbol, order: int, points=None,
                       threshold: float | None = None) -> SymbolClassReport:
    """Compute C_j = sup_{x,k} |Delta^j m(x,k)| (2k+n)^j for j = 0..order.

    Differences are exact forward differences; shells within ``order`` of the
    truncation are excluded.  Gradient constants are included when the symbol
    carries a gradient evaluator.
    """
    if order > sym.kmax // 2:
        raise ValueError("difference order too large for the truncation")
    pts = _as_points(points if points is not None
                     else default_scan_points(sym.n, sym.kmax), sym.n)
    lam = spectral.eigenvalues(sym.n, sym.kmax)
    table = sym.tabulate(pts)
    consts = np.empty(order + 1)
    diff = table
    for j in range(order + 1):
        kk = lam[: sym.kmax + 1 - j] ** j
        consts[j] = np.max(np.abs(diff) * kk) if diff.size else 0.0
        diff = np.diff(diff, axis=1)
    gconsts = None
    if sym.grad is not None:
        gtab = sym.tabulate_grad(pts)
        gconsts = np.empty(order + 1)
        gdiff = gtab
        for j in range(order + 1):
            kk = lam[: sym.kmax + 1 - j] ** j
            gconsts[j] = np.max(np.abs(gdiff) * kk) if gdiff.size else 0.0
            gdiff = np.diff(gdiff, axis=2)
    scan = (f"{pts.shape[0]} points, shells 0..{sym.kmax} "
            f"(clamp region excluded per difference order)")
    return SymbolClassReport(order=order, constants=consts,
                             grad_constants=gconsts, scan=scan,
                             threshold=threshold)


# ---------------------------------------------------------------------------
# Operator application
# ---------------------------------------------------------------------------

def apply_pseudo_multiplier(sym: Symbol, f: GridFunction,
                            out_grid: QuadratureGrid | UniformGrid | None = None
                            ) -> GridFunction:
    """Apply f -> sum_{k<=kmax} m(x, k) (P_k f)(x) pointwise on the grid."""
    out_grid = f.grid if out_grid is None else out_grid
    field = spectral.analyze(f, sym.kmax)
    pts = out_grid.grid_points() if isinstance(out_grid, UniformGrid) else out_grid.points()
    pk = spectral.shell_synthesis(field, pts)          # (kmax+1, npts)
    table = sym.tabulate(pts)                          # (npts, kmax+1)
    vals = np.einsum("xk,kx->x", table, pk).reshape(out_grid.shape)
    return GridFunction(values=vals, grid=out_grid)


# ---------------------------------------------------------------------------
# Periodic symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicSymbol:
    """Bounded a(x, t), 2pi-periodic in t, sampled on t_points nodes.

    ``func(points, t_nodes)`` returns an (npoints, t_points) array.  The
    optional ``dt_func`` is the exact t-derivative; without it, derivatives
    are taken spectrally on the periodic grid.
    """
    n: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    t_points: int
    dt_func: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    x_free: bool = False

    def __post_init__(self):
        if self.t_points < 4:
            raise ValueError("need at least four t-quadrature nodes")

    @property
    def t_nodes(self) -> np.ndarray:
        return np.arange(self.t_points) * (2.0 * np.pi / self.t_points)

    def sample(self, points) -> np.ndarray:
        pts = _as_points(points, self.n)
        vals = np.asarray(self.func(pts, self.t_nodes), dtype=complex)
        if vals.shape != (pts.shape[0], self.t_points):
            raise ValueError("periodic symbol sampler returned a bad shape")
        return vals


def trig_polynomial(n: int, terms: dict[int, complex], t_points: int = 512,
                    b_name: str = "one") -> PeriodicSymbol:
    """a(x, t) = b(x) * sum_nu c_nu exp(i nu t) from a frequency table."""
    freqs = np.array(sorted(terms), dtype=float)
    coefs = np.array([terms[int(nu)] for nu in sorted(terms)], dtype=complex)
    bfun = SPATIAL_FACTORS[b_name]

    def f(p, t):
        b, _ = bfun(p)
        osc = np.exp(1j * np.outer(freqs, t))          # (nf, T)
        return np.outer(b, coefs @ osc)

    def df(p, t):
        b, _ = bfun(p)
        osc = np.exp(1j * np.outer(freqs, t))
        return np.outer(b, (coefs * 1j * freqs) @ osc)

    return PeriodicSymbol(n=n, func=f, t_points=t_points, dt_func=df,
                          x_free=(b_name == "one"))


def fourier_table(a: PeriodicSymbol, points, freqs) -> np.ndarray:
    """hat a(x, nu) = int_0^{2pi} a(x,t) exp(-i nu t) dt for integer nu >= 0.

    The rectangle rule on the periodic grid is exact for trigonometric
    content below the grid's Nyquist frequency.
    """
    freqs = np.asarray(freqs, dtype=int)
    if np.any(freqs < 0) or np.any(freqs >= a.t_points):
        raise ValueError("frequencies must lie in [0, t_points)")
    vals = a.sample(points)
    F = np.fft.fft(vals, axis=1) * (2.0 * np.pi / a.t_points)
    return F[:, freqs]


def periodic_to_symbol(a: PeriodicSymbol, kmax: int) -> Symbol:
    """Shell symbol m(x, k) = hat a(x, 2k+n) tabulated for k <= kmax.

    Requires t_points >= 4 (kmax+1) so every eigenvalue frequency 2k+n is
    resolved with margin.
    """
    if a.t_points < 4 * (kmax + 1):
        raise ValueError("t-quadrature too small for this truncation")
    n = a.n
    freqs = (2 * np.arange(kmax + 1) + n).astype(int)
    cache: dict = {}

    def f(p, k):
        key = (p.shape, hash(p.tobytes()))
        tab = cache.get(key)
        if tab is None:
            tab = fourier_table(a, p, freqs)
            cache[key] = tab
        return tab[:, k]

    return Symbol(n, kmax, f, x_free=a.x_free)


def apply_via_unitary_group(a: PeriodicSymbol, f: GridFunction, kmax: int,
                            out_grid=None, rtol: float = 1e-8,
                            cross_check: bool = True) -> GridFunction:
    """Apply hat a(x, H) f = int_0^{2pi} a(x,t) (e^{-itH} f)(x) dt by t-quadrature.

    The contract of this operation is agreement with the symbol-sum pipeline
    ``apply_pseudo_multiplier(periodic_to_symbol(a), f)`` to ``rtol``; the
    two routes are computed independently and compared unless
    ``cross_check=False``.
    """
    out_grid = f.grid if out_grid is None else out_grid
    field = spectral.analyze(f, kmax)
    pts = out_grid.grid_points() if isinstance(out_grid, UniformGrid) else out_grid.points()
    pk = spectral.shell_synthesis(field, pts)          # (kmax+1, npts)
    lam = spectral.eigenvalues(a.n, kmax)
    t = a.t_nodes
    phases = np.exp(-1j * np.outer(t, lam))            # (T, kmax+1)
    evolved = phases @ pk                              # (T, npts)
    samples = a.sample(pts)                            # (npts, T)
    vals = (2.0 * np.pi / a.t_points) * np.einsum("xt,tx->x", samples, evolved)
    vals = vals.reshape(out_grid.shape)
    out = GridFunction(values=vals, grid=out_grid)
    if cross_check:
        ref = apply_pseudo_multiplier(periodic_to_symbol(a, kmax), f, out_grid)
        scale = np.max(np.abs(ref.values)) or 1.0
        err = np.max(np.abs(out.values - ref.values)) / scale
        if err > rtol:
            raise ConsistencyError(
                f"unitary-group and symbol-sum pipelines disagree: {err:.3e}")
    return out


def fourier_difference_residual(a: PeriodicSymbol, k: int, points) -> float:
    """Residual of i k (hat a(x,k+1) - hat a(x,k)) against the Fourier
    coefficient at k of d/dt[(e^{-it}-1) a(x,t)], maximized over x.

    An exact identity for smooth periodic a; checked on the sampling grid.
    """
    if k < 0 or k + 1 >= a.t_points:
        raise ValueError("frequency out of range for the t-grid")
    pts = _as_points(points, a.n)
    hat = fourier_table(a, pts, [k, k + 1])
    lhs = 1j * k * (hat[:, 1] - hat[:, 0])
    t = a.t_nodes
    vals = a.sample(pts)
    e = np.exp(-1j * t) - 1.0
    if a.dt_func is not None:
        dvals = np.asarray(a.dt_func(pts, t), dtype=complex)
        dg = (-1j * np.exp(-1j * t))[None, :] * vals + e[None, :] * dvals
    else:
        g = vals * e[None, :]
        T = a.t_points
        freq = np.fft.fftfreq(T, d=1.0 / T)
        dg = np.fft.ifft(np.fft.fft(g, axis=1) * (1j * freq)[None, :], axis=1)
    rhs = np.fft.fft(dg, axis=1)[:, k] * (2.0 * np.pi / a.t_points)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# JSON symbol specs (the external interface used by the CLI)
# ---------------------------------------------------------------------------

def symbol_from_spec(spec: dict, n: int, kmax: int) -> Symbol | PeriodicSymbol:
    """Build a symbol from its JSON description.

    Supported types: "one", "mihlin_it" (param power), "heat" (param t),
    "alternating", "separable" (params b, m0), "table" (params x, values),
    "periodic" (params terms = [[freq, re, im], ...], b, t_points).
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError("symbol spec must be a dict with a 'type' key")
    kind = spec["type"]
    if kind == "one":
        return symbol_one(n, kmax)
    if kind == "mihlin_it":
        return symbol_mihlin(n, kmax, power=float(spec.get("power", 1.0)))
    if kind == "heat":
        return symbol_heat(n, kmax, t=float(spec.get("t", 1.0)))
    if kind == "alternating":
        return symbol_alternating(n, kmax)
    if kind == "separable":
        m0 = symbol_from_spec(spec.get("m0", {"type": "mihlin_it"}), n, kmax)
        if not isinstance(m0, Symbol):
            raise ValueError("the shell factor of a separable symbol must be "
                             "an ordinary symbol")
        return symbol_separable(n, kmax, spec.get("b", "inv1px2"), m0)
    if kind == "table":
        return symbol_from_table(n, kmax, spec["x"], spec["values"])
    if kind == "periodic":
        terms = {int(row[0]): complex(row[1], row[2] if len(row) > 2 else 0.0)
                 for row in spec.get("terms", [[1, 1.0, 0.0]])}
        return trig_polynomial(n, terms,
                               t_points=int(spec.get("t_points", 4 * (kmax + 1) + 256)),
                               b_name=spec.get("b", "one"))
    raise ValueError(f"unknown symbol type {kind!r}")
