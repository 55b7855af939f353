"""Fractional Weyl derivatives, Riemann-Liouville integrals, pathwise norms and
the generalized Stieltjes integral on uniformly gridded functions.

All singular kernels are handled by product integration: the nonsingular
factor is interpolated piecewise-linearly and integrated against exact
per-cell moments of the singular weight.  Plain trapezoid rules diverge at
the kernel endpoints; the exact-moment route restores observable convergence.

Real-valued convention: the complex phases carried by the right-sided
derivative and the Stieltjes pairing cancel to a single real sign, fixed so
that integrating f = 1 returns the total increment g(T) - g(0).
"""

from __future__ import annotations

import numpy as np
from scipy.special import gamma as _gamma

from .gridfn import GridFunction, InvalidInput, as_order

__all__ = [
    "QUADRATURE_TARGET_RTOL",
    "weyl_left_derivative",
    "weyl_right_derivative",
    "rl_integral_left",
    "w_alpha_1_norm",
    "holder_functional",
    "stieltjes_integral",
]

# Default relative accuracy the product-integration rules are sized for at
# desk-scale grids (n ~ 4096); report this alongside any derived result.
QUADRATURE_TARGET_RTOL = 1e-3

# Exhaustive pair search in holder_functional up to this grid size; larger
# grids fall back to stratified rows plus a coarsened exhaustive lower bound.
_EXHAUSTIVE_LIMIT = 4096
_STRATIFIED_PAIR_BUDGET = 10**6


def _require_grid(f: GridFunction):
    if not isinstance(f, GridFunction):
        raise InvalidInput("expected a GridFunction")
    if f.n < 2:
        raise InvalidInput("degenerate grid (n < 2)")


# ---------------------------------------------------------------------------
# per-cell moments of the singular weights on a uniform grid
# ---------------------------------------------------------------------------

def _moments_power(h: float, beta: float, lags: np.ndarray):
    """Exact cell moments of the weight tau**beta over [(l-1)h, lh].

    Returns (M0, M1) with M0 = int tau^beta dtau and
    M1 = int tau^beta (lh - tau) dtau, i.e. the moment against the distance
    from the cell end closer to the singularity at tau = 0.
    """
    d1 = lags * h
    d0 = (lags - 1) * h
    p = beta + 1.0
    with np.errstate(divide="ignore"):
        M0 = (d1**p - d0**p) / p
        M1 = d1 * M0 - (d1 ** (p + 1) - d0 ** (p + 1)) / (p + 1)
    return M0, M1


def _convolve_cells(phi: np.ndarray, left_w: np.ndarray, right_w: np.ndarray):
    """Sum of per-cell contributions  sum_l left_w[l]*phi[j-l] + right_w[l]*phi[j-l+1].

    Weight arrays are indexed by lag and must carry zeros at unused lags
    (including lag 0).  Returns the array over j = 0..n-1.
    """
    n = phi.size
    cl = np.convolve(left_w, phi)[:n]
    cr = np.convolve(right_w, phi)
    out = cl.copy()
    # right-node sums live at shifted index: sum_l w[l] phi[j-l+1] = conv[j+1] - w[j+1]*phi[0]
    j = np.arange(n)
    out += cr[j + 1] - right_w[j + 1] * phi[0]
    return out


# ---------------------------------------------------------------------------
# Riemann-Liouville integral
# ---------------------------------------------------------------------------

def rl_integral_left(phi: GridFunction, alpha) -> GridFunction:
    """Left-sided fractional integral I^a phi(t) = (1/Gamma(a)) int_0^t (t-u)^(a-1) phi du.

    The kernel is integrated cell by cell against the piecewise-linear
    interpolant of phi, so constant and linear integrands are exact.
    """
    _require_grid(phi)
    a = as_order(alpha, 0.0, 1.0).require_in(0.0, 1.0)
    h, n = phi.dt, phi.n
    lags = np.arange(n + 1, dtype=float)
    M0, M1 = _moments_power(h, a - 1.0, np.maximum(lags, 1))
    left = np.where(lags >= 1, M0 - M1 / h, 0.0)
    right = np.where(lags >= 1, M1 / h, 0.0)
    vals = _convolve_cells(phi.values, left, right) / _gamma(a)
    vals[0] = 0.0
    return GridFunction(phi.t0, h, vals)


# ---------------------------------------------------------------------------
# Weyl (Marchaud-form) derivatives
# ---------------------------------------------------------------------------

def _marchaud_tail(f: np.ndarray, h: float, a: float) -> np.ndarray:
    """W_j = int_0^{t_j} (f(t_j) - f(u)) (t_j - u)^(-1-a) du for j >= 1.

    The cell touching u = t_j is integrated exactly with the local secant
    slope; the rest is separated into f(t_j)*K_j minus a product-integration
    convolution of f itself.
    """
    n = f.size
    t = h * np.arange(n)
    lags = np.arange(n + 1, dtype=float)
    N0, N1 = _moments_power(h, -a - 1.0, np.maximum(lags, 2))
    left = np.where(lags >= 2, N0 - N1 / h, 0.0)
    right = np.where(lags >= 2, N1 / h, 0.0)
    conv = _convolve_cells(f, left, right)

    W = np.zeros(n)
    j = np.arange(1, n)
    slope = (f[j] - f[j - 1]) / h
    W[1:] = slope * h ** (1.0 - a) / (1.0 - a)
    with np.errstate(divide="ignore"):
        K = (h ** (-a) - t[j] ** (-a)) / a
    W[1:] += f[j] * K - conv[j]
    # conv includes only cells with lag >= 2, i.e. exactly [0, t_{j-1}]
    return W


def weyl_left_derivative(f: GridFunction, alpha) -> GridFunction:
    """Weyl derivative D^a_{0+} f on the interior grid points t > t0.

    D^a f(t) = (1/Gamma(1-a)) [ f(t)/t^a + a int_0^t (f(t)-f(u))/(t-u)^(1+a) du ].
    """
    _require_grid(f)
    a = as_order(alpha, 0.0, 1.0).require_in(0.0, 1.0)
    h, n = f.dt, f.n
    rel = f.values
    t = h * np.arange(n)
    W = _marchaud_tail(rel, h, a)
    vals = (rel[1:] / t[1:] ** a + a * W[1:]) / _gamma(1.0 - a)
    return GridFunction(f.t0 + h, h, vals)


def weyl_right_derivative(g: GridFunction, alpha, use_T_minus_convention: bool = False) -> GridFunction:
    """Right-sided Weyl derivative on the interior grid points t < T (real convention).

    Returns D^a_{T-} g with the complex phase dropped.  With
    ``use_T_minus_convention`` the operator of order 1-a is applied to
    g_{T-}(s) = g(s) - g(T), the combination required by the Stieltjes
    pairing.
    """
    _require_grid(g)
    ord_in = as_order(alpha, 0.0, 1.0)
    if use_T_minus_convention:
        a = 1.0 - ord_in.require_in(0.0, 1.0)
        rel = g.values - g.values[-1]
    else:
        a = ord_in.require_in(0.0, 1.0)
        rel = g.values
    # reflection: D^a_{T-} g(t) = D^a_{0+} g~(T - t) with g~(s) = g(T - s)
    rev = rel[::-1].copy()
    h, n = g.dt, g.n
    t = h * np.arange(n)
    W = _marchaud_tail(rev, h, a)
    vals = (rev[1:] / t[1:] ** a + a * W[1:]) / _gamma(1.0 - a)
    return GridFunction(g.t0, h, vals[::-1])


# ---------------------------------------------------------------------------
# pathwise norms
# ---------------------------------------------------------------------------

def _abs_increment_tail(f: np.ndarray, h: float, a: float) -> np.ndarray:
    """W_j = int_0^{s_j} |f(s_j) - f(u)| (s_j - u)^(-1-a) du, row by row.

    The cell adjacent to u = s_j is excluded from the interpolation and
    replaced by the analytic correction for a locally Lipschitz f with the
    constant estimated from the two nearest samples.
    """
    n = f.size
    N0, N1 = _moments_power(h, -a - 1.0, np.arange(2, n + 1, dtype=float))
    wl = N0 - N1 / h
    wr = N1 / h
    W = np.zeros(n)
    for j in range(1, n):
        W[j] = abs(f[j] - f[j - 1]) / h * h ** (1.0 - a) / (1.0 - a)
        if j >= 2:
            d = np.abs(f[j] - f[: j])          # nodes 0..j-1
            lag = j - np.arange(j - 1)         # cells [t_k, t_k+1], k = 0..j-2
            W[j] += d[: j - 1] @ wl[lag - 2] + d[1 : j] @ wr[lag - 2]
    return W


def _weighted_endpoint_integral(vals: np.ndarray, h: float, a: float) -> float:
    """int_0^T A(s) s^(-a) ds with A piecewise linear from its node values."""
    n = vals.size
    edges = h * np.arange(n)
    s0, s1 = edges[:-1], edges[1:]
    p = 1.0 - a
    G0 = (s1**p - s0**p) / p
    G1 = (s1 ** (p + 1) - s0 ** (p + 1)) / (p + 1) - s0 * G0
    aL, aR = vals[:-1], vals[1:]
    return float(np.sum(aL * G0 + (aR - aL) * (G1 / h)))


def w_alpha_1_norm(f: GridFunction, alpha) -> float:
    """The pathwise norm |f|_{a,1} of the space W^{a,1} on f's grid span.

    |f|_{a,1} = int_0^T ( |f(s)|/s^a + int_0^s |f(s)-f(u)|/(s-u)^(1+a) du ) ds.
    """
    _require_grid(f)
    a = as_order(alpha).require_in(0.0, 0.5)
    h = f.dt
    outer_first = _weighted_endpoint_integral(np.abs(f.values), h, a)
    W = _abs_increment_tail(f.values, h, a)
    outer_second = float(np.trapezoid(W, dx=h))
    return outer_first + outer_second


def _holder_rows(g: np.ndarray, h: float, a: float, rows: np.ndarray) -> float:
    """max over s-rows in `rows` of the bracketed Holder functional."""
    n = g.size
    H0, H1 = _moments_power(h, a - 2.0, np.arange(1, n + 1, dtype=float))
    best = 0.0
    for i in rows:
        m = n - 1 - i
        if m < 1:
            continue
        d = np.abs(g[i + 1 :] - g[i])            # |g(t_k) - g(s)|, k = i+1..n-1
        lag = (h * np.arange(1, m + 1)) ** (a - 1.0)
        term1 = d * lag
        # cumulative integral int_s^t |g(u)-g(s)| (u-s)^(a-2) du
        cells = np.zeros(m)
        cells[0] = d[0] / h * h**a / a        # Lipschitz cell at u = s
        if m >= 2:
            # kernel variable is u - s, so the u-left node sits at the cell
            # end closer to the singularity and pairs with the M1/h hat
            dl = d[: m - 1]
            dr = d[1:]
            cells[1:] = dl * (H1[1:m] / h) + dr * (H0[1:m] - H1[1:m] / h)
        term2 = np.cumsum(cells)
        cand = np.max(term1 + term2)
        if cand > best:
            best = cand
    return best


def holder_functional(g: GridFunction, alpha, a_time=None, b_time=None) -> float:
    """Holder-type functional C_a(g) over the window [a_time, b_time].

    Discrete supremum over all grid pairs a < s < t < b of
    |g(t)-g(s)|/(t-s)^(1-a) + int_s^t |g(u)-g(s)|/(u-s)^(2-a) du,
    scaled by 1/(Gamma(1-a) Gamma(a)).
    """
    _require_grid(g)
    aa = as_order(alpha, 0.0, 1.0).require_in(0.0, 1.0)
    t = g.times()
    lo = g.t0 if a_time is None else float(a_time)
    hi = t[-1] if b_time is None else float(b_time)
    eps = 1e-9 * g.dt
    sel = (t >= lo - eps) & (t <= hi + eps)
    idx = np.nonzero(sel)[0]
    if idx.size < 2:
        raise InvalidInput("empty or degenerate window for holder_functional")
    win = g.values[idx[0] : idx[-1] + 1]
    n = win.size
    scale = 1.0 / (_gamma(1.0 - aa) * _gamma(aa))
    if n <= _EXHAUSTIVE_LIMIT:
        return scale * _holder_rows(win, g.dt, aa, np.arange(n - 1))

    # large grids: exhaustive on a coarsened grid (a lower bound since the
    # coarse pairs are a subset) plus stratified full-resolution rows
    stride = int(np.ceil(n / _EXHAUSTIVE_LIMIT))
    coarse = win[::stride]
    lower = _holder_rows(coarse, g.dt * stride, aa, np.arange(coarse.size - 1))
    n_rows = max(2, _STRATIFIED_PAIR_BUDGET // n)
    rows = np.unique(np.linspace(0, n - 2, n_rows).astype(int))
    sampled = _holder_rows(win, g.dt, aa, rows)
    return scale * max(lower, sampled)


# ---------------------------------------------------------------------------
# generalized Stieltjes integral
# ---------------------------------------------------------------------------

def stieltjes_integral(f: GridFunction, g: GridFunction, alpha) -> float:
    """Generalized Stieltjes integral int_0^T f dg through fractional derivatives.

    Evaluates the pairing of D^a_{0+} f with the right-sided derivative of
    order 1-a of g_{T-}; the two phase factors reduce to a real sign fixed by
    the f = 1 -> g(T) - g(0) normalization.  The s^(-a) endpoint singularity
    carried by D^a f is integrated against exact weight moments.
    """
    _require_grid(f)
    _require_grid(g)
    if not f.same_grid(g):
        raise InvalidInput("stieltjes_integral requires f and g on one grid")
    a = as_order(alpha).require_in(0.0, 0.5)
    h, n = f.dt, f.n

    # right factor R(s) on the full grid; R(T) = 0 in the limit
    R = np.zeros(n)
    R[:-1] = weyl_right_derivative(g, a, use_T_minus_convention=True).values
    # left factor split: D^a f(s) = (f(s) s^-a + a W(s)) / Gamma(1-a)
    W = _marchaud_tail(f.values, h, a)
    c = 1.0 / _gamma(1.0 - a)
    A = c * f.values * R                      # coefficient of s^-a, finite at s = 0
    B = c * a * W * R                         # continuous part, B(0) = 0
    total = _weighted_endpoint_integral(A, h, a) + float(np.trapezoid(B, dx=h))
    return -total
