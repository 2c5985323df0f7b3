"""Generating-curve geometry for closed surfaces of revolution r = f(x).

A surface is sampled by a ProfileGrid (a uniform interior x-lattice plus
the two tips where f = 0) together with a pair of TipCharts that hold the
local inverse graph x = g(y) near each tip, where f_x blows up and the
profile chart degenerates.

Curvature conventions (outer unit normal; a shrinking sphere has positive
curvatures):

    lambda_circ = 1 / (f sqrt(1 + f_x^2))            circumferential
    lambda_mer  = -f_xx / (1 + f_x^2)^(3/2)          meridional
    H           = Htilde / (f (1 + f_x^2)^(3/2))
    Htilde      = -f f_xx + f_x^2 + 1                parabolicity factor

Mean convexity (H > 0) is equivalent to Htilde > 0 wherever f > 0, and
Htilde is also the denominator of the graph evolution equation, so its
positivity doubles as the ellipticity check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * math.pi


class ProfileError(ValueError):
    """The sampled profile cannot be used (too coarse, non-positive, ...)."""


class MeanConvexityError(ProfileError):
    """Htilde <= 0 somewhere: the flow is undefined there."""


class TipChartError(ProfileError):
    """No monotone inverse graph of acceptable width exists at a tip."""


# ----------------------------------------------------------------------
# state containers
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileGrid:
    """Samples (x_i, f_i) of the generating curve on [a, b].

    x[0] and x[-1] are the tips (f = 0 there for a valid closed profile);
    the interior nodes x[1:-1] sit on a uniform lattice.  Once the tips
    start moving they are generally not lattice points, so the two end
    gaps may differ from the interior spacing h.
    """

    x: np.ndarray
    f: np.ndarray
    t: float = 0.0
    center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float))
        if self.x.ndim != 1 or self.x.shape != self.f.shape:
            raise ProfileError("x and f must be 1-d arrays of equal length")
        if self.x.size < 5:
            raise ProfileError("grid too coarse")
        if not np.all(np.diff(self.x) > 0):
            raise ProfileError("nodes must be strictly increasing in x")

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def a(self) -> float:
        return float(self.x[0])

    @property
    def b(self) -> float:
        return float(self.x[-1])

    @property
    def h(self) -> float:
        # interior lattice spacing; end gaps may differ from it
        return float(self.x[2] - self.x[1]) if self.n > 3 else float(self.x[1] - self.x[0])


@dataclass(frozen=True)
class TipChart:
    """Inverse graph x = g(y) on 0 <= y <= y_match near one tip.

    The y-lattice is uniform with y[0] = 0 (the tip itself, g(0) = tip
    abscissa).  `sign` is +1 for the left tip (g increasing in y) and -1
    for the right tip (g decreasing).
    """

    side: str
    y: np.ndarray
    g: np.ndarray
    y_match: float = field(default=0.0)

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise TipChartError("side must be 'left' or 'right'")
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        if self.y_match == 0.0:
            object.__setattr__(self, "y_match", float(self.y[-1]))
        step = np.diff(self.g) * self.sign
        if not np.all(step > 0):
            raise TipChartError("tip chart failure: g not monotone on the chart")

    @property
    def sign(self) -> int:
        return 1 if self.side == "left" else -1

    @property
    def m(self) -> int:
        return self.y.size

    @property
    def hy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def tip(self) -> float:
        return float(self.g[0])


@dataclass(frozen=True)
class CurvatureField:
    """Pointwise curvature data at the interior nodes of a ProfileGrid.

    lambda1 is the circumferential curvature 1/(f sqrt(1+f_x^2)) (always
    positive for f > 0), lambda2 the meridional one; they are stored in
    that geometric role order, not sorted by value.  Entries at the two
    tip nodes are NaN -- tips belong to the charts.
    """

    lambda1: np.ndarray
    lambda2: np.ndarray
    H: np.ndarray
    G: np.ndarray
    H_tilde: np.ndarray
    speed: np.ndarray | None = None


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple[str, ...]
    min_H: float
    min_support: float
    area: float
    t_predicted: float

    def __str__(self):
        if self.ok:
            return (f"ok: min H = {self.min_H:.6g}, min <F-c,nu> = {self.min_support:.6g}, "
                    f"area = {self.area:.6g}, T_predicted = {self.t_predicted:.6g}")
        return "rejected: " + "; ".join(self.failures)


# ----------------------------------------------------------------------
# finite differences
# ----------------------------------------------------------------------

def fd_profile(f, h):
    """(f_x, f_xx) on the interior of a profile sample, NaN at the tips.

    Centered stencils wherever both neighbours are interior lattice
    points; inward one-sided stencils at the two interior nodes adjacent
    to the tips, so that no stencil reads a tip node (the end gaps are
    non-uniform once the tips move, and f is sqrt-singular there anyway).
    """
    n = f.size
    fx = np.full(n, np.nan)
    fxx = np.full(n, np.nan)

    fx[2:-2] = (f[3:-1] - f[1:-3]) / (2.0 * h)
    fxx[2:-2] = (f[3:-1] - 2.0 * f[2:-2] + f[1:-3]) / (h * h)

    # one-sided ends; with >= 4 interior nodes the f_xx stencil is the
    # second-order 4-point one, otherwise fall back to the 3-point stencil
    # (exact on quadratics, first order in general)
    fx[1] = (-3.0 * f[1] + 4.0 * f[2] - f[3]) / (2.0 * h)
    fx[-2] = (3.0 * f[-2] - 4.0 * f[-3] + f[-4]) / (2.0 * h)
    if n >= 7:
        fxx[1] = (2.0 * f[1] - 5.0 * f[2] + 4.0 * f[3] - f[4]) / (h * h)
        fxx[-2] = (2.0 * f[-2] - 5.0 * f[-3] + 4.0 * f[-4] - f[-5]) / (h * h)
    else:
        fxx[1] = (f[1] - 2.0 * f[2] + f[3]) / (h * h)
        fxx[-2] = (f[-2] - 2.0 * f[-3] + f[-4]) / (h * h)
    return fx, fxx


def fd_uniform(v, h):
    """(v', v'') on a uniform lattice, second-order one-sided at both ends.

    Works on the last axis, so a stack of charts differentiates in one
    call; h may be a column vector matching the leading shape.
    """
    vy = np.empty_like(v)
    vyy = np.empty_like(v)
    h2 = h * h
    vy[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    vyy[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / h2
    hs = h[..., 0] if np.ndim(h) else h
    h2s = hs * hs
    vy[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * hs)
    vy[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * hs)
    vyy[..., 0] = (2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]) / h2s
    vyy[..., -1] = (2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]) / h2s
    return vy, vyy


def smoothstep(z):
    """C^1 ease 0 -> 1 on [0, 1] (clamped outside)."""
    z = np.clip(z, 0.0, 1.0)
    return z * z * (3.0 - 2.0 * z)


def monotone_cubic_resample(x, v, xq):
    """Shape-preserving cubic (Fritsch-Carlson) interpolation of v(x) at xq.

    Matches the classic pchip slope construction: weighted harmonic means
    in the interior, shape-limited one-sided estimates at the ends.
    Queries outside [x[0], x[-1]] return NaN.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.diff(x)
    delta = np.diff(v) / h
    n = x.size
    d = np.empty(n)
    if n == 2:
        d[:] = delta[0]
    else:
        w1 = 2.0 * h[1:] + h[:-1]
        w2 = h[1:] + 2.0 * h[:-1]
        opp = delta[:-1] * delta[1:] <= 0.0
        denom = np.where(opp, 1.0, w1 / np.where(delta[:-1] == 0, 1.0, delta[:-1])
                         + w2 / np.where(delta[1:] == 0, 1.0, delta[1:]))
        d[1:-1] = np.where(opp, 0.0, (w1 + w2) / denom)
        d[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
        d[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])

    xq = np.asarray(xq, dtype=float)
    i = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, n - 2)
    s = xq - x[i]
    hi = h[i]
    t = s / hi
    v0, v1 = v[i], v[i + 1]
    d0, d1 = d[i], d[i + 1]
    t2 = t * t
    t3 = t2 * t
    out = (v0 * (2.0 * t3 - 3.0 * t2 + 1.0) + v1 * (3.0 * t2 - 2.0 * t3)
           + hi * (d0 * (t3 - 2.0 * t2 + t) + d1 * (t3 - t2)))
    bad = (xq < x[0]) | (xq > x[-1])
    if np.any(bad):
        out = np.where(bad, np.nan, out)
    return out


def _edge_slope(h0, h1, d0, d1):
    # shape-limited three-point end slope
    d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if d * d0 <= 0.0:
        return 0.0
    if d0 * d1 < 0.0 and abs(d) > 3.0 * abs(d0):
        return 3.0 * d0
    return d


def smooth_cubic_resample(x, v, xq):
    """C^2 (not-a-knot) cubic spline interpolation of v(x) at xq.

    Used where the result is differentiated twice on a lattice finer
    than the data: a merely C^1 interpolant would leak its curvature
    jumps into the second differences.  No shape preservation; callers
    must tolerate (or check for) overshoot.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = x.size
    if n < 4:
        return monotone_cubic_resample(x, v, xq)
    h = np.diff(x)
    delta = np.diff(v) / h
    # tridiagonal system for the interior slopes, not-a-knot ends
    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    rhs = np.empty(n)
    lower[1:-1] = h[1:]
    upper[1:-1] = h[:-1]
    diag[1:-1] = 2.0 * (h[:-1] + h[1:])
    rhs[1:-1] = 3.0 * (h[1:] * delta[:-1] + h[:-1] * delta[1:])
    # not-a-knot: third derivative continuous across the 2nd and (n-1)th nodes
    diag[0] = h[1]
    upper[0] = x[2] - x[0]
    rhs[0] = ((h[0] + 2.0 * (x[2] - x[0])) * h[1] * delta[0]
              + h[0] * h[0] * delta[1]) / (x[2] - x[0])
    diag[-1] = h[-2]
    lower[-1] = x[-1] - x[-3]
    rhs[-1] = ((h[-1] + 2.0 * (x[-1] - x[-3])) * h[-2] * delta[-1]
               + h[-1] * h[-1] * delta[-2]) / (x[-1] - x[-3])
    # Thomas solve
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n - 1):
        den = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / den
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den
    den = diag[-1] - lower[-1] * cp[-2]
    dp[-1] = (rhs[-1] - lower[-1] * dp[-2]) / den
    d = np.empty(n)
    d[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        d[i] = dp[i] - cp[i] * d[i + 1]

    xq = np.asarray(xq, dtype=float)
    i = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, n - 2)
    s = xq - x[i]
    hi = h[i]
    t = s / hi
    t2 = t * t
    t3 = t2 * t
    out = (v[i] * (2.0 * t3 - 3.0 * t2 + 1.0) + v[i + 1] * (3.0 * t2 - 2.0 * t3)
           + hi * (d[i] * (t3 - 2.0 * t2 + t) + d[i + 1] * (t3 - t2)))
    bad = (xq < x[0]) | (xq > x[-1])
    if np.any(bad):
        out = np.where(bad, np.nan, out)
    return out


def derivatives(grid: ProfileGrid):
    """Second-order (f_x, f_xx) at the interior nodes (see fd_profile)."""
    if grid.n < 5:
        raise ProfileError("grid too coarse")
    return fd_profile(grid.f, grid.h)


def curvature_from_derivs(f, fx, fxx):
    """Pointwise curvature kernel: (lambda_circ, lambda_mer, H, G, Htilde)."""
    f = np.asarray(f, dtype=float)
    fx = np.asarray(fx, dtype=float)
    fxx = np.asarray(fxx, dtype=float)
    w2 = 1.0 + fx * fx
    lam1 = 1.0 / (f * np.sqrt(w2))
    lam2 = -fxx / w2 ** 1.5
    h_tilde = -f * fxx + fx * fx + 1.0
    return lam1, lam2, lam1 + lam2, lam1 * lam2, h_tilde


def principal_curvatures(grid: ProfileGrid, derivs=None) -> CurvatureField:
    """Curvatures at the interior nodes; raises if f <= 0 or Htilde <= 0."""
    fx, fxx = derivatives(grid) if derivs is None else derivs
    fi = grid.f[1:-1]
    if np.any(fi <= 0.0):
        k = int(np.argmax(fi <= 0.0)) + 1
        raise ProfileError(f"degenerate profile: f <= 0 at interior node {k} (x = {grid.x[k]:.6g})")
    lam1, lam2, H, G, h_tilde = curvature_from_derivs(fi, fx[1:-1], fxx[1:-1])
    if np.any(h_tilde <= 0.0):
        k = int(np.argmax(h_tilde <= 0.0)) + 1
        raise MeanConvexityError(
            f"mean convexity lost: Htilde <= 0 at node {k} (x = {grid.x[k]:.6g})")
    # cross-check the H identity H = Htilde / (f (1+f_x^2)^(3/2))
    w2 = 1.0 + fx[1:-1] ** 2
    h_alt = h_tilde / (fi * w2 ** 1.5)
    if not np.allclose(H, h_alt, rtol=1e-10, atol=0.0):
        raise ProfileError("curvature identity check failed (nonfinite data?)")

    def pad(v):
        out = np.full(grid.n, np.nan)
        out[1:-1] = v
        return out

    return CurvatureField(pad(lam1), pad(lam2), pad(H), pad(G), pad(h_tilde))


def support_inner(grid: ProfileGrid, fx=None):
    """<F - c, nu> at the interior nodes for the outer unit normal.

    With F = (x, f cos th, f sin th) and nu = (-f_x, cos th, sin th) /
    sqrt(1+f_x^2) this is (-(x - x0) f_x + f) / sqrt(1+f_x^2), one value
    per node by rotational invariance.  Tip entries are NaN (see
    chart_support).
    """
    if fx is None:
        fx, _ = derivatives(grid)
    out = np.full(grid.n, np.nan)
    xi = grid.x[1:-1]
    fxi = fx[1:-1]
    out[1:-1] = (-(xi - grid.center) * fxi + grid.f[1:-1]) / np.sqrt(1.0 + fxi * fxi)
    return out


# ----------------------------------------------------------------------
# tip charts
# ----------------------------------------------------------------------

def build_tip_chart(grid: ProfileGrid, side: str, y_match: float | None = None,
                    n_nodes: int = 33) -> TipChart:
    """Resample the inverse graph x = g(y) near one tip on a uniform y-grid.

    For a rounded cap the profile is interpolated as x(u) with u = f^2,
    which is then a smooth, nearly linear function (x - a ~ y^2/2g''), so
    the shape-preserving cubic stays accurate right up to the tip.  A
    conical tip (finite slope, x linear in y) is detected from the first
    few samples and interpolated as x(y) instead.  The chart extends to
    y_match (default 0.15 max f) or to just below the first break of
    monotonicity, whichever is smaller.
    """
    if y_match is None:
        y_match = 0.15 * float(np.max(grid.f))
    if side == "left":
        xs, fs = grid.x, grid.f
    else:
        xs, fs = grid.x[::-1], grid.f[::-1]

    # walk inward from the tip while f is strictly increasing
    df = np.diff(fs)
    rising = df > 0.0
    stop = int(np.argmin(rising)) if not rising.all() else rising.size
    if stop < 4:
        raise TipChartError(f"tip chart failure: profile not monotone near the {side} tip")
    f_mono = fs[: stop + 1]
    x_mono = xs[: stop + 1]
    reach = float(f_mono[-1])
    if reach < y_match:
        y_match = 0.95 * reach
    if y_match <= 0.0 or f_mono[0] >= y_match:
        raise TipChartError(f"tip chart failure: no usable width at the {side} tip")

    keep = int(np.searchsorted(f_mono, y_match)) + 1
    keep = min(max(keep + 1, 5), f_mono.size)
    fv = f_mono[:keep].copy()
    xv = x_mono[:keep].copy()
    if fv[0] != 0.0:
        # profile rows may omit the tip; extrapolate x(f^2) linearly to 0
        slope = (xv[1] - xv[0]) / (fv[1] ** 2 - fv[0] ** 2)
        xv = np.concatenate(([xv[0] - slope * fv[0] ** 2], xv))
        fv = np.concatenate(([0.0], fv))

    # cap if x grows like f^2 off the tip, cone if x grows like f; the
    # chart lattice is finer than the data, so the interpolant must be
    # C^2 or its curvature breaks leak into the chart stencils
    y = np.linspace(0.0, y_match, n_nodes)
    dx31 = (xv[3] - xv[0]) / (xv[1] - xv[0])
    err_cap = abs(math.log(abs(dx31) / (fv[3] / fv[1]) ** 2))
    err_cone = abs(math.log(abs(dx31) / (fv[3] / fv[1])))
    if err_cap <= err_cone:
        g = smooth_cubic_resample(fv * fv, xv, y * y)
    else:
        g = smooth_cubic_resample(fv, xv, y)
    if np.any(~np.isfinite(g)):
        raise TipChartError(f"tip chart failure: interpolation out of range at the {side} tip")
    return TipChart(side=side, y=y, g=g)


def chart_derivatives(chart: TipChart):
    """(g_y, g_yy) on the chart's uniform y-lattice, one-sided at both ends."""
    if chart.m < 5:
        raise TipChartError("tip chart failure: chart too coarse")
    return fd_uniform(chart.g, chart.hy)


def chart_curvatures(chart: TipChart, derivs=None):
    """(lambda_mer, lambda_circ, H) along the chart.

    In the rotated chart the meridional curvature is sigma*g_yy/(1+g_y^2)^(3/2)
    and the circumferential one sigma*g_y/(y sqrt(1+g_y^2)); at the tip node
    itself both equal the umbilic limit read through the even (axis-regular)
    extension of g, namely sigma*2(g(hy) - g(0))/hy^2.
    """
    gy, gyy = chart_derivatives(chart) if derivs is None else derivs
    sg = chart.sign
    gy_n = sg * gy      # normalized: positive for a valid chart on either side
    gyy_n = sg * gyy
    w2 = 1.0 + gy_n * gy_n
    lam_mer = gyy_n / w2 ** 1.5
    lam_circ = np.empty_like(lam_mer)
    lam_circ[1:] = gy_n[1:] / (chart.y[1:] * np.sqrt(w2[1:]))
    tip = sg * 2.0 * (chart.g[1] - chart.g[0]) / chart.hy ** 2
    lam_mer[0] = tip
    lam_circ[0] = tip
    return lam_mer, lam_circ, lam_mer + lam_circ


def chart_support(chart: TipChart, center: float, derivs=None):
    """<F - c, nu> along the chart (rotationally invariant value)."""
    gy, _ = chart_derivatives(chart) if derivs is None else derivs
    sg = chart.sign
    return (-sg * (chart.g - center) + chart.y * sg * gy) / np.sqrt(1.0 + gy * gy)


def overlap_weight(y, y_match):
    """Partition-of-unity weight of the chart on [0, y_match].

    1 on the chart-owned band y <= y_match/2, easing smoothly (C^1)
    down to 0 at y_match; the complementary weight goes to the interior
    chart.  A smooth ramp keeps the blended quadratures from modulating
    as grid nodes sweep across the band edges.
    """
    y = np.asarray(y, dtype=float)
    return smoothstep((y_match - y) / (0.5 * y_match))


# ----------------------------------------------------------------------
# blended quadratures
# ----------------------------------------------------------------------

def _interior_chart_weights(grid: ProfileGrid, charts):
    """Per-node interior weight 1 - sum of chart weights on the overlap."""
    w = np.ones(grid.n)
    for chart in charts:
        if chart is None:
            continue
        span = chart.g[-1]
        if chart.side == "left":
            mask = grid.x <= span
        else:
            mask = grid.x >= span
        if np.any(mask):
            w[mask] -= overlap_weight(grid.f[mask], chart.y_match)
    w[0] = 0.0
    w[-1] = 0.0
    return np.clip(w, 0.0, 1.0)


def _blended_integral(grid: ProfileGrid, charts, interior_integrand, chart_integrand):
    """2*pi * (weighted interior trapezoid + weighted chart trapezoids).

    `interior_integrand(f, fx)` and `chart_integrand(chart, y, Gy, Gyy)`
    return the respective densities per unit x and per unit y (the 2*pi
    factor is applied here).  Tip rows never contribute: the chart weight
    is 1 there.
    """
    fx, fxx = derivatives(grid)
    w = _interior_chart_weights(grid, charts)
    vals = np.zeros(grid.n)
    vals[1:-1] = interior_integrand(grid.f[1:-1], fx[1:-1], fxx[1:-1]) * w[1:-1]
    total = np.trapezoid(vals, grid.x)
    for chart in charts:
        if chart is None:
            continue
        gy, gyy = chart_derivatives(chart)
        sg = chart.sign
        cvals = chart_integrand(chart, chart.y, sg * gy, sg * gyy)
        cvals = cvals * overlap_weight(chart.y, chart.y_match)
        total += np.trapezoid(cvals, chart.y)
    return float(2.0 * math.pi * total)


def surface_area(grid: ProfileGrid, charts) -> float:
    """Total area 2*pi INT f sqrt(1+f_x^2) dx with tip-chart blending."""
    def interior(f, fx, fxx):
        return f * np.sqrt(1.0 + fx * fx)

    def on_chart(chart, y, gy_n, gyy_n):
        return y * np.sqrt(1.0 + gy_n * gy_n)

    return _blended_integral(grid, charts, interior, on_chart)


def gauss_bonnet_integral(grid: ProfileGrid, charts) -> float:
    """INT G dmu; equals 4*pi for any closed profile up to quadrature error."""
    def interior(f, fx, fxx):
        return -fxx / (1.0 + fx * fx) ** 1.5

    def on_chart(chart, y, gy_n, gyy_n):
        return gyy_n * gy_n / (1.0 + gy_n * gy_n) ** 1.5

    return _blended_integral(grid, charts, interior, on_chart)


def mean_curvature_sq_integral(grid: ProfileGrid, charts) -> float:
    """INT H^2 dmu (enters the area law of the eps-regularized flow)."""
    def interior(f, fx, fxx):
        h_tilde = -f * fxx + fx * fx + 1.0
        return h_tilde * h_tilde / (f * (1.0 + fx * fx) ** 2.5)

    def on_chart(chart, y, gy_n, gyy_n):
        w2 = 1.0 + gy_n * gy_n
        wt = y * gyy_n + gy_n * w2
        out = np.zeros_like(y)
        out[1:] = wt[1:] ** 2 / (y[1:] * w2[1:] ** 2.5)
        return out

    return _blended_integral(grid, charts, interior, on_chart)


# ----------------------------------------------------------------------
# initial-data validation
# ----------------------------------------------------------------------

def validate_initial(grid: ProfileGrid, charts=None) -> ValidationReport:
    """Check the shrink-to-a-round-point hypotheses on the initial profile.

    Verifies f(a) = f(b) = 0, f > 0 inside, mean convexity (Htilde > 0)
    and star-shapedness (<F - c, nu> > 0 everywhere); reports min H,
    min <F - c, nu>, the initial area mu0 and the predicted extinction
    time mu0 / 4*pi.  Any failure blocks a run.
    """
    failures = []
    f = grid.f
    tip_tol = 1e-12 * max(1.0, float(np.max(np.abs(f))))
    if abs(f[0]) > tip_tol or abs(f[-1]) > tip_tol:
        failures.append("tips not closed: f(a) and f(b) must vanish")
    if np.any(f[1:-1] <= 0.0):
        failures.append("profile not strictly positive between the tips")

    min_h = math.nan
    min_sup = math.nan
    area = math.nan
    if not failures:
        try:
            cf = principal_curvatures(grid)
        except MeanConvexityError:
            failures.append("mean convexity lost: H <= 0 somewhere")
            cf = None
        if charts is None:
            try:
                charts = (build_tip_chart(grid, "left"), build_tip_chart(grid, "right"))
            except TipChartError as exc:
                failures.append(str(exc))
                charts = (None, None)
        if cf is not None and charts[0] is not None and charts[1] is not None:
            sup = support_inner(grid)
            h_all = [cf.H[1:-1]]
            sup_all = [sup[1:-1]]
            for chart in charts:
                lam_m, lam_c, h_chart = chart_curvatures(chart)
                h_all.append(h_chart)
                sup_all.append(chart_support(chart, grid.center))
            min_h = float(min(np.min(v) for v in h_all))
            min_sup = float(min(np.min(v) for v in sup_all))
            if min_h <= 0.0:
                failures.append("mean convexity lost: H <= 0 somewhere")
            if min_sup <= 0.0:
                failures.append("not star-shaped: <F - c, nu> <= 0 somewhere")
            area = surface_area(grid, charts)

    return ValidationReport(
        ok=not failures,
        failures=tuple(failures),
        min_H=min_h,
        min_support=min_sup,
        area=area,
        t_predicted=area / FOUR_PI if math.isfinite(area) else math.nan,
    )


# ----------------------------------------------------------------------
# profile exchange format
# ----------------------------------------------------------------------

def write_profile(grid: ProfileGrid, path):
    """Two-column "x f" text file with a "# t=... center=..." header."""
    lines = [f"# t={grid.t!r} center={grid.center!r}"]
    for xv, fv in zip(grid.x, grid.f):
        lines.append(f"{float(xv)!r} {float(fv)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile(path) -> ProfileGrid:
    """Read the exchange format; tip rows (f = 0) may be present or absent.

    When the file omits the tips, their abscissas are recovered by linear
    extrapolation of f^2 (exact for a rounded cap where f ~ sqrt(x - a)).
    """
    t = 0.0
    center = 0.0
    xs, fs = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("t="):
                        t = float(token[2:])
                    elif token.startswith("center="):
                        center = float(token[7:])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ProfileError(f"malformed profile row: {line!r}")
            xs.append(float(parts[0]))
            fs.append(float(parts[1]))
    x = np.asarray(xs)
    f = np.asarray(fs)
    if x.size < 3:
        raise ProfileError("grid too coarse")
    if f[0] > 0.0:
        a = _tip_from_f2(x[0], f[0], x[1], f[1])
        x = np.concatenate(([a], x))
        f = np.concatenate(([0.0], f))
    if f[-1] > 0.0:
        b = _tip_from_f2(x[-1], f[-1], x[-2], f[-2])
        x = np.concatenate((x, [b]))
        f = np.concatenate((f, [0.0]))
    return ProfileGrid(x=x, f=f, t=t, center=center)


def _tip_from_f2(x0, f0, x1, f1):
    # zero crossing of the line through (x0, f0^2), (x1, f1^2)
    df2 = f1 * f1 - f0 * f0
    if df2 == 0.0:
        return x0 - (x1 - x0)
    return x0 - f0 * f0 * (x1 - x0) / df2
