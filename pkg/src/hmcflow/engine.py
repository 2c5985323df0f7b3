"""Explicit time stepping of the flow on a moving interval [a_t, b_t].

The interior chart evolves the height function,

    f_t = f_xx / Htilde - eps * Htilde / (f (1 + f_x^2)),
    Htilde = -f f_xx + f_x^2 + 1,

which is the normal speed G/H + eps*H composed with the graph factor
-sqrt(1 + f_x^2).  Each tip carries an inverse-graph chart x = g(y) that
evolves with the same normal speed,

    g_t = sigma * (Gyy Gy / W + eps W / (y (1 + Gy^2))),
    W = y Gyy + Gy (1 + Gy^2),  Gy = sigma g_y,

with sigma = +1 (left) / -1 (right); W > 0 is mean convexity read in the
chart, and the tip node itself moves with the umbilic speed taken through
the even (axis-regular) extension of g.  The charts own the tip motion
and overwrite the near-tip interior nodes through the overlap band every
step, so no profile-chart stencil ever has to resolve the sqrt-shaped
caps.

Time steps obey the stability bound of the linearized equation, whose
diffusion coefficient is (1 + f_x^2)/Htilde^2 + eps/(1 + f_x^2) in the
interior (and the chart analogue), plus a cap on the per-step tip travel.
Both charts are stacked into one (2, m) array so each step runs a fixed,
small number of vectorized passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .geometry import (
    FOUR_PI,
    MeanConvexityError,
    ProfileError,
    ProfileGrid,
    TipChart,
    build_tip_chart,
    chart_curvatures,
    fd_profile,
    fd_uniform,
    mean_curvature_sq_integral,
    monotone_cubic_resample,
    principal_curvatures,
    smooth_cubic_resample,
    surface_area,
    validate_initial,
)
from .speeds import FlowParams
from . import _kernel

TERMINATIONS = ("extinct", "mean_convexity_lost", "max_steps", "user_stop")

_SIGNS = np.array([[1.0], [-1.0]])     # row 0: left chart, row 1: right chart


class StepCollapseError(ArithmeticError):
    """The stable step shrank below dt_min without extinction triggering."""


@dataclass
class EvolveResult:
    final_time: float
    termination: str
    t_predicted: float
    t_convex: float | None
    series: list
    snapshots: list
    monitors: dict = field(default_factory=dict)
    steps: int = 0

    def summary(self) -> dict:
        out = {
            "termination": self.termination,
            "final_time": self.final_time,
            "T_predicted": self.t_predicted,
            "t_convex": self.t_convex if self.t_convex is not None else "none",
            "steps": self.steps,
        }
        for key in sorted(self.monitors):
            out[f"monitor.{key}"] = self.monitors[key]
        return out


# ----------------------------------------------------------------------
# stacked chart state
# ----------------------------------------------------------------------

class _ChartPack:
    """Both tip charts as (2, m) arrays; row 0 = left, row 1 = right."""

    __slots__ = ("y", "g", "ym", "hy", "u")

    def __init__(self, y, g, ym, hy, u=None):
        self.y = y          # (2, m) lattice heights
        self.g = g          # (2, m) abscissas
        self.ym = ym        # (2,) chart widths
        self.hy = hy        # (2, 1) lattice spacings
        self.u = y * y if u is None else u   # cached squared heights

    @classmethod
    def from_charts(cls, left: TipChart, right: TipChart):
        if left.m != right.m:
            raise ValueError("tip charts must share a node count to stack")
        y = np.stack([left.y, right.y])
        g = np.stack([left.g, right.g])
        ym = np.array([left.y_match, right.y_match])
        hy = np.array([[left.hy], [right.hy]])
        return cls(y, g, ym, hy)

    def charts(self):
        return (TipChart(side="left", y=self.y[0], g=self.g[0], y_match=self.ym[0]),
                TipChart(side="right", y=self.y[1], g=self.g[1], y_match=self.ym[1]))


# ----------------------------------------------------------------------
# pointwise systems
# ----------------------------------------------------------------------

def _fd_interior(f, h):
    """(f_x, f_xx) over interior nodes only (length n-2), inward one-sided
    at the two nodes adjacent to the tips."""
    h2 = h * h
    fx = np.empty(f.size - 2)
    fxx = np.empty(f.size - 2)
    fx[1:-1] = (f[3:-1] - f[1:-3]) / (2.0 * h)
    fxx[1:-1] = (f[3:-1] - 2.0 * f[2:-2] + f[1:-3]) / h2
    fx[0] = (-3.0 * f[1] + 4.0 * f[2] - f[3]) / (2.0 * h)
    fx[-1] = (3.0 * f[-2] - 4.0 * f[-3] + f[-4]) / (2.0 * h)
    fxx[0] = (2.0 * f[1] - 5.0 * f[2] + 4.0 * f[3] - f[4]) / h2
    fxx[-1] = (2.0 * f[-2] - 5.0 * f[-3] + 4.0 * f[-4] - f[-5]) / h2
    return fx, fxx


def _interior_system(x, f, h, eps):
    """Interior derivatives, Htilde, df/dt and the diffusion coefficient."""
    fi = f[1:-1]
    if fi.min() <= 0.0:
        k = int(np.argmax(fi <= 0.0)) + 1
        raise ProfileError(f"degenerate profile: f <= 0 at node {k} (x = {x[k]:.6g})")
    fx, fxx = _fd_interior(f, h)
    h_tilde = -fi * fxx + fx * fx + 1.0
    if h_tilde.min() <= 0.0:
        k = int(np.argmax(h_tilde <= 0.0)) + 1
        raise MeanConvexityError(
            f"mean convexity lost: Htilde <= 0 at node {k} (x = {x[k]:.6g})")
    w2 = 1.0 + fx * fx
    rhs = fxx / h_tilde
    dcoef = w2 / (h_tilde * h_tilde)
    if eps != 0.0:
        rhs = rhs - eps * h_tilde / (fi * w2)
        dcoef = dcoef + eps / w2
    return fx, fxx, h_tilde, rhs, dcoef


def tip_second_derivative(g, sign, hy):
    """Axis-regular g_yy at the tip: even reflection through y = 0.

    The surface is rotationally symmetric, so g extends evenly in y and
    the tip gets the centered stencil 2 (g1 - g0)/hy^2 (exact limit for a
    rounded cap, where g_y(0) = 0).  A one-sided stencil here is
    anti-diffusive: a lagging tip flattens its own measured curvature and
    stalls.
    """
    return sign * 2.0 * (g[..., 1] - g[..., 0]) / (hy * hy)


def _chart_system(pack: _ChartPack, eps):
    """Vectorized chart derivatives, motion rate phi (g_t = sign*phi) and
    diffusion coefficient over both charts."""
    y, g, hy = pack.y, pack.g, pack.hy
    gy, gyy = fd_uniform(g, hy)
    gy_n = _SIGNS * gy
    gyy_n = _SIGNS * gyy
    gy_n[:, 0] = 0.0
    gyy_n[:, 0] = tip_second_derivative(g, _SIGNS[:, 0], hy[:, 0])
    w2 = 1.0 + gy_n * gy_n
    wt = y * gyy_n + gy_n * w2
    # the two outermost nodes are slaved to the interior after each step;
    # they carry junction noise and no dynamics of their own, so they are
    # excluded from the convexity check and the stability bound
    if wt[:, 1:-2].min() <= 0.0:
        r, k = np.unravel_index(int(np.argmax(wt[:, 1:-2] <= 0.0)), wt[:, 1:-2].shape)
        raise MeanConvexityError(
            f"mean convexity lost on the {'left' if r == 0 else 'right'} tip chart "
            f"(y = {y[r, k + 1]:.6g})")
    phi = np.empty_like(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi[:, 1:] = gyy_n[:, 1:] * gy_n[:, 1:] / wt[:, 1:]
    phi[:, 0] = 0.5 * gyy_n[:, 0]
    dcoef = np.zeros_like(g)
    dcoef[:, 1:-2] = gy_n[:, 1:-2] ** 2 * w2[:, 1:-2] / (wt[:, 1:-2] * wt[:, 1:-2])
    dcoef[:, 0] = 0.5
    if eps != 0.0:
        phi[:, 1:] += eps * wt[:, 1:] / (y[:, 1:] * w2[:, 1:])
        phi[:, 0] += 2.0 * eps * gyy_n[:, 0]
        dcoef[:, 1:-2] += eps / w2[:, 1:-2]
        dcoef[:, 0] += 3.0 * eps
    return gy_n, gyy_n, wt, phi, dcoef


# ----------------------------------------------------------------------
# public per-operation views
# ----------------------------------------------------------------------

def rhs_interior(grid: ProfileGrid, params: FlowParams):
    """df/dt at the interior nodes (NaN at the tips)."""
    _, _, _, rhs, _ = _interior_system(grid.x, grid.f, grid.h, params.epsilon)
    out = np.full(grid.n, np.nan)
    out[1:-1] = rhs
    return out


def _pack_single(chart: TipChart):
    # mirror a lone chart into the opposite row so the stacked kernel applies
    mirror = 2.0 * chart.g[0] - chart.g
    if chart.side == "left":
        g = np.stack([chart.g, mirror])
    else:
        g = np.stack([mirror, chart.g])
    y = np.stack([chart.y, chart.y])
    ym = np.array([chart.y_match, chart.y_match])
    hy = np.array([[chart.hy], [chart.hy]])
    return _ChartPack(y, g, ym, hy)


def rhs_tip(chart: TipChart, params: FlowParams):
    """dg/dt along a tip chart, tip node included (umbilic limit there)."""
    pack = _pack_single(chart)
    _, _, _, phi, _ = _chart_system(pack, params.epsilon)
    row = 0 if chart.side == "left" else 1
    return chart.sign * phi[row]


def stable_dt(grid: ProfileGrid, params: FlowParams, charts=(), dt_min=None):
    """Largest explicit step allowed by the linearized parabolic bound.

    dt = dt_safety * h^2 / (2 max dcoef) over the interior nodes, taken
    together with the analogous chart bounds and a cap keeping each tip
    chart from moving more than a fifth of a lattice cell per step.
    """
    h = grid.h
    _, _, _, _, dcoef = _interior_system(grid.x, grid.f, h, params.epsilon)
    dt = params.dt_safety * h * h / (2.0 * float(dcoef.max()))
    live = [c for c in charts if c is not None]
    if live:
        if len(live) == 2:
            pack = _ChartPack.from_charts(live[0], live[1])
        else:
            pack = _pack_single(live[0])
        _, _, _, phi, dch = _chart_system(pack, params.epsilon)
        bound = (params.dt_safety * pack.hy[:, 0] ** 2 / (2.0 * dch.max(axis=1))).min()
        dt = min(dt, float(bound))
        top = float(np.abs(phi[:, :-2]).max())
        if top > 0.0:
            dt = min(dt, 0.2 * h / top)
    if dt_min is not None and dt < dt_min:
        raise StepCollapseError(
            f"step collapse: stable dt {dt:.3e} fell below dt_min {dt_min:.3e}")
    return dt


# ----------------------------------------------------------------------
# one explicit step
# ----------------------------------------------------------------------

_SLAVE_FRAC = 0.7    # interior nodes below this fraction of the chart width
                     # are slaved to the chart; above it the interior is free


def _sync_from_charts(x, f, pack: _ChartPack):
    """Overwrite the stencil-critical near-tip interior nodes from the charts.

    The profile lattice cannot differentiate the sqrt-shaped caps over
    the first few nodes, so interior nodes below _SLAVE_FRAC of the chart
    width are slaved to the chart every step (the inversion interpolates
    u = y^2 against g, smooth through a rounded cap); they serve only as
    stencil fodder for the free nodes above.  The chart's upper band is
    left to the (there more accurate) interior dynamics; its outer
    boundary reads back off the interior through the slaved pair.  Returns
    (k_left, k_right): the interior index range [k_left, k_right)
    evolving free of the charts.
    """
    n = x.size
    u0 = pack.u[0]
    edge = float(np.interp((_SLAVE_FRAC * pack.ym[0]) ** 2, u0, pack.g[0]))
    k_left = int(np.searchsorted(x, edge))
    if k_left > 1:
        k_left = min(k_left, n - 2)
        u = np.interp(x[1:k_left], pack.g[0], u0)
        f[1:k_left] = np.sqrt(u)
    else:
        k_left = 1
    u1 = pack.u[1]
    edge = float(np.interp((_SLAVE_FRAC * pack.ym[1]) ** 2, u1, pack.g[1]))
    k_right = int(np.searchsorted(x, edge, side="right"))
    if k_right < n - 1:
        k_right = max(k_right, 2)
        u = np.interp(x[k_right:-1], pack.g[1, ::-1], u1[::-1])
        f[k_right:-1] = np.sqrt(u)
    else:
        k_right = n - 1
    return k_left, k_right


def _chart_width(f, params, side=None):
    """Chart width: a fixed, resolution-aware fraction of max f.

    Near a rounded cap f ~ sqrt(2R(x-a)), so the K lattice nodes closest
    to a tip cannot be differentiated accurately in the profile chart;
    the inverse chart must own them outright or their truncation error
    accumulates without bound.  Covering K nodes of a cap of radius
    ~ max f needs the fraction sqrt(4K/(n-1)), which is self-similar as
    the surface shrinks; keeping the fraction constant through the run
    (rather than probing node heights) keeps the chart lattice from
    drifting and feeding sampling noise into the monitored extrema.
    """
    n = f.size
    frac = math.sqrt(4.0 * params.tip_cover_nodes / max(n - 1, 1))
    frac = min(0.5, max(params.y_match_frac, 1.05 * frac))
    return frac * float(f.max())


def _chart_nodes(ym, h, params):
    """Chart node count: lattice about half as dense as the interior's.

    The chart only hands the interior its lowest band (below the slave
    fraction), where it is tip-anchored and accurate at any density;
    half spacing keeps the chart's parabolic dt bound from tightening
    the step far below the interior one.
    """
    return max(params.tip_nodes, min(129, int(0.5 * ym / h) + 1))


def _cubic_interp(xd, vd, xq):
    """Vectorized 4-point Lagrange interpolation (xd ascending)."""
    j = np.clip(np.searchsorted(xd, xq) - 2, 0, xd.size - 4)
    x0, x1, x2, x3 = xd[j], xd[j + 1], xd[j + 2], xd[j + 3]
    v0, v1, v2, v3 = vd[j], vd[j + 1], vd[j + 2], vd[j + 3]
    w0 = (xq - x1) * (xq - x2) * (xq - x3) / ((x0 - x1) * (x0 - x2) * (x0 - x3))
    w1 = (xq - x0) * (xq - x2) * (xq - x3) / ((x1 - x0) * (x1 - x2) * (x1 - x3))
    w2 = (xq - x0) * (xq - x1) * (xq - x3) / ((x2 - x0) * (x2 - x1) * (x2 - x3))
    w3 = (xq - x0) * (xq - x1) * (xq - x2) / ((x3 - x0) * (x3 - x1) * (x3 - x2))
    return w0 * v0 + w1 * v1 + w2 * v2 + w3 * v3


def _slave_chart_outer(x, f, pack: _ChartPack):
    """Slave each chart's two outermost nodes onto the interior profile.

    The charts are overset grids: the interior reads its near-tip nodes
    from the charts, and each chart reads its outer boundary back off
    the interior, where the profile lattice is trusted.  Two slaved
    nodes leave every evolved chart node with a centered stencil -- a
    free boundary node evolving through its own one-sided g_yy estimate
    is anti-diffusive and runs away.  Cubic interpolation in u = f^2
    keeps the pair mutually consistent to high order.
    """
    n = x.size
    for row in (0, 1):
        # 10-node window of interior data straddling the chart's outer edge
        if row == 0:
            j = int(np.searchsorted(x, pack.g[0, -1]))
            sl = slice(max(1, j - 5), min(n - 1, j + 5))
            xs = x[sl]
            fs = f[sl]
        else:
            j = int(np.searchsorted(x, pack.g[1, -1]))
            sl = slice(max(1, j - 5), min(n - 1, j + 5))
            xs = x[sl][::-1]
            fs = f[sl][::-1]
        us = fs * fs
        if us.size < 4 or np.any(us[1:] <= us[:-1]):
            continue
        uq = pack.u[row, -2:]
        if uq[1] > us[-1] or uq[0] < us[0]:
            continue
        pack.g[row, -2:] = _cubic_interp(us, xs, uq)


def _refit(x, f, pack: _ChartPack, params):
    """Regrid to a uniform lattice on [a, b] and rebuild the tip charts.

    Interior values come from a shape-preserving cubic through the live
    nodes, overridden near the tips by the (there more accurate) chart
    representation.  Charts are resampled from their own history at the
    fresh width; the per-step outer slaving keeps them glued to the
    interior in between.
    """
    n = x.size
    x_new = np.linspace(x[0], x[-1], n)
    f_new = monotone_cubic_resample(x, f, x_new)
    f_new[0] = 0.0
    f_new[-1] = 0.0
    k_l, k_r = _sync_from_charts(x_new, f_new, pack)
    np.maximum(f_new, 0.0, out=f_new)
    f_new[0] = 0.0
    f_new[-1] = 0.0

    ym = min(_chart_width(f_new, params), float(pack.ym.min()))
    # track the interior spacing with hysteresis: frequent node-count
    # changes would re-space every chart sample between records
    m = pack.y.shape[1]
    m_want = _chart_nodes(ym, x_new[2] - x_new[1], params)
    if abs(m_want - m) >= 8:
        m = m_want
    y_row = np.linspace(0.0, ym, m)
    y_new = np.stack([y_row, y_row])
    g_new = np.stack([
        smooth_cubic_resample(pack.y[0] ** 2, pack.g[0], y_row ** 2),
        smooth_cubic_resample(pack.y[1] ** 2, pack.g[1], y_row ** 2),
    ])
    ym_new = np.array([ym, ym])
    hy_new = (y_new[:, 1] - y_new[:, 0]).reshape(2, 1)
    pack_new = _ChartPack(y_new, g_new, ym_new, hy_new)
    _slave_chart_outer(x_new, f_new, pack_new)
    return x_new, f_new, pack_new


def _advance(x, f, t, h, pack: _ChartPack, params, dt_min):
    """One explicit Euler step; returns the new state plus step info."""
    eps = params.epsilon
    fx, fxx, h_tilde, rhs, dcoef = _interior_system(x, f, h, eps)
    gy_n, gyy_n, wt, phi, dch = _chart_system(pack, eps)

    dt = params.dt_safety * h * h / (2.0 * float(dcoef.max()))
    bound = (params.dt_safety * pack.hy[:, 0] ** 2 / (2.0 * dch.max(axis=1))).min()
    dt = min(dt, float(bound))
    top = float(np.abs(phi[:, :-2]).max())
    if top > 0.0:
        dt = min(dt, 0.2 * h / top)
    if dt < dt_min:
        raise StepCollapseError(
            f"step collapse: stable dt {dt:.3e} fell below dt_min {dt_min:.3e}")

    f2 = f.copy()
    f2[1:-1] += dt * rhs
    g2 = pack.g + (dt * _SIGNS) * phi
    pack2 = _ChartPack(pack.y, g2, pack.ym, pack.hy, u=pack.u)
    x2 = x.copy()
    x2[0] = g2[0, 0]
    x2[-1] = g2[1, 0]
    if x2[0] >= x2[1] or x2[-1] <= x2[-2]:
        raise ProfileError("tip crossed the first interior node; regrid overdue")

    _slave_chart_outer(x2, f2, pack2)
    k_l, k_r = _sync_from_charts(x2, f2, pack2)
    info = {
        "dt": dt,
        "fx": fx, "fxx": fxx, "h_tilde": h_tilde,
        "k_left": k_l, "k_right": k_r,
        "max_fxx_trusted": float(fxx[k_l - 1:k_r - 1].max()) if k_r > k_l else -math.inf,
        "min_gyy_chart": float(gyy_n.min()),
    }
    return x2, f2, t + dt, pack2, info


def _needs_refit(x, h, tol):
    gap_l = x[1] - x[0]
    gap_r = x[-1] - x[-2]
    return abs(gap_l - h) > tol * h or abs(gap_r - h) > tol * h


def step(grid: ProfileGrid, charts, params: FlowParams, dt_min=0.0):
    """One explicit step: Euler update, tip motion, sync, optional regrid.

    Returns the advanced (grid, charts).  Raises MeanConvexityError if the
    state (before or after the update) violates Htilde > 0, naming the
    offending node.
    """
    pack = _ChartPack.from_charts(charts[0], charts[1])
    x2, f2, t2, pack2, _ = _advance(grid.x, grid.f, grid.t, grid.h, pack,
                                    params, dt_min)
    if _needs_refit(x2, grid.h, params.regrid_distortion):
        x2, f2, pack2 = _refit(x2, f2, pack2, params)
    grid2 = ProfileGrid(x=x2, f=f2, t=t2, center=grid.center)
    charts2 = pack2.charts()
    # post-step verification: the updated state must still be usable
    _interior_system(grid2.x, grid2.f, grid2.h, params.epsilon)
    return grid2, charts2


# ----------------------------------------------------------------------
# full evolution
# ----------------------------------------------------------------------

def _overlap_mismatch(x, f, pack: _ChartPack):
    """max |g(f(x)) - x| over the overlap bands (chart consistency)."""
    worst = 0.0
    for row in (0, 1):
        y, g, ym = pack.y[row], pack.g[row], pack.ym[row]
        if row == 0:
            k = int(np.searchsorted(x, g[-1]))
            sel = slice(1, max(k, 1))
        else:
            k = int(np.searchsorted(x, g[-1], side="right"))
            sel = slice(min(k, x.size - 1), x.size - 1)
        fs = f[sel]
        band = (fs >= 0.5 * ym) & (fs <= ym)
        if not np.any(band):
            continue
        gx = np.interp(fs[band] ** 2, y * y, g)
        worst = max(worst, float(np.max(np.abs(gx - x[sel][band]))))
    return worst


def evolve(grid: ProfileGrid, params: FlowParams, record_every: int = 100,
           snapshot_times=(), max_steps: int | None = None,
           stop=None) -> EvolveResult:
    """Run the flow until the surface area drops to the extinction floor.

    Records a DiagRecord every `record_every` steps, captures profile
    snapshots the first time t passes each entry of `snapshot_times`,
    and tracks the first time the profile is convex everywhere
    (t_convex).  Termination is "extinct" (area <= floor),
    "mean_convexity_lost", "max_steps" or "user_stop" (the optional
    `stop(grid)` callback returned True).
    """
    report = validate_initial(grid)
    if not report.ok:
        raise ProfileError("initial data rejected: " + "; ".join(report.failures))
    mu0 = report.area
    t_pred = report.t_predicted
    floor = params.area_floor if params.area_floor is not None \
        else params.area_floor_frac * mu0
    dt_min = params.dt_min_frac * t_pred

    ym0 = _chart_width(grid.f, params)
    m0 = _chart_nodes(ym0, grid.h, params)
    pack = _ChartPack.from_charts(
        build_tip_chart(grid, "left", y_match=ym0, n_nodes=m0),
        build_tip_chart(grid, "right", y_match=ym0, n_nodes=m0),
    )
    x = grid.x.copy()
    f = grid.f.copy()
    t = float(grid.t)
    h = grid.h
    center = grid.center

    snap_times = sorted(float(s) for s in snapshot_times)
    for s in snap_times:
        if not 0.0 <= s < t_pred:
            raise ValueError(f"snapshot time {s} outside [0, T_predicted)")

    def materialize():
        g_now = ProfileGrid(x=x.copy(), f=f.copy(), t=t, center=center)
        return g_now, pack.charts()

    series = []
    snapshots = []
    g0, c0 = materialize()
    series.append(diagnostics.record(g0, c0, params, None))
    snapshots_due = list(snap_times)
    if snapshots_due and snapshots_due[0] <= t:
        snapshots.append(g0)
        snapshots_due.pop(0)

    nonconvex0 = _min_f_nonconvex(g0, c0)
    lam1_nc0 = _max_lam1_nonconvex(g0, c0)
    monitors = {
        "maxf_step_increase_worst": -math.inf,
        "overlap_mismatch_worst": 0.0,
        "lem_lower_c0": 0.5 * nonconvex0 if math.isfinite(nonconvex0) else math.inf,
        "f_nonconvex_min_run": nonconvex0,
        "lambda1_nonconvex_max_t0": lam1_nc0,
        "lambda1_nonconvex_max_run": lam1_nc0,
    }

    area = mu0
    area_est = mu0
    h2_last = series[0].h2_integral
    termination = "max_steps"
    t_convex = None if series[0].lambda2_min < 0.0 else t
    steps = 0
    check_every = 16
    max_f_prev = float(f.max())
    since_refit = 10 ** 9
    record_due = False

    fast = _kernel.HAVE_NUMBA
    out = np.zeros(8)

    def _buffers():
        m = pack.y.shape[1]
        return {"rhs": np.zeros(x.size), "fxx": np.zeros(x.size),
                "phi": np.zeros((2, m)), "x2": np.zeros(x.size),
                "f2": np.zeros(x.size), "g2": np.zeros((2, m))}

    buf = _buffers() if fast else None

    try:
        while True:
            if max_steps is not None and steps >= max_steps:
                termination = "max_steps"
                break
            if fast:
                _kernel.step_kernel(x, f, pack.g, pack.y, pack.u, pack.ym,
                                    pack.hy[:, 0], params.epsilon,
                                    params.dt_safety, dt_min,
                                    buf["rhs"], buf["fxx"], buf["phi"],
                                    buf["x2"], buf["f2"], buf["g2"], out)
                status = int(out[0])
                if status == 1:
                    raise MeanConvexityError(
                        f"mean convexity lost: Htilde <= 0 at node {int(out[6])}")
                if status == 2:
                    raise ProfileError(
                        f"degenerate profile: f <= 0 at node {int(out[6])}")
                if status == 3:
                    raise MeanConvexityError("mean convexity lost on a tip chart")
                if status == 4:
                    raise ProfileError("tip crossed the first interior node")
                if status == 5:
                    raise StepCollapseError(
                        f"step collapse: stable dt {out[1]:.3e} fell below "
                        f"dt_min {dt_min:.3e}")
                x, buf["x2"] = buf["x2"], x
                f, buf["f2"] = buf["f2"], f
                g_new, buf["g2"] = buf["g2"], pack.g
                pack = _ChartPack(pack.y, g_new, pack.ym, pack.hy, u=pack.u)
                t = t + float(out[1])
                info = {"dt": float(out[1]), "k_left": int(out[2]),
                        "k_right": int(out[3]), "max_fxx_trusted": out[4],
                        "min_gyy_chart": out[5]}
                max_f_now = float(out[7])
            else:
                x, f, t, pack, info = _advance(x, f, t, h, pack, params, dt_min)
                max_f_now = float(f.max())
            steps += 1
            since_refit += 1
            dt = info["dt"]

            gain = max_f_now - max_f_prev
            if gain > monitors["maxf_step_increase_worst"]:
                monitors["maxf_step_increase_worst"] = gain
            max_f_prev = max_f_now

            if t_convex is None and info["max_fxx_trusted"] <= 0.0 \
                    and info["min_gyy_chart"] >= 0.0:
                t_convex = t

            if _needs_refit(x, h, params.regrid_distortion):
                m_old = pack.y.shape[1]
                x, f, pack = _refit(x, f, pack, params)
                h = x[2] - x[1]
                max_f_prev = float(f.max())
                since_refit = 0
                if fast and pack.y.shape[1] != m_old:
                    buf = _buffers()

            area_est -= dt * (FOUR_PI + params.epsilon * h2_last)
            if steps % check_every == 0 or area_est <= 1.3 * floor:
                g_now, c_now = materialize()
                area = surface_area(g_now, c_now)
                area_est = area
                if params.epsilon != 0.0:
                    h2_last = mean_curvature_sq_integral(g_now, c_now)
                if area <= floor:
                    termination = "extinct"
                    break

            if steps % record_every == 0:
                record_due = True
            # records wait out the few-step transient a chart rebuild
            # leaves behind, so each slice samples a settled state
            if record_due and since_refit >= 12:
                record_due = False
                g_now, c_now = materialize()
                rec = diagnostics.record(g_now, c_now, params, series[-1])
                series.append(rec)
                h2_last = rec.h2_integral
                monitors["overlap_mismatch_worst"] = max(
                    monitors["overlap_mismatch_worst"],
                    _overlap_mismatch(x, f, pack))
                monitors["f_nonconvex_min_run"] = min(
                    monitors["f_nonconvex_min_run"], _min_f_nonconvex(g_now, c_now))
                monitors["lambda1_nonconvex_max_run"] = max(
                    monitors["lambda1_nonconvex_max_run"],
                    _max_lam1_nonconvex(g_now, c_now))

            while snapshots_due and t >= snapshots_due[0]:
                snapshots.append(materialize()[0])
                snapshots_due.pop(0)

            if stop is not None and stop(materialize()[0]):
                termination = "user_stop"
                break
    except MeanConvexityError:
        termination = "mean_convexity_lost"

    if termination != "mean_convexity_lost":
        try:
            g_fin, c_fin = materialize()
            series.append(diagnostics.record(g_fin, c_fin, params, series[-1]))
            monitors["final_area"] = area if termination == "extinct" else \
                surface_area(g_fin, c_fin)
        except ProfileError:
            # the last sliver of surface can defeat the quadratures; the
            # series up to here is intact
            monitors["final_area"] = area
    else:
        monitors["final_area"] = math.nan

    amax_scaled = max((r.amax * math.sqrt(max(t_pred - r.t, 0.0))
                       for r in series), default=math.nan)
    monitors["amax_sqrt_T_minus_t_max"] = amax_scaled

    return EvolveResult(
        final_time=t,
        termination=termination,
        t_predicted=t_pred,
        t_convex=t_convex,
        series=series,
        snapshots=snapshots,
        monitors=monitors,
        steps=steps,
    )


def _min_f_nonconvex(grid, charts):
    """min f over points where the meridional curvature is negative."""
    fx, fxx = fd_profile(grid.f, grid.h)
    vals = []
    neg = fxx[1:-1] > 0.0
    if np.any(neg):
        vals.append(float(np.min(grid.f[1:-1][neg])))
    for chart in charts:
        lam_m, _, _ = chart_curvatures(chart)
        neg = lam_m < 0.0
        if np.any(neg):
            vals.append(float(np.min(chart.y[neg])))
    return min(vals) if vals else math.inf


def _max_lam1_nonconvex(grid, charts):
    """max (sorted) lambda1 over points with lambda2 <= 0."""
    try:
        cf = principal_curvatures(grid)
    except ProfileError:
        return math.nan
    hi = np.maximum(cf.lambda1[1:-1], cf.lambda2[1:-1])
    lo = np.minimum(cf.lambda1[1:-1], cf.lambda2[1:-1])
    vals = []
    if np.any(lo <= 0.0):
        vals.append(float(np.max(hi[lo <= 0.0])))
    for chart in charts:
        lam_m, lam_c, _ = chart_curvatures(chart)
        hi_c = np.maximum(lam_m, lam_c)
        lo_c = np.minimum(lam_m, lam_c)
        if np.any(lo_c <= 0.0):
            vals.append(float(np.max(hi_c[lo_c <= 0.0])))
    return max(vals) if vals else -math.inf
