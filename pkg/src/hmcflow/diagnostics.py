"""Runtime monitors for every quantity the flow provably controls.

Each time slice is condensed into a DiagRecord: the area and its ODE
residual (the area must decay at exactly 4*pi + eps INT H^2), the total
Gauss curvature (a topological constant), the two shifted support minima
q and q_eta (non-decreasing), curvature extrema and pinching constants
(uniformly bounded), max f^2 f_x^2 (non-increasing) and roundness (tends
to 1 after convexification).  Post-hoc assertions over a recorded series
live here as well, together with the closed-form shrinking-sphere oracle
used to calibrate everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .geometry import (
    FOUR_PI,
    ProfileGrid,
    chart_curvatures,
    chart_derivatives,
    chart_support,
    curvature_from_derivs,
    derivatives,
    gauss_bonnet_integral,
    mean_curvature_sq_integral,
    monotone_cubic_resample,
    smoothstep,
    support_inner,
    surface_area,
)
from .speeds import FlowParams

_PINCH_GRID = np.geomspace(0.25, 64.0, 49)


@dataclass(frozen=True)
class DiagRecord:
    t: float
    area: float
    area_ode_residual: float
    gb_residual: float
    q: float
    q_eta: float
    H_min: float
    H_max: float
    lambda2_min: float
    speed_min: float
    pinch_C1: float
    pinch_C2: float
    ffx_max: float
    h2_integral: float
    roundness: float
    amax: float


DIAG_FIELDS = tuple(f.name for f in fields(DiagRecord))


# ----------------------------------------------------------------------
# per-slice sampling
# ----------------------------------------------------------------------

def _chart_fields(chart, center):
    """(hi, lo, support) along one chart's lattice."""
    dv = chart_derivatives(chart)
    lam_m, lam_c, _ = chart_curvatures(chart, derivs=dv)
    hi = np.maximum(lam_m, lam_c)
    lo = np.minimum(lam_m, lam_c)
    sup = chart_support(chart, center, derivs=dv)
    return hi, lo, sup


def _surface_samples(grid: ProfileGrid, charts):
    """Pointwise data over interior nodes and chart nodes, seam-blended.

    The charts own the sample band below 0.7 of their width outright (the
    profile lattice cannot differentiate the sqrt-shaped caps there); on
    the band above it the interior values are blended pointwise toward
    the chart fields, so the sampled fields are continuous across the
    hand-off and the arg-extrema of the monitored quantities can migrate
    between representations without jumps.

    The interior is resampled onto a front-fixed lattice (fixed fractions
    of [a, b]) first: the evolution lattice is fixed in x while the tips
    sweep past it, so stencil biases at a given node change with the
    end-gap phase; on the scaled lattice they are static functions of
    position and the recorded extrema inherit only the true evolution.
    Returns sorted principal curvatures (hi >= lo), the support function
    and f^2 f_x^2 per sample.
    """
    x_d = np.linspace(grid.a, grid.b, grid.n)
    # resample through u = f^2, which stays smooth (nearly linear in x)
    # across the sqrt-shaped caps where f itself defeats interpolation
    u_d = monotone_cubic_resample(grid.x, grid.f * grid.f, x_d)
    f_d = np.sqrt(np.maximum(u_d, (1e-12 * float(grid.f.max())) ** 2))
    f_d[0] = 0.0
    f_d[-1] = 0.0
    grid = ProfileGrid(x=x_d, f=f_d, t=grid.t, center=grid.center)
    fx, fxx = derivatives(grid)
    # raw curvature kernel: the chart-owned collar may misbehave on the
    # resample, but it is masked or blended away below
    lam1 = np.full(grid.n, np.nan)
    lam2 = np.full(grid.n, np.nan)
    lam1[1:-1], lam2[1:-1], _, _, _ = curvature_from_derivs(
        f_d[1:-1], fx[1:-1], fxx[1:-1])
    hi_i = np.maximum(lam1, lam2)
    lo_i = np.minimum(lam1, lam2)
    sup_i = support_inner(grid, fx)
    # f f_x = (f^2)'/2, and u = f^2 stays smooth through a rounded cap
    # (u ~ 2R(x-a) there), so one centered pass over u samples f^2 f_x^2
    # seam-free across the whole profile, tips included
    u_d = f_d * f_d
    h_d = x_d[1] - x_d[0]
    ffx_i = np.empty(grid.n)
    ffx_i[1:-1] = ((u_d[2:] - u_d[:-2]) / (4.0 * h_d)) ** 2
    ffx_i[0] = ((-3.0 * u_d[0] + 4.0 * u_d[1] - u_d[2]) / (4.0 * h_d)) ** 2
    ffx_i[-1] = ((3.0 * u_d[-1] - 4.0 * u_d[-2] + u_d[-3]) / (4.0 * h_d)) ** 2

    keep = np.ones(grid.n, dtype=bool)
    keep[0] = keep[-1] = False
    hi, lo, sup = [], [], []
    # zone boundaries, as fractions of the chart width: the chart owns
    # samples below CH_TOP; interior values blend toward the chart on
    # [CH_TOP, BLEND_TOP] so the sampled fields are seam-continuous
    CH_TOP, BLEND_TOP = 0.7, 0.9
    for chart in charts:
        ym = chart.y_match
        if chart.side == "left":
            inside = grid.x <= chart.g[-1]
        else:
            inside = grid.x >= chart.g[-1]
        keep &= ~(inside & (grid.f < CH_TOP * ym))
        band = inside & (grid.f >= CH_TOP * ym) & (grid.f < BLEND_TOP * ym)
        ch = _chart_fields(chart, grid.center)
        if np.any(band):
            fb = grid.f[band]
            w = smoothstep((BLEND_TOP * ym - fb) / ((BLEND_TOP - CH_TOP) * ym))
            for vals_i, vals_c in zip((hi_i, lo_i, sup_i), ch):
                vals_i[band] = w * np.interp(fb, chart.y, vals_c) \
                    + (1.0 - w) * vals_i[band]
        pick = chart.y < CH_TOP * ym
        hi.append(ch[0][pick])
        lo.append(ch[1][pick])
        sup.append(ch[2][pick])

    hi.append(hi_i[keep])
    lo.append(lo_i[keep])
    sup.append(sup_i[keep])
    return (np.concatenate(hi), np.concatenate(lo),
            np.concatenate(sup), ffx_i)


def _pinch_fit(hi, lo):
    """Smallest C1 on a log grid minimizing C2 = max(0, max(hi - C1 lo)).

    C2(C1) is a maximum of linear functions of C1, hence convex; the
    returned pair always satisfies hi <= C1 lo + C2 over the samples.
    """
    excess = hi[None, :] - _PINCH_GRID[:, None] * lo[None, :]
    c2 = np.maximum(0.0, excess.max(axis=1))
    best = float(c2.min())
    j = int(np.argmax(c2 <= best * (1.0 + 1e-12) + 1e-300))
    return float(_PINCH_GRID[j]), float(c2[j])


def record(grid: ProfileGrid, charts, params: FlowParams,
           prev: DiagRecord | None = None) -> DiagRecord:
    """Assemble all monitored scalars for one time slice."""
    hi, lo, sup, ffx2 = _surface_samples(grid, charts)
    H = hi + lo
    kap_eps = hi * lo / H + params.epsilon * H

    area = surface_area(grid, charts)
    gb = gauss_bonnet_integral(grid, charts)
    h2 = mean_curvature_sq_integral(grid, charts)

    t = grid.t
    q = float(np.min(sup + 2.0 * t * kap_eps))
    q_eta = float(np.min(sup + 2.0 * (t + params.eta) * kap_eps))

    if prev is not None and grid.t > prev.t:
        residual = (area - prev.area) / (grid.t - prev.t) + FOUR_PI \
            + params.epsilon * h2
    else:
        residual = math.nan

    lo_min = float(np.min(lo))
    if lo_min > 0.0:
        roundness = float(np.max(hi) / lo_min)
    else:
        roundness = math.inf
    c1, c2 = _pinch_fit(hi, lo)

    return DiagRecord(
        t=t,
        area=float(area),
        area_ode_residual=float(residual),
        gb_residual=float(gb / FOUR_PI - 1.0),
        q=q,
        q_eta=q_eta,
        H_min=float(np.min(H)),
        H_max=float(np.max(H)),
        lambda2_min=lo_min,
        speed_min=float(np.min(kap_eps)),
        pinch_C1=c1,
        pinch_C2=c2,
        ffx_max=float(np.max(ffx2)),
        h2_integral=float(h2),
        roundness=roundness,
        amax=float(np.sqrt(np.max(hi * hi + lo * lo))),
    )


# ----------------------------------------------------------------------
# series assertions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneReport:
    ok: bool
    field: str
    direction: str
    worst: float        # most negative signed margin over consecutive pairs
    worst_t: float
    checked: int

    def __str__(self):
        tag = "pass" if self.ok else "FAIL"
        return (f"{tag}: {self.field} {self.direction} "
                f"(worst step {self.worst:+.3e} at t = {self.worst_t:.6g}, "
                f"{self.checked} records)")


def assert_monotone(series, field_name: str, direction: str, slack: float,
                    t_max: float | None = None) -> MonotoneReport:
    """Check a recorded field is monotone within an absolute slack.

    direction is "non_decreasing" or "non_increasing".  Records with
    t > t_max (when given) are reported but not asserted, matching the
    near-extinction carve-out.  The worst signed violation and its time
    are reported; ok means worst >= -slack.
    """
    if direction not in ("non_decreasing", "non_increasing"):
        raise ValueError("direction must be non_decreasing or non_increasing")
    rows = [r for r in series if t_max is None or r.t <= t_max]
    if len(rows) < 2:
        raise ValueError("series too short for a monotonicity check")
    vals = np.array([getattr(r, field_name) for r in rows])
    ts = np.array([r.t for r in rows])
    steps = np.diff(vals)
    if direction == "non_increasing":
        steps = -steps
    worst_i = int(np.argmin(steps))
    worst = float(steps[worst_i])
    return MonotoneReport(
        ok=bool(worst >= -slack),
        field=field_name,
        direction=direction,
        worst=worst,
        worst_t=float(ts[worst_i + 1]),
        checked=len(rows),
    )


def hmin_persistence(series, t_predicted: float, early_frac: float = 0.01):
    """delta = half the min of H_min over the first early_frac of the run;
    returns (delta, min over the whole series, ok)."""
    early = [r.H_min for r in series if r.t <= early_frac * t_predicted]
    if not early:
        early = [series[0].H_min]
    delta = 0.5 * min(early)
    overall = min(r.H_min for r in series)
    return delta, overall, bool(overall >= delta > 0.0)


@dataclass(frozen=True)
class BoundsReport:
    ok: bool
    extrema: dict
    variations: dict

    def __str__(self):
        tag = "pass" if self.ok else "FAIL"
        var = ", ".join(f"{k}={v:.1%}" for k, v in self.variations.items())
        return f"{tag}: sweep variations {var}"


def assert_bounds(series_by_eps: dict, params: FlowParams,
                  t_max_of=None, max_variation: float = 0.5) -> BoundsReport:
    """Uniformity-in-eps proxies over an epsilon sweep.

    For each run: the extreme of speed_min, lambda2_min, the fitted
    pinching constants and INT H^2 dmu over the records (restricted to
    t <= t_max_of[eps] when given).  Asserts each extremum varies by
    less than max_variation across the sweep.  The speed and curvature
    bounds are normalized against the initial curvature scale as well as
    against themselves: the proved bounds are one-sided, so when a run
    never gets near them (e.g. the speed stays positive at larger eps)
    the extremum sits at rounding scale and its relative spread is
    meaningless.
    """
    per_field = {"speed_min": min, "lambda2_min": min, "pinch_C1": max,
                 "pinch_C2": max, "h2_integral": max}
    extrema = {k: {} for k in per_field}
    for eps, series in series_by_eps.items():
        rows = series
        if t_max_of is not None:
            rows = [r for r in series if r.t <= t_max_of[eps]]
        for name, agg in per_field.items():
            extrema[name][eps] = agg(getattr(r, name) for r in rows)

    h_scale = max(abs(next(iter(series_by_eps.values()))[0].H_max), 1.0)
    floors = {"speed_min": 0.05 * h_scale, "lambda2_min": 0.05 * h_scale,
              "pinch_C1": 0.0, "pinch_C2": 0.0, "h2_integral": 0.0}
    variations = {}
    ok = True
    for name, by_eps in extrema.items():
        vals = np.array(list(by_eps.values()))
        scale = max(float(np.max(np.abs(vals))), floors[name], 1e-30)
        variations[name] = float((vals.max() - vals.min()) / scale)
        ok = ok and variations[name] < max_variation
    return BoundsReport(ok=ok, extrema=extrema, variations=variations)


# ----------------------------------------------------------------------
# closed-form sphere oracle
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SphereState:
    R: float
    area: float
    kappa: float
    q: float | None
    T: float


def sphere_oracle(r0: float, epsilon: float, t: float) -> SphereState:
    """Exact shrinking sphere: dR/dt = -(1+4 eps)/(2R).

    R(t)^2 = r0^2 - (1+4 eps) t, extinct at T = r0^2/(1+4 eps); the
    shifted support minimum q = r0^2/sqrt(r0^2 - t) is returned for
    eps = 0 only.
    """
    rate = 1.0 + 4.0 * epsilon
    T = r0 * r0 / rate
    if t >= T:
        raise ValueError(f"post-extinction query: t = {t} >= T = {T}")
    R = math.sqrt(r0 * r0 - rate * t)
    q = r0 * r0 / math.sqrt(r0 * r0 - t) if epsilon == 0.0 else None
    return SphereState(R=R, area=FOUR_PI * R * R,
                       kappa=rate / (2.0 * R), q=q, T=T)


# ----------------------------------------------------------------------
# roundness trend
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TrendReport:
    applicable: bool
    ok: bool
    roundness_mid: float
    roundness_late: float
    t_mid: float
    t_late: float

    def __str__(self):
        if not self.applicable:
            return "not applicable: run ended before convexification"
        tag = "pass" if self.ok else "FAIL"
        return (f"{tag}: roundness {self.roundness_mid:.4f} at t = {self.t_mid:.4g} "
                f"-> {self.roundness_late:.4f} at t = {self.t_late:.4g}")


def roundness_trend(series, t_convex, t_final, late_frac: float = 1e-2,
                    tol: float = 1e-3) -> TrendReport:
    """After convexification roundness must be finite and approach 1.

    Compares the record nearest t = (t_convex + T)/2 with the one nearest
    t = T (1 - late_frac); the late value must be at least as close to 1,
    within a small absolute tolerance for surfaces already sitting at the
    discretization floor of roundness.
    """
    if t_convex is None or not series or series[-1].t <= t_convex:
        return TrendReport(False, False, math.nan, math.nan, math.nan, math.nan)
    ts = np.array([r.t for r in series])
    t_mid = 0.5 * (t_convex + t_final)
    t_late = t_final * (1.0 - late_frac)
    i_mid = int(np.argmin(np.abs(ts - t_mid)))
    i_late = int(np.argmin(np.abs(ts - t_late)))
    r_mid = series[i_mid].roundness
    r_late = series[i_late].roundness
    ok = math.isfinite(r_late) and (abs(r_late - 1.0) <= abs(r_mid - 1.0) + tol)
    return TrendReport(True, bool(ok), r_mid, r_late,
                       float(ts[i_mid]), float(ts[i_late]))


# ----------------------------------------------------------------------
# series / summary files
# ----------------------------------------------------------------------

def write_series(series, path, delimiter="\t"):
    """One DiagRecord per row, header row with the exact field names."""
    lines = [delimiter.join(DIAG_FIELDS)]
    for r in series:
        lines.append(delimiter.join(repr(float(getattr(r, k))) for k in DIAG_FIELDS))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_series(path, delimiter="\t"):
    with open(path) as fh:
        header = fh.readline().strip().split(delimiter)
        if tuple(header) != DIAG_FIELDS:
            raise ValueError(f"unexpected series header in {path}")
        out = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = [float(v) for v in line.split(delimiter)]
            out.append(DiagRecord(**dict(zip(DIAG_FIELDS, vals))))
    return out


def write_summary(entries: dict, path):
    """Plain key=value document (shortest round-trip floats)."""
    lines = []
    for key, val in entries.items():
        if isinstance(val, float):
            lines.append(f"{key}={val!r}")
        else:
            lines.append(f"{key}={val}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
