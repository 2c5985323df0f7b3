"""Batch front end: presets, config files, sweeps, output files and plots.

Configs are line-oriented ``key=value`` text.  Outputs per run: a
tab-separated series of DiagRecords, profile snapshots in the two-column
exchange format, a key=value summary, and (optionally) static SVG plots.
All floating-point output uses shortest round-trip decimals, so identical
configs reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics
from .engine import evolve
from .geometry import (
    FOUR_PI,
    ProfileError,
    ProfileGrid,
    read_profile,
    validate_initial,
    write_profile,
)
from .speeds import FlowParams

PRESETS = ("sphere", "squashed", "bumpy")


@dataclass
class RunConfig:
    preset: str | None = "sphere"
    profile: str | None = None
    params: FlowParams = field(default_factory=FlowParams)
    n: int = 400
    r0: float = 1.0
    amplitude: float = 0.55
    record_every: int = 100
    snapshot_times: tuple = ()
    outdir: str = "."
    epsilons: tuple = ()
    grid_sizes: tuple = ()
    emit_plots: bool = False

    def __post_init__(self):
        if self.n < 50:
            raise ValueError("n must be >= 50")
        if self.preset is None and self.profile is None:
            raise ValueError("config needs a preset or a profile file")
        if any(s < 0.0 for s in self.snapshot_times):
            raise ValueError("snapshot_times must be >= 0")


# ----------------------------------------------------------------------
# config parsing
# ----------------------------------------------------------------------

_SCALAR_KEYS = {
    "epsilon": float, "delta1": float, "eta": float, "dt_safety": float,
    "area_floor": float, "area_floor_frac": float, "y_match_frac": float,
    "tip_nodes": int, "tip_cover_nodes": int,
}
_CONFIG_KEYS = {
    "preset": str, "profile": str, "n": int, "r0": float, "amplitude": float,
    "record_every": int, "outdir": str, "emit_plots": bool,
    "snapshot_times": tuple, "epsilons": tuple, "grid_sizes": tuple,
}


def parse_config(text: str) -> RunConfig:
    """Parse a key=value config document; unknown keys and bad values are
    reported with their line number."""
    kw = {}
    pkw = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            if key in _SCALAR_KEYS:
                pkw[key] = _SCALAR_KEYS[key](val)
            elif key in ("snapshot_times", "epsilons"):
                kw[key] = tuple(float(v) for v in val.split(",") if v.strip())
            elif key == "grid_sizes":
                kw[key] = tuple(int(v) for v in val.split(",") if v.strip())
            elif key == "emit_plots":
                kw[key] = val.lower() in ("1", "true", "yes", "on")
            elif key in _CONFIG_KEYS:
                kw[key] = _CONFIG_KEYS[key](val)
            else:
                raise KeyError
        except KeyError:
            raise ValueError(f"line {lineno}: unknown key {key!r}") from None
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    if "preset" in kw and kw["preset"] not in PRESETS:
        raise ValueError(f"unknown preset {kw['preset']!r} (choose from {PRESETS})")
    if "profile" in kw:
        kw.setdefault("preset", None)
    try:
        params = FlowParams(**pkw)
    except ValueError as exc:
        raise ValueError(str(exc)) from None
    try:
        return RunConfig(params=params, **kw)
    except ValueError as exc:
        raise ValueError(str(exc)) from None


# ----------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------

def make_preset(name: str, n: int, r0: float = 1.0, amplitude: float = 0.55) -> ProfileGrid:
    """Construct a named initial profile; every preset must validate.

    sphere    radius r0 centered at the origin (extinction at t = r0^2)
    squashed  a*sin(pi x) on [0,1]: convex, egg-like
    bumpy     sin(pi x)(1 - beta cos(2 pi x)) with the largest
              beta in {0.15, 0.10, 0.05} that validates: star-shaped and
              mean convex but not convex (lambda2 < 0 near the tips)
    """
    if name == "sphere":
        x = np.linspace(-r0, r0, n)
        f = np.sqrt(np.maximum(r0 * r0 - x * x, 0.0))
        f[0] = f[-1] = 0.0
        grid = ProfileGrid(x=x, f=f, t=0.0, center=0.0)
    elif name == "squashed":
        x = np.linspace(0.0, 1.0, n)
        f = amplitude * np.sin(np.pi * x)
        f[0] = f[-1] = 0.0
        grid = ProfileGrid(x=x, f=f, t=0.0, center=0.5)
    elif name == "bumpy":
        x = np.linspace(0.0, 1.0, n)
        grid = None
        for beta in (0.15, 0.10, 0.05):
            f = np.sin(np.pi * x) * (1.0 - beta * np.cos(2.0 * np.pi * x))
            f[0] = f[-1] = 0.0
            cand = ProfileGrid(x=x, f=f, t=0.0, center=0.5)
            if validate_initial(cand).ok:
                grid = cand
                break
        if grid is None:
            raise ProfileError("preset 'bumpy' failed validation at all beta")
    else:
        raise ValueError(f"unknown preset {name!r} (choose from {PRESETS})")
    report = validate_initial(grid)
    if not report.ok:
        raise ProfileError(f"preset {name!r} rejected: " + "; ".join(report.failures))
    return grid


def _load_initial(cfg: RunConfig) -> ProfileGrid:
    if cfg.profile is not None:
        return read_profile(cfg.profile)
    return make_preset(cfg.preset, cfg.n, r0=cfg.r0, amplitude=cfg.amplitude)


# ----------------------------------------------------------------------
# running
# ----------------------------------------------------------------------

def _run_single(cfg: RunConfig, tag: str, outdir: Path):
    grid = _load_initial(cfg)
    result = evolve(grid, cfg.params, record_every=cfg.record_every,
                    snapshot_times=cfg.snapshot_times)
    diagnostics.write_series(result.series, outdir / f"series_{tag}.dsv")
    for i, snap in enumerate(result.snapshots):
        write_profile(snap, outdir / f"profile_{tag}_{i:03d}.txt")
    write_profile(ProfileGrid(grid.x, grid.f, grid.t, grid.center),
                  outdir / f"profile_{tag}_initial.txt")
    summary = result.summary()
    summary["epsilon"] = cfg.params.epsilon
    summary["n"] = cfg.n
    diagnostics.write_summary(summary, outdir / f"summary_{tag}.txt")
    if cfg.emit_plots:
        _emit_plots(result, tag, outdir)
    return result


def run(cfg: RunConfig) -> int:
    """Execute the configured run (or sweep); returns a process exit code."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    points = []
    if cfg.epsilons:
        for eps in cfg.epsilons:
            points.append(replace(cfg, params=replace(cfg.params, epsilon=eps),
                                   epsilons=(), grid_sizes=()))
    elif cfg.grid_sizes:
        for nn in cfg.grid_sizes:
            points.append(replace(cfg, n=nn, epsilons=(), grid_sizes=()))
    else:
        points.append(cfg)

    def tag_of(c):
        if cfg.epsilons:
            return f"eps{c.params.epsilon:g}"
        if cfg.grid_sizes:
            return f"n{c.n}"
        return "run"

    try:
        if len(points) == 1:
            results = [_run_single(points[0], tag_of(points[0]), outdir)]
        else:
            with ThreadPoolExecutor(max_workers=min(4, len(points))) as pool:
                results = list(pool.map(
                    lambda c: _run_single(c, tag_of(c), outdir), points))
    except (ProfileError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    failed = [r for r in results if r.termination != "extinct"]
    if len(points) > 1:
        _write_sweep_summary(points, results, outdir)
    for r in results:
        print(f"termination={r.termination} final_time={r.final_time!r} "
              f"T_predicted={r.t_predicted!r}")
    if failed:
        print(f"error: {len(failed)} run(s) did not reach extinction",
              file=sys.stderr)
        return 1
    return 0


def _write_sweep_summary(points, results, outdir: Path):
    entries = {"sweep_points": len(points)}
    for cfg, res in zip(points, results):
        key = f"eps{cfg.params.epsilon:g}_n{cfg.n}"
        entries[f"{key}.termination"] = res.termination
        entries[f"{key}.final_time"] = res.final_time
        entries[f"{key}.T_predicted"] = res.t_predicted
    # uniformity report over the sweep (bounds proxies)
    series_by = {cfg.params.epsilon: res.series
                 for cfg, res in zip(points, results)}
    if len(series_by) == len(points):
        try:
            rep = diagnostics.assert_bounds(series_by, points[0].params)
            entries["uniformity_ok"] = rep.ok
            for name, var in rep.variations.items():
                entries[f"uniformity.{name}"] = var
        except ValueError:
            pass
    diagnostics.write_summary(entries, outdir / "summary_sweep.txt")


# ----------------------------------------------------------------------
# svg plots
# ----------------------------------------------------------------------

def _svg_plot(path, curves, title, xlabel, ylabel, width=640, height=420):
    """Minimal deterministic SVG line plot (no plotting dependency)."""
    pad = 56
    xs = np.concatenate([c[0] for c in curves])
    ys = np.concatenate([c[1] for c in curves])
    finite = np.isfinite(xs) & np.isfinite(ys)
    if not np.any(finite):
        return
    x0, x1 = float(xs[finite].min()), float(xs[finite].max())
    y0, y1 = float(ys[finite].min()), float(ys[finite].max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<text x="{width/2:.1f}" y="{height-12:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{height/2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {height/2:.1f})">{ylabel}</text>',
        f'<rect x="{pad}" y="{pad}" width="{width-2*pad}" height="{height-2*pad}" '
        f'fill="none" stroke="#888"/>',
    ]
    for k in (x0, x1):
        parts.append(f'<text x="{sx(k):.1f}" y="{height-pad+16:.1f}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{k:.4g}</text>')
    for k in (y0, y1):
        parts.append(f'<text x="{pad-6:.1f}" y="{sy(k)+4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{k:.4g}</text>')
    for ci, (cx, cy, label) in enumerate(curves):
        ok = np.isfinite(cx) & np.isfinite(cy)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(cx[ok], cy[ok]))
        color = colors[ci % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{width-pad+4:.1f}" y="{pad+14*(ci+1):.1f}" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _emit_plots(result, tag, outdir: Path):
    ss = result.series
    ts = np.array([r.t for r in ss])
    if result.snapshots:
        curves = [(s.x, s.f, f"t={s.t:.3g}") for s in result.snapshots[:6]]
        _svg_plot(outdir / f"plot_profiles_{tag}.svg", curves,
                  "profile snapshots", "x", "f")
    area = np.array([r.area for r in ss])
    mu0 = area[0]
    exact = mu0 - FOUR_PI * ts
    _svg_plot(outdir / f"plot_area_{tag}.svg",
              [(ts, area, "area"), (ts, exact, "mu0 - 4 pi t")],
              "area law", "t", "area")
    _svg_plot(outdir / f"plot_q_{tag}.svg",
              [(ts, np.array([r.q for r in ss]), "q"),
               (ts, np.array([r.q_eta for r in ss]), "q_eta")],
              "shifted support minima", "t", "q")
    _svg_plot(outdir / f"plot_hmin_{tag}.svg",
              [(ts, np.array([r.H_min for r in ss]), "H_min")],
              "mean curvature minimum", "t", "H_min")
    rd = np.array([r.roundness for r in ss])
    _svg_plot(outdir / f"plot_roundness_{tag}.svg",
              [(ts[np.isfinite(rd)], rd[np.isfinite(rd)], "roundness")],
              "roundness after convexification", "t", "max lambda1 / min lambda2")


# ----------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------

def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hmcflow",
                                 description="harmonic mean curvature flow of "
                                             "star-shaped surfaces of revolution")
    sub = ap.add_subparsers(dest="cmd", required=True)

    ap_run = sub.add_parser("run", help="run a config file")
    ap_run.add_argument("config", help="path to a key=value config file")

    ap_val = sub.add_parser("validate", help="validate a profile file")
    ap_val.add_argument("profile", help="path to a profile exchange file")

    ap_or = sub.add_parser("oracle", help="closed-form shrinking sphere")
    ap_or.add_argument("kind", choices=["sphere"])
    ap_or.add_argument("--r0", type=float, default=1.0)
    ap_or.add_argument("--epsilon", type=float, default=0.0)
    ap_or.add_argument("--t", type=float, default=0.0)

    args = ap.parse_args(argv)
    if args.cmd == "run":
        try:
            cfg = parse_config(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return run(cfg)
    if args.cmd == "validate":
        try:
            grid = read_profile(args.profile)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        report = validate_initial(grid)
        print(report)
        return 0 if report.ok else 1
    if args.cmd == "oracle":
        try:
            state = diagnostics.sphere_oracle(args.r0, args.epsilon, args.t)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"R={state.R!r} area={state.area!r} kappa={state.kappa!r} "
              f"q={state.q!r} T={state.T!r}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
