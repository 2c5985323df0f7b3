import math

import numpy as np
import pytest

from hmcflow import (
    MeanConvexityError,
    ProfileError,
    ProfileGrid,
    build_tip_chart,
    derivatives,
    gauss_bonnet_integral,
    principal_curvatures,
    read_profile,
    support_inner,
    surface_area,
    validate_initial,
    write_profile,
)
from hmcflow.geometry import (
    chart_curvatures,
    curvature_from_derivs,
    monotone_cubic_resample,
    smooth_cubic_resample,
)
from hmcflow.cli import make_preset

FOUR_PI = 4.0 * math.pi

# independent Simpson quadrature of the analytic bumpy profile, frozen
# as the regression oracle for the blended area quadrature
BUMPY_AREA_ORACLE = 9.58680688510326


def sphere_grid(n, r0=1.0, center=0.0):
    x = np.linspace(center - r0, center + r0, n)
    f = np.sqrt(np.maximum(r0 * r0 - (x - center) ** 2, 0.0))
    f[0] = f[-1] = 0.0
    return ProfileGrid(x=x, f=f, t=0.0, center=center)


def charts_for(grid, **kw):
    return (build_tip_chart(grid, "left", **kw), build_tip_chart(grid, "right", **kw))


# ----------------------------------------------------------------------
# derivatives
# ----------------------------------------------------------------------

class TestDerivatives:
    def test_linear_profile_five_nodes(self):
        grid = ProfileGrid(x=np.array([0, .25, .5, .75, 1.0]),
                           f=np.array([0, .25, .5, .75, 1.0]))
        fx, fxx = derivatives(grid)
        assert np.allclose(fx[1:-1], 1.0, atol=1e-13)
        assert np.allclose(fxx[1:-1], 0.0, atol=1e-12)
        assert np.isnan(fx[0]) and np.isnan(fxx[-1])

    def test_quadratic_exact(self):
        x = np.linspace(0.0, 1.0, 17)
        grid = ProfileGrid(x=x, f=x * x)
        fx, fxx = derivatives(grid)
        assert np.allclose(fxx[1:-1], 2.0, atol=1e-10)
        assert np.allclose(fx[1:-1], 2.0 * x[1:-1], atol=1e-10)

    def test_sine_second_derivative(self):
        # f = sin(pi x), h = 1e-3: f_xx(0.5) = -pi^2 within 1e-4
        x = np.linspace(0.0, 1.0, 1001)
        grid = ProfileGrid(x=x, f=np.sin(np.pi * x))
        _, fxx = derivatives(grid)
        mid = np.argmin(np.abs(x - 0.5))
        assert abs(fxx[mid] + np.pi ** 2) < 1e-4

    def test_too_coarse(self):
        with pytest.raises(ProfileError, match="too coarse"):
            ProfileGrid(x=np.array([0, .5, 1.0]), f=np.array([0, .5, 0]))


# ----------------------------------------------------------------------
# curvatures
# ----------------------------------------------------------------------

class TestPrincipalCurvatures:
    def test_unit_sphere(self):
        grid = sphere_grid(801)
        cf = principal_curvatures(grid)
        mid = slice(200, 601)    # away from the tips
        assert np.allclose(cf.lambda1[mid], 1.0, rtol=2e-4)
        assert np.allclose(cf.lambda2[mid], 1.0, rtol=2e-3)
        assert np.allclose(cf.H[mid], 2.0, rtol=1e-3)

    def test_cylinder_band(self):
        # test-only open band f = R: lambda1 = 1/R, lambda2 = 0
        x = np.linspace(0.0, 1.0, 31)
        grid = ProfileGrid(x=x, f=np.full_like(x, 2.0))
        cf = principal_curvatures(grid)
        assert np.allclose(cf.lambda1[1:-1], 0.5, atol=1e-12)
        assert np.allclose(cf.lambda2[1:-1], 0.0, atol=1e-12)

    def test_pointwise_kernel(self):
        lam1, lam2, H, G, ht = curvature_from_derivs(1.0, 1.0, -1.0)
        assert abs(lam1 - 0.70711) < 1e-5
        assert abs(lam2 - 0.35355) < 1e-5
        assert abs(H - 1.06066) < 1e-5
        assert abs(ht - 3.0) < 1e-12
        assert abs(G - lam1 * lam2) < 1e-15

    def test_identities_to_rounding(self):
        rng = np.random.default_rng(7)
        f = rng.uniform(0.2, 2.0, 200)
        fx = rng.uniform(-3.0, 3.0, 200)
        fxx = rng.uniform(-3.0, 0.5, 200)
        lam1, lam2, H, G, ht = curvature_from_derivs(f, fx, fxx)
        assert np.allclose(H, lam1 + lam2, rtol=1e-12)
        assert np.allclose(G, lam1 * lam2, rtol=1e-12)
        w2 = 1.0 + fx * fx
        assert np.allclose(H, ht / (f * w2 ** 1.5), rtol=1e-12)

    def test_degenerate_profile_raises(self):
        x = np.linspace(0.0, 1.0, 21)
        f = np.sin(np.pi * x)
        f[10] = -0.01
        with pytest.raises(ProfileError, match="degenerate"):
            principal_curvatures(ProfileGrid(x=x, f=f))

    def test_mean_convexity_lost_raises(self):
        x = np.linspace(0.0, 1.0, 41)
        f = np.sin(np.pi * x)
        f[18:23] += np.array([0.0, 0.2, 0.4, 0.2, 0.0])  # f_xx spike
        f[0] = f[-1] = 0.0
        with pytest.raises(MeanConvexityError, match="mean convexity"):
            principal_curvatures(ProfileGrid(x=x, f=f))

    def test_convergence_order_on_sphere(self):
        errs = []
        for n in (201, 401, 801):
            grid = sphere_grid(n)
            cf = principal_curvatures(grid)
            mid = slice(n // 4, 3 * n // 4)
            errs.append(np.max(np.abs(cf.lambda2[mid] - 1.0)))
        order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
        assert min(order) > 1.7


# ----------------------------------------------------------------------
# support function
# ----------------------------------------------------------------------

class TestSupport:
    def test_sphere_constant_r_with_exact_slope(self):
        # rotationally exact: with analytic f_x the value is R identically
        grid = sphere_grid(401, r0=1.5)
        x = grid.x[1:-1]
        fx_exact = np.zeros(grid.n)
        fx_exact[1:-1] = -x / grid.f[1:-1]
        sup = support_inner(grid, fx_exact)
        assert np.allclose(sup[1:-1], 1.5, rtol=1e-8)

    def test_critical_point(self):
        # f = 1, f_x = 0 at x = x0 -> support = 1
        x = np.linspace(-0.5, 0.5, 41)
        grid = ProfileGrid(x=x, f=np.full_like(x, 1.0), center=0.0)
        sup = support_inner(grid)
        assert abs(sup[20] - 1.0) < 1e-12

    def test_closed_form_point(self):
        # f = 1, f_x = 1, x - x0 = 0.5 -> (-0.5 + 1)/sqrt(2)
        grid = sphere_grid(101)
        fx = np.full(grid.n, 1.0)
        object.__setattr__(grid, "f", np.full(grid.n, 1.0))
        object.__setattr__(grid, "center", grid.x[60] - 0.5)
        sup = support_inner(grid, fx)
        assert abs(sup[60] - 0.35355) < 1e-5


# ----------------------------------------------------------------------
# integrals
# ----------------------------------------------------------------------

class TestIntegrals:
    def test_unit_sphere_area(self):
        grid = sphere_grid(401)
        area = surface_area(grid, charts_for(grid))
        assert abs(area - FOUR_PI) / FOUR_PI < 5e-4

    def test_sphere_area_scaling(self):
        grid = sphere_grid(401, r0=2.0)
        area = surface_area(grid, charts_for(grid))
        assert abs(area - FOUR_PI * 4.0) / (FOUR_PI * 4.0) < 5e-4

    def test_bumpy_area_against_frozen_oracle(self):
        grid = make_preset("bumpy", 801)
        area = surface_area(grid, charts_for(grid))
        assert abs(area - BUMPY_AREA_ORACLE) / BUMPY_AREA_ORACLE < 5e-4

    def test_area_reflection_and_translation_invariance(self):
        grid = make_preset("bumpy", 301)
        area = surface_area(grid, charts_for(grid))
        # reflect x -> a + b - x
        xr = (grid.a + grid.b - grid.x)[::-1]
        fr = grid.f[::-1]
        gr = ProfileGrid(x=xr, f=fr, center=grid.a + grid.b - grid.center)
        area_r = surface_area(gr, charts_for(gr))
        # translate
        gt = ProfileGrid(x=grid.x + 3.7, f=grid.f, center=grid.center + 3.7)
        area_t = surface_area(gt, charts_for(gt))
        assert abs(area_r - area) / area < 1e-12
        assert abs(area_t - area) / area < 1e-12

    def test_gauss_bonnet_sphere(self):
        grid = sphere_grid(801)
        gb = gauss_bonnet_integral(grid, charts_for(grid))
        assert abs(gb - FOUR_PI) / FOUR_PI < 5e-3

    def test_gauss_bonnet_scale_invariance(self):
        for r0 in (0.5, 2.0):
            grid = sphere_grid(801, r0=r0)
            gb = gauss_bonnet_integral(grid, charts_for(grid))
            assert abs(gb - FOUR_PI) / FOUR_PI < 5e-3

    def test_gauss_bonnet_bumpy_with_cone_defects(self):
        # the sin-based preset has conical tips with slope pi(1 - beta);
        # each vertex carries a concentrated curvature atom of
        # 2 pi (1 - fx/sqrt(1+fx^2)) that smooth quadrature cannot see
        grid = make_preset("bumpy", 801)
        gb = gauss_bonnet_integral(grid, charts_for(grid))
        fx_tip = np.pi * (1.0 - 0.15)
        defect = 2.0 * np.pi * (1.0 - fx_tip / np.hypot(1.0, fx_tip))
        assert abs(gb + 2.0 * defect - FOUR_PI) / FOUR_PI < 5e-3

    def test_gauss_bonnet_smooth_oval(self):
        x = np.linspace(0.0, 1.0, 801)
        f = 0.6 * np.sqrt(np.maximum(1.0 - (2.0 * x - 1.0) ** 2, 0.0))
        f[0] = f[-1] = 0.0
        grid = ProfileGrid(x=x, f=f, center=0.5)
        gb = gauss_bonnet_integral(grid, charts_for(grid))
        assert abs(gb - FOUR_PI) / FOUR_PI < 5e-3

    def test_gauss_bonnet_refines(self):
        errs = []
        for n in (201, 401, 801):
            grid = sphere_grid(n)
            gb = gauss_bonnet_integral(grid, charts_for(grid))
            errs.append(abs(gb - FOUR_PI) / FOUR_PI)
        # order >= 1 empirically
        assert errs[2] < errs[0] / 2.5


# ----------------------------------------------------------------------
# tip charts
# ----------------------------------------------------------------------

class TestTipChart:
    def test_sphere_left_chart_matches_analytic_inverse(self):
        grid = sphere_grid(401)
        chart = build_tip_chart(grid, "left")
        exact = -np.sqrt(1.0 - chart.y ** 2)
        assert np.max(np.abs(chart.g - exact)) < 1e-6

    def test_linear_cone_identity_inverse(self):
        x = np.linspace(0.0, 1.0, 401)
        f = np.minimum(x, 1.0 - x)     # cone tips, f = x near the left tip
        f[0] = f[-1] = 0.0
        grid = ProfileGrid(x=x, f=f)
        chart = build_tip_chart(grid, "left", y_match=0.05)
        assert np.max(np.abs(chart.g - chart.y)) < 1e-10

    def test_overlap_consistency(self):
        grid = sphere_grid(401)
        for side in ("left", "right"):
            chart = build_tip_chart(grid, side)
            band = (grid.f >= 0.5 * chart.y_match) & (grid.f <= chart.y_match)
            band &= (grid.x <= chart.g[-1]) if side == "left" else (grid.x >= chart.g[-1])
            gx = np.interp(grid.f[band] ** 2, chart.y ** 2, chart.g)
            assert np.max(np.abs(gx - grid.x[band])) < 1e-6

    def test_monotonicity_failure_shrinks(self):
        # a dip a few nodes in: the chart shrinks to the monotone run
        x = np.linspace(0.0, 1.0, 101)
        f = np.sin(np.pi * x)
        f[8:12] *= 0.4
        f[0] = f[-1] = 0.0
        grid = ProfileGrid(x=x, f=f)
        chart = build_tip_chart(grid, "left", y_match=0.5)
        assert chart.y_match < 0.5 * 0.5     # shrunk well below the request

    def test_monotonicity_failure_raises_when_hopeless(self):
        from hmcflow import TipChartError
        x = np.linspace(0.0, 1.0, 101)
        f = np.sin(np.pi * x)
        f[2:5] *= 0.1            # break monotonicity immediately off the tip
        f[0] = f[-1] = 0.0
        with pytest.raises(TipChartError, match="tip chart failure"):
            build_tip_chart(ProfileGrid(x=x, f=f), "left", y_match=0.5)

    def test_tip_umbilic_value(self):
        grid = sphere_grid(801)
        chart = build_tip_chart(grid, "left")
        lam_m, lam_c, H = chart_curvatures(chart)
        assert abs(lam_m[0] - 1.0) < 5e-3
        assert lam_m[0] == lam_c[0]


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------

class TestValidateInitial:
    def test_unit_sphere_passes(self):
        report = validate_initial(sphere_grid(401))
        assert report.ok
        assert abs(report.t_predicted - 1.0) < 1e-3
        assert report.min_H > 1.7
        assert report.min_support > 0.9

    def test_mean_convexity_violation_detected(self):
        x = np.linspace(0.0, 1.0, 81)
        f = np.sin(np.pi * x)
        f[35:46] += 0.5 * np.sin(np.pi * (x[35:46] - x[35]) / (x[45] - x[35])) ** 2
        f[0] = f[-1] = 0.0
        report = validate_initial(ProfileGrid(x=x, f=f))
        assert not report.ok
        assert any("mean convexity" in msg for msg in report.failures)

    def test_not_star_shaped_detected(self):
        grid = make_preset("squashed", 201)
        shifted = ProfileGrid(x=grid.x, f=grid.f, center=5.0)
        report = validate_initial(shifted)
        assert not report.ok
        assert any("star" in msg for msg in report.failures)

    def test_open_profile_detected(self):
        x = np.linspace(0.0, 1.0, 51)
        f = np.sin(np.pi * x) + 0.1
        report = validate_initial(ProfileGrid(x=x, f=f))
        assert not report.ok
        assert any("tips" in msg for msg in report.failures)


# ----------------------------------------------------------------------
# profile exchange format
# ----------------------------------------------------------------------

class TestProfileIO:
    def test_round_trip_bit_exact(self, tmp_path):
        grid = make_preset("bumpy", 101)
        path = tmp_path / "profile.txt"
        write_profile(grid, path)
        back = read_profile(path)
        assert np.array_equal(back.x, grid.x)
        assert np.array_equal(back.f, grid.f)
        assert back.t == grid.t and back.center == grid.center

    def test_reader_accepts_missing_tip_rows(self, tmp_path):
        grid = sphere_grid(201)
        path = tmp_path / "trimmed.txt"
        lines = [f"# t={grid.t!r} center={grid.center!r}"]
        for xv, fv in zip(grid.x[1:-1], grid.f[1:-1]):
            lines.append(f"{float(xv)!r} {float(fv)!r}")
        path.write_text("\n".join(lines) + "\n")
        back = read_profile(path)
        assert back.f[0] == 0.0 and back.f[-1] == 0.0
        # f^2-linear extrapolation recovers a cap tip to O(h^2)
        assert abs(back.a - grid.a) < 5e-4
        assert abs(back.b - grid.b) < 5e-4

    def test_malformed_row_raises(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("# t=0 center=0\n0.0 0.0 0.0\n")
        with pytest.raises(ProfileError, match="malformed"):
            read_profile(path)


# ----------------------------------------------------------------------
# interpolation helpers
# ----------------------------------------------------------------------

class TestResamplers:
    @pytest.mark.parametrize("resample, tol", [
        (monotone_cubic_resample, 1e-4),   # shape limiting costs an order
        (smooth_cubic_resample, 5e-6),
    ])
    def test_reproduces_smooth_function(self, resample, tol):
        x = np.linspace(0.0, 2.0, 41)
        v = np.cos(x)
        xq = np.linspace(0.05, 1.95, 333)
        err = np.max(np.abs(resample(x, v, xq) - np.cos(xq)))
        assert err < tol

    def test_monotone_preserves_monotonicity(self):
        rng = np.random.default_rng(3)
        x = np.sort(rng.uniform(0, 1, 30))
        x[0], x[-1] = 0.0, 1.0
        v = np.cumsum(rng.uniform(0.0, 1.0, 30))
        xq = np.linspace(0.0, 1.0, 500)
        out = monotone_cubic_resample(x, v, xq)
        assert np.all(np.diff(out) >= -1e-12)

    def test_out_of_range_is_nan(self):
        x = np.linspace(0.0, 1.0, 11)
        out = monotone_cubic_resample(x, x, np.array([-0.1, 0.5, 1.1]))
        assert np.isnan(out[0]) and np.isnan(out[2]) and not np.isnan(out[1])
