import numpy as np
import pytest

from ambitlab import regions
from ambitlab.errors import QuadratureError
from ambitlab.kernels import (
    GridWeight,
    QuadratureConfig,
    SingularWeight,
    SlowFunction,
    TriangleWeight,
    UniformWeight,
    ambit_support,
    compute_cn,
    concentration_mass,
    concentration_point,
    concentration_report,
    eval_g,
    eval_h,
    load_grid_csv,
    mu_mass,
    near_region,
    save_grid_csv,
    thinning_count,
    weight_from_config,
    weight_to_config,
)
from ambitlab.regions import Difference, Everything, HalfPlane, Intersection, Rect, band


# ---------------------------------------------------------------- evaluation

def test_uniform_kernel_is_plain_indicator():
    w = UniformWeight()
    assert eval_g(w, 0.5, 0.5) == 1.0
    assert eval_g(w, 0.25, 0.75) == 1.0  # closed rectangle
    assert eval_g(w, 0.1, 0.5) == 0.0
    assert eval_g(w, 0.5, -0.2) == 0.0


def test_singular_kernel_uses_coordinate_maximum():
    w = SingularWeight(alpha=0.5, ell=SlowFunction.from_catalog("one"))
    # max(0.04, 0.01) = 0.04 -> 0.04^(-1/2) = 5
    assert eval_g(w, 0.04, 0.01) == pytest.approx(5.0, rel=1e-14)
    assert eval_g(w, 0.01, 0.04) == pytest.approx(5.0, rel=1e-14)
    assert eval_g(w, -0.04, 0.01) == 0.0  # outside the quadrant
    assert eval_g(w, 0.04, 1.5) == 0.0
    assert np.isposinf(eval_g(w, 0.0, 0.0))


def test_triangle_kernel_lives_on_the_cone():
    w = TriangleWeight(alpha=0.75, ell=SlowFunction.from_catalog("one"))
    assert eval_g(w, 0.5, 0.5) == pytest.approx(0.5 ** -0.75, rel=1e-14)
    assert eval_g(w, 0.8, 0.5) == 0.0  # |2s-1| = 0.6 >= t
    assert eval_g(w, 0.3, 0.5) == pytest.approx(0.5 ** -0.75, rel=1e-14)
    assert eval_g(w, 0.3, 0.39) == 0.0


def test_grid_kernel_interpolates_bilinearly():
    vals = np.zeros((3, 3))
    vals[1, 1] = 4.0  # single interior node at (1/2, 1/2), M = 2
    w = GridWeight(values=vals)
    assert eval_g(w, 0.5, 0.5) == 4.0
    assert eval_g(w, 0.25, 0.5) == 2.0
    assert eval_g(w, 0.25, 0.25) == 1.0
    assert eval_g(w, 1.2, 0.5) == 0.0


def test_differenced_kernel_is_the_four_term_combination():
    w = SingularWeight(alpha=0.4)
    n = 8
    s, t = 0.37, 0.81
    expect = (
        eval_g(w, s, t)
        - eval_g(w, s - 1 / n, t)
        - eval_g(w, s, t - 1 / n)
        + eval_g(w, s - 1 / n, t - 1 / n)
    )
    assert eval_h(w, n, s, t) == pytest.approx(expect, rel=1e-14)


def test_differenced_uniform_kernel_takes_signed_unit_values():
    w = UniformWeight()
    n = 8
    # inside the kernel rectangle everything cancels
    assert eval_h(w, n, 0.5, 0.5) == 0.0
    # just past a corner only one copy contributes
    assert eval_h(w, n, 0.26, 0.26) == 1.0
    assert eval_h(w, n, 0.26, 0.80) == -1.0


def test_eval_h_rejects_bad_resolution():
    with pytest.raises(ValueError):
        eval_h(UniformWeight(), 0, 0.5, 0.5)


# ---------------------------------------------------------------- spec validation

def test_uniform_weight_rejects_bad_corners():
    with pytest.raises(ValueError):
        UniformWeight(s1=0.75, s2=0.25)
    with pytest.raises(ValueError):
        UniformWeight(t1=-0.1, t2=0.5)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.3, 1.7])
def test_singular_weight_rejects_exponent_outside_unit_interval(alpha):
    with pytest.raises(ValueError):
        SingularWeight(alpha=alpha)


@pytest.mark.parametrize("alpha", [0.5, 0.3, 1.0])
def test_triangle_weight_needs_exponent_above_one_half(alpha):
    with pytest.raises(ValueError):
        TriangleWeight(alpha=alpha)


def test_grid_weight_demands_square_finite_values():
    with pytest.raises(ValueError):
        GridWeight(values=np.ones((3, 4)))
    with pytest.raises(ValueError):
        GridWeight(values=np.array([[1.0, np.nan], [1.0, 1.0]]))
    w = GridWeight(values=np.ones((3, 3)))
    assert w.resolution == 2
    with pytest.raises(ValueError):
        w.values[0, 0] = 2.0  # stored read-only


def test_slow_function_catalog_and_validation():
    ell = SlowFunction.from_catalog("smooth_cutoff")
    assert ell(0.5) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        SlowFunction.from_catalog("no_such_factor")
    # declaring the flat factor as vanishing at 1 contradicts its values
    with pytest.raises(ValueError):
        SlowFunction(name="one", ell1_zero=True)
    # declared slope bound smaller than the actual slope
    with pytest.raises(ValueError):
        SlowFunction(name="cos_quarter", derivative_bound=0.1)


# ---------------------------------------------------------------- total masses

@pytest.mark.parametrize("n", [2, 5, 8, 16, 37])
def test_uniform_total_mass_is_four_cells(n):
    # h is +-1 on four disjoint 1/n-cells whenever 1/n < side length
    assert compute_cn(UniformWeight(), n) == pytest.approx(4.0 / n**2, rel=1e-13)


def test_uniform_total_mass_carries_the_squared_scale():
    assert compute_cn(UniformWeight(scale=3.0), 8) == pytest.approx(9.0 * 4.0 / 64.0, rel=1e-14)


# references: outer scipy.integrate.quad over exact row/column reductions of
# h^2, breakpoints at every structural line, tolerance pushed to ~1e-11
@pytest.mark.parametrize(
    "alpha,expect,rtol",
    [
        (0.3, 0.10700295964932457, 1e-9),
        (0.6, 0.9607735122949955, 1e-9),
        (0.9, 21.845467032032865, 1e-6),
    ],
)
def test_singular_total_mass_matches_quadrature_reference(alpha, expect, rtol):
    assert compute_cn(SingularWeight(alpha=alpha), 8) == pytest.approx(expect, rel=rtol)


@pytest.mark.parametrize(
    "alpha,expect,rtol",
    [
        (0.6, 0.960781538185788, 1e-9),
        (0.75, 2.667897914873535, 1e-9),
        (0.9, 12.513092617159693, 1e-7),
    ],
)
def test_triangle_total_mass_matches_quadrature_reference(alpha, expect, rtol):
    assert compute_cn(TriangleWeight(alpha=alpha), 8) == pytest.approx(expect, rel=rtol)


def test_grid_total_mass_matches_quadrature_reference():
    vals = 1.0 + np.random.default_rng(7).random((5, 5))
    w = GridWeight(values=vals)
    assert compute_cn(w, 8) == pytest.approx(0.14608305315602355, rel=1e-12)


@pytest.mark.parametrize(
    "spec",
    [
        SingularWeight(alpha=0.6),
        TriangleWeight(alpha=0.75),
        GridWeight(values=1.0 + np.random.default_rng(3).random((4, 4))),
    ],
)
def test_total_mass_scales_quadratically(spec):
    import dataclasses

    scaled = dataclasses.replace(spec, scale=2.5) if not isinstance(spec, GridWeight) else GridWeight(values=spec.values, scale=2.5)
    assert compute_cn(scaled, 8) == pytest.approx(2.5**2 * compute_cn(spec, 8), rel=1e-12)


def test_mass_integrals_need_two_lattice_cells():
    with pytest.raises(ValueError):
        mu_mass(UniformWeight(), 1)


# ---------------------------------------------------------------- region masses

def test_singular_rectangle_mass_matches_quadrature_reference():
    w = SingularWeight(alpha=0.6)
    got = mu_mass(w, 16, Rect(0.0, 0.125, 0.0, 0.125))
    assert got == pytest.approx(0.5244011304285371, rel=1e-9)


def test_singular_diagonal_band_mass_matches_quadrature_reference():
    w = SingularWeight(alpha=0.6)
    got = mu_mass(w, 16, band(-0.05, 0.05))
    assert got == pytest.approx(0.3598440935416495, rel=1e-9)


def test_triangle_apex_rectangle_mass_matches_quadrature_reference():
    w = TriangleWeight(alpha=0.75)
    got = mu_mass(w, 8, Rect(0.375, 0.625, 0.0, 0.25))
    assert got == pytest.approx(1.753258346473444, rel=1e-8)


def test_triangle_halfplane_wedge_mass_matches_quadrature_reference():
    w = TriangleWeight(alpha=0.75)
    wedge = Intersection((HalfPlane(-2.0, 1.0, -0.1), HalfPlane(2.0, 1.0, 2.1)))
    assert mu_mass(w, 8, wedge) == pytest.approx(2.6357191217522855, rel=1e-8)


@pytest.mark.parametrize(
    "spec,n",
    [
        (UniformWeight(), 8),
        (SingularWeight(alpha=0.6), 16),
        (TriangleWeight(alpha=0.75), 8),
        (GridWeight(values=1.0 + np.random.default_rng(5).random((4, 4))), 8),
    ],
)
def test_region_and_complement_masses_partition_the_total(spec, n):
    piece = Rect(0.1, 0.4, 0.0, 0.3)
    inside = mu_mass(spec, n, piece)
    outside = mu_mass(spec, n, Difference(Everything(), piece))
    assert inside + outside == pytest.approx(compute_cn(spec, n), rel=1e-10)


def test_band_mass_respects_transposition_symmetry():
    # the coordinate-maximum kernel is symmetric, so mirrored bands carry
    # identical mass
    w = SingularWeight(alpha=0.6)
    assert mu_mass(w, 16, band(0.1, 0.3)) == pytest.approx(
        mu_mass(w, 16, band(-0.3, -0.1)), rel=1e-10
    )


def test_neighborhood_mass_grows_with_radius():
    w = SingularWeight(alpha=0.75)
    masses = [concentration_mass(w, 32, near_region(w, eps)) for eps in (0.05, 0.1, 0.2, 0.4)]
    assert all(b > a for a, b in zip(masses, masses[1:]))
    assert 0.0 < masses[0] < masses[-1] < 1.0


def test_concentration_mass_of_everything_is_one():
    w = TriangleWeight(alpha=0.75)
    assert concentration_mass(w, 8, Everything()) == pytest.approx(1.0, rel=1e-12)


def test_empty_region_has_zero_mass():
    w = SingularWeight(alpha=0.6)
    assert mu_mass(w, 8, Rect(0.0, 0.0, 0.0, 0.0)) == 0.0


def test_unstable_quadrature_raises_with_estimate():
    cfg = QuadratureConfig(rel_tol=1e-15, abs_tol=0.0, levels=4, nodes=2, smooth_nodes=2, max_depth=2)
    with pytest.raises(QuadratureError) as exc:
        mu_mass(SingularWeight(alpha=0.9), 8, None, cfg)
    assert exc.value.estimate is not None


# ---------------------------------------------------------------- concentration geometry

def test_concentration_points_per_variant():
    assert concentration_point(SingularWeight(alpha=0.3)) == (0.0, 0.0)
    assert concentration_point(TriangleWeight(alpha=0.75)) == (0.5, 0.0)
    assert concentration_point(UniformWeight()) is None


def test_near_region_shapes():
    sq = near_region(SingularWeight(alpha=0.3), 0.2)
    assert sq == Rect(0.0, 0.2, 0.0, 0.2)
    tri = near_region(TriangleWeight(alpha=0.75), 0.2)
    assert tri == Rect(0.4, 0.6, 0.0, 0.1)
    with pytest.raises(ValueError):
        near_region(UniformWeight(), 0.2)
    with pytest.raises(ValueError):
        near_region(SingularWeight(alpha=0.3), 0.0)


def test_uniform_report_puts_a_quarter_mass_on_each_corner_cell():
    rep = concentration_report(UniformWeight(), 32)
    assert rep.c_n == pytest.approx(4.0 / 32**2, rel=1e-12)
    assert sorted(rep.region_masses) == ["corner_11", "corner_12", "corner_21", "corner_22"]
    for mass in rep.region_masses.values():
        assert mass == pytest.approx(0.25, abs=1e-10)
    assert rep.assumption2_ratio is None
    assert rep.notes == ()


def test_singular_report_tracks_the_thinned_neighborhood():
    rep = concentration_report(SingularWeight(alpha=0.6), 64, kappa=0.4)
    assert rep.k_n == thinning_count(64, 0.4)
    assert rep.eps_n == pytest.approx(rep.k_n / 64)
    assert 0.0 < rep.region_masses["near_eps"] < 1.0
    assert rep.assumption2_ratio == pytest.approx(
        (1.0 - rep.region_masses["near_eps"]) / rep.eps_n**2, rel=1e-12
    )


def test_uniform_report_with_thinning_notes_the_missing_single_point():
    rep = concentration_report(UniformWeight(), 32, kappa=0.4)
    assert rep.assumption2_ratio is None
    assert any("concentration point" in note for note in rep.notes)


def test_ambit_support_membership_and_translation():
    sup = ambit_support(TriangleWeight(alpha=0.75))
    assert sup.contains(0.5, 0.5)
    assert not sup.contains(0.9, 0.5)
    moved = sup.at(1.0, 1.0)  # support seen from the lattice point (1,1)
    assert regions.contains(moved, 0.5, 0.5)
    assert not regions.contains(moved, 0.05, 0.5)  # reflects near a cone corner

    usup = ambit_support(UniformWeight())
    assert usup.contains(0.3, 0.3)
    assert not usup.contains(0.2, 0.3)


# ---------------------------------------------------------------- thinning

def test_thinning_count_examples():
    assert thinning_count(600, 0.4) == 47  # ceil(600^0.6)
    assert thinning_count(64, 0.4) == 13
    assert thinning_count(64, 0.5) == 8  # exact power hits the integer


@pytest.mark.parametrize("kappa", [0.0, 1.0, -0.2, 1.4])
def test_thinning_count_rejects_bad_exponent(kappa):
    with pytest.raises(ValueError):
        thinning_count(64, kappa)


def test_thinning_count_rejects_bad_resolution():
    with pytest.raises(ValueError):
        thinning_count(0, 0.4)


# ---------------------------------------------------------------- serialization

@pytest.mark.parametrize(
    "spec",
    [
        UniformWeight(),
        UniformWeight(s1=0.1, s2=0.9, t1=0.2, t2=0.8, scale=2.0),
        SingularWeight(alpha=0.3),
        SingularWeight(alpha=0.75, ell=SlowFunction.from_catalog("smooth_cutoff"), scale=0.5),
        TriangleWeight(alpha=0.8, ell=SlowFunction.from_catalog("one")),
    ],
)
def test_weight_config_roundtrip(spec):
    assert weight_from_config(weight_to_config(spec)) == spec


def test_weight_config_rejects_incomplete_mappings():
    with pytest.raises(ValueError):
        weight_from_config({})
    with pytest.raises(ValueError):
        weight_from_config({"weight.variant": "banana"})
    with pytest.raises(ValueError):
        weight_from_config({"weight.variant": "singular"})  # no alpha
    with pytest.raises(ValueError):
        weight_from_config({"weight.variant": "grid"})  # no path


def test_grid_weight_roundtrips_through_csv(tmp_path):
    vals = np.arange(16.0).reshape(4, 4)
    path = tmp_path / "weights.csv"
    save_grid_csv(path, vals)
    loaded = load_grid_csv(path)
    np.testing.assert_array_equal(loaded, vals)
    w = weight_from_config({"weight.variant": "grid", "weight.path": str(path)})
    assert isinstance(w, GridWeight)
    np.testing.assert_array_equal(w.values, vals)


def test_grid_csv_rejects_malformed_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,2.0\n3.0,4.0\n")
    with pytest.raises(ValueError):
        load_grid_csv(bad)
    mismatched = tmp_path / "mismatched.csv"
    mismatched.write_text("resolution=5\n1.0,2.0\n3.0,4.0\n")
    with pytest.raises(ValueError):
        load_grid_csv(mismatched)


def test_grid_weight_is_not_inline_serializable():
    w = GridWeight(values=np.ones((3, 3)))
    with pytest.raises(ValueError):
        weight_to_config(w)
