import numpy as np
import pytest

from ambitlab.errors import QuadratureError
from ambitlab.kernels import SingularWeight, SlowFunction, TriangleWeight, UniformWeight, compute_cn
from ambitlab.simulate import (
    IncrementCovariance,
    IncrementField,
    LatticeField,
    NoiseGrid,
    admissible_thinning,
    increment_covariance,
    increments,
    rho_bar,
    sample_increments_exact,
    sample_noise,
    save_covariance_csv,
    save_field_csv,
    simulate_lattice,
)
from ambitlab.volatility import ConstantVol, DeterministicVol, LogGaussianVol, sample_volatility


# --------------------------------------------------------------------- noise

def test_noise_is_deterministic_per_seed_and_rep():
    a = sample_noise(32, seed=5, rep=0)
    b = sample_noise(32, seed=5, rep=0)
    c = sample_noise(32, seed=5, rep=1)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.cell_area == (2.0 / 32) ** 2


def test_noise_rejects_tiny_resolution():
    with pytest.raises(ValueError, match="resolution"):
        sample_noise(1, seed=0)


def test_noise_variance_tripwire():
    # all-zero "noise" is nowhere near the cell-area variance
    with pytest.raises(ValueError, match="variance"):
        NoiseGrid(values=np.zeros((16, 16)), resolution=16, seed=0)


def test_noise_grid_is_read_only():
    g = sample_noise(16, seed=3)
    with pytest.raises(ValueError):
        g.values[0, 0] = 1.0


# ---------------------------------------------------------------- simulation

def test_simulate_requires_aligned_resolutions():
    sig = sample_volatility(ConstantVol(1.0), 64, seed=0)
    with pytest.raises(ValueError, match="multiple of 2n"):
        simulate_lattice(UniformWeight(), sig, 6, 64)
    with pytest.raises(ValueError, match="coarser"):
        simulate_lattice(UniformWeight(), sig, 4, 128)


def test_simulate_is_deterministic_and_records_provenance():
    sig = sample_volatility(ConstantVol(1.0), 32, seed=0)
    a = simulate_lattice(UniformWeight(), sig, 4, 32, seed=9)
    b = simulate_lattice(UniformWeight(), sig, 4, 32, seed=9)
    assert np.array_equal(a.values, b.values)
    assert a.provenance["direct_check_error"] < 1e-10
    assert a.provenance["noise_seed"] == 9 and a.provenance["M"] == 32


def test_simulate_accepts_a_presupplied_noise_grid():
    sig = sample_volatility(ConstantVol(1.0), 32, seed=0)
    noise = sample_noise(32, seed=9)
    a = simulate_lattice(UniformWeight(), sig, 4, 32, seed=9)
    b = simulate_lattice(UniformWeight(), sig, 4, 32, noise=noise)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ValueError, match="noise grid resolution"):
        simulate_lattice(UniformWeight(), sig, 8, 16, noise=noise)


def test_simulate_spot_checks_the_convolution():
    # the FFT path and the direct sum are the same numbers by construction;
    # a finer sigma grid than the noise grid exercises the resampling branch
    sig = sample_volatility(LogGaussianVol(0.0, 0.25, 0.25), 128, seed=9)
    fld = simulate_lattice(UniformWeight(), sig, 4, 64, seed=7)
    assert fld.provenance["direct_check_error"] < 1e-12


def test_simulate_variance_at_center_matches_window_area():
    # Y(1/2,1/2) integrates white noise over a 1/2 x 1/2 window: variance 1/4.
    # Window edges sit on noise-cell edges, so the lattice law is exact here.
    sig = sample_volatility(ConstantVol(1.0), 16, seed=0)
    reps = 400
    vals = [
        simulate_lattice(UniformWeight(), sig, 2, 16, seed=21, rep=r, check=False).values[1, 1]
        for r in range(reps)
    ]
    second = np.mean(np.square(vals))
    assert abs(second - 0.25) < 5 * 0.25 * np.sqrt(2 / reps)


def test_lattice_field_rejects_bad_values():
    with pytest.raises(ValueError, match="shape"):
        LatticeField(n=4, values=np.zeros((4, 4)))
    bad = np.zeros((5, 5))
    bad[2, 2] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        LatticeField(n=4, values=bad)


# ---------------------------------------------------------------- increments

def test_increments_of_product_field_are_cellwise_products():
    # Y(s,t) = s*t has four-corner difference (1/n)^2 over every lattice cell,
    # whichever k-th cells the thinning keeps
    n = 4
    s = np.arange(n + 1) / n
    fld = LatticeField(n=n, values=np.outer(s, s))
    for k in (1, 2, 4):
        inc = increments(fld, k)
        assert inc.values.shape == (n // k, n // k)
        assert np.allclose(inc.values, 1.0 / n**2, rtol=0, atol=1e-16)


def test_increments_kill_affine_fields():
    n = 6
    s = np.arange(n + 1) / n
    vals = 2.0 - 3.0 * s[:, None] + 0.5 * s[None, :]
    got = increments(LatticeField(n=n, values=vals), 2).values
    assert np.allclose(got, 0.0, rtol=0, atol=1e-15)  # 1/6 is not dyadic


def test_increments_validate_the_thinning():
    fld = LatticeField(n=4, values=np.zeros((5, 5)))
    with pytest.raises(ValueError, match="thinning"):
        increments(fld, 0)
    with pytest.raises(ValueError, match="thinning"):
        increments(fld, 5)
    with pytest.raises(ValueError, match="shape"):
        IncrementField(n=4, k=2, values=np.zeros((3, 3)))


# ---------------------------------------------------- exact covariance engine

def test_uniform_covariance_matches_hand_derivation():
    # n=8, k=4: one-axis difference of the window indicator is +1 / -1 on two
    # strips of width 1/n; neighbours k/n = window width apart share one strip,
    # giving axis covariance -(1/n)(2/n) against variance (2/n)^2 per axis:
    # correlation -1/2 on one axis, +1/4 on both, times sigma0^2 c_n = 0.25.
    sig = sample_volatility(ConstantVol(2.0), 16, seed=0)
    cov = increment_covariance(UniformWeight(), sig, 8, 4)
    expected = np.array(
        [
            [0.25, -0.125, -0.125, 0.0625],
            [-0.125, 0.25, 0.0625, -0.125],
            [-0.125, 0.0625, 0.25, -0.125],
            [0.0625, -0.125, -0.125, 0.25],
        ]
    )
    assert cov.engine == "uniform-strips"
    assert np.allclose(cov.matrix, expected, rtol=0, atol=1e-15)
    assert rho_bar(cov) == pytest.approx(0.5, abs=1e-14)
    assert cov.c_n == pytest.approx(4.0 / 64, rel=1e-12)
    assert np.allclose(np.diag(cov.correlation()), 1.0)
    assert np.allclose(cov.normalized(), expected / cov.c_n)


def test_strips_engine_agrees_with_stationary_engine():
    from ambitlab.simulate import _G2_QUAD, _stationary_gamma

    sig = sample_volatility(ConstantVol(1.5), 16, seed=0)
    cov = increment_covariance(UniformWeight(), sig, 8, 2)
    gam = _stationary_gamma(UniformWeight(), 8, 2, 4, _G2_QUAD)
    idx = cov.indices
    di = idx[:, None, 0] - idx[None, :, 0]
    dj = idx[:, None, 1] - idx[None, :, 1]
    alt = 1.5**2 * gam[di + 3, dj + 3]
    assert np.allclose(cov.matrix, alt, rtol=1e-13, atol=1e-16)


def test_strips_engine_with_varying_volatility_against_cell_sums():
    # independent reference: loop over volatility cells and accumulate the
    # exact overlap area of each signed strip rectangle (all strip edges sit
    # on cell edges for these resolutions, so both routes are exact)
    sig = sample_volatility(DeterministicVol("sine_product"), 16, seed=0)
    cov = increment_covariance(UniformWeight(), sig, 8, 4)
    from ambitlab.simulate import _uniform_strips

    strips = _uniform_strips(UniformWeight(), 8, 0.5, cov.indices)
    edges = np.linspace(-1.0, 1.0, 17)
    sq = sig.values**2
    cell = (edges[1] - edges[0]) ** 2

    def overlap(iv, lo, hi):
        return max(0.0, min(iv[1], hi) - max(iv[0], lo))

    ref = np.zeros_like(cov.matrix)
    for a, (upa, uma, vpa, vma) in enumerate(strips):
        for b, (upb, umb, vpb, vmb) in enumerate(strips):
            acc = 0.0
            for i in range(16):
                for j in range(16):
                    us = sum(
                        s1 * s2 * overlap(
                            (max(iv1[0], iv2[0]), min(iv1[1], iv2[1])),
                            edges[i],
                            edges[i + 1],
                        )
                        for iv1, s1 in (upa, uma)
                        for iv2, s2 in (upb, umb)
                        if min(iv1[1], iv2[1]) > max(iv1[0], iv2[0])
                    )
                    if us == 0.0:
                        continue
                    vs = sum(
                        s1 * s2 * overlap(
                            (max(iv1[0], iv2[0]), min(iv1[1], iv2[1])),
                            edges[j],
                            edges[j + 1],
                        )
                        for iv1, s1 in (vpa, vma)
                        for iv2, s2 in (vpb, vmb)
                        if min(iv1[1], iv2[1]) > max(iv1[0], iv2[0])
                    )
                    acc += sq[i, j] * us * vs
            ref[a, b] = acc
    assert np.allclose(cov.matrix, ref, rtol=1e-12, atol=1e-16)
    assert cell > 0  # silence linters: cell area folds into the overlaps


def test_singular_covariance_diagonal_is_cn():
    sig = sample_volatility(ConstantVol(1.0), 16, seed=0)
    sw = SingularWeight(alpha=0.75)
    cov = increment_covariance(sw, sig, 8, 4)
    assert cov.engine == "stationary-autocorrelation"
    assert np.allclose(np.diag(cov.matrix), compute_cn(sw, 8), rtol=1e-12)
    # negative dependence dominates among thinned neighbours of this kernel
    assert rho_bar(cov) < 0.2


def test_covariance_rejects_unsupported_combinations():
    sine = sample_volatility(DeterministicVol("sine_product"), 16, seed=0)
    const = sample_volatility(ConstantVol(1.0), 16, seed=0)
    with pytest.raises(ValueError, match="simulation route"):
        increment_covariance(SingularWeight(alpha=0.75), sine, 8, 4)
    with pytest.raises(ValueError, match="antiderivative"):
        increment_covariance(
            SingularWeight(alpha=0.75, ell=SlowFunction.from_catalog("cos_quarter")),
            const,
            8,
            4,
        )
    with pytest.raises(ValueError, match="cap"):
        increment_covariance(UniformWeight(), const, 256, 4)
    with pytest.raises(ValueError, match="thinning"):
        increment_covariance(UniformWeight(), const, 8, 0)
    with pytest.raises(ValueError, match="simulation route"):
        increment_covariance(TriangleWeight(alpha=0.75), const, 8, 4)


def test_covariance_container_validation():
    idx = np.array([[1, 1], [1, 2]])
    with pytest.raises(ValueError, match="symmetric"):
        IncrementCovariance(
            matrix=np.array([[1.0, 0.5], [0.2, 1.0]]), indices=idx,
            n=8, k=4, eps=0.5, c_n=0.0625, engine="x",
        )
    with pytest.raises(ValueError, match="diagonal"):
        IncrementCovariance(
            matrix=np.array([[1.0, 0.0], [0.0, -1.0]]), indices=idx,
            n=8, k=4, eps=0.5, c_n=0.0625, engine="x",
        )
    with pytest.raises(ValueError, match="needs at least two"):
        rho_bar(
            IncrementCovariance(
                matrix=np.array([[1.0]]), indices=np.array([[1, 1]]),
                n=8, k=8, eps=1.0, c_n=0.0625, engine="x",
            )
        )


# ----------------------------------------------------- kernel autocorrelation

def test_singular_autocorrelation_frozen_values():
    # frozen from this engine; cross-checked against scipy.integrate.nquad
    # with singular 'points' hints, which agrees within its own reported
    # error estimate at every offset (tightest cases to ~4e-10)
    from ambitlab.simulate import _G2_QUAD, _g2_singular

    sw = SingularWeight(alpha=0.75)
    d = 1.0 / 128.0
    assert _g2_singular(sw, 37 * d, 39 * d, _G2_QUAD) == pytest.approx(
        0.398325244617, rel=1e-9
    )
    assert _g2_singular(sw, 37 * d, -39 * d, _G2_QUAD) == pytest.approx(
        0.169111397608, rel=1e-9
    )
    assert _g2_singular(sw, 5 * d, 0.0, _G2_QUAD) == pytest.approx(
        1.41186467062, rel=1e-9
    )
    assert _g2_singular(sw, 3 * d, 3 * d, _G2_QUAD) == pytest.approx(
        1.44353545125, rel=1e-9
    )


def test_singular_autocorrelation_symmetries():
    from ambitlab.simulate import _G2_QUAD, _g2_singular

    sw = SingularWeight(alpha=0.6)
    base = _g2_singular(sw, 0.1, 0.275, _G2_QUAD)
    # swapping the axes mirrors the kernel across the diagonal; negating the
    # offset is a change of variable in the integral
    assert _g2_singular(sw, 0.275, 0.1, _G2_QUAD) == pytest.approx(base, rel=1e-11)
    assert _g2_singular(sw, -0.1, -0.275, _G2_QUAD) == pytest.approx(base, rel=1e-11)
    assert _g2_singular(sw, 1.0, 0.5, _G2_QUAD) == 0.0


# ------------------------------------------------------------- exact sampling

def test_exact_sampler_reproduces_the_covariance():
    sig = sample_volatility(ConstantVol(1.0), 16, seed=0)
    cov = increment_covariance(SingularWeight(alpha=0.75), sig, 8, 4)
    draws = sample_increments_exact(cov, seed=3, reps=40_000)
    emp = draws.T @ draws / len(draws)
    scale = np.max(np.abs(cov.matrix))
    assert np.max(np.abs(emp - cov.matrix)) < 5 * scale * np.sqrt(2 / 40_000)
    again = sample_increments_exact(cov, seed=3, reps=40_000)
    assert np.array_equal(draws, again)


def test_exact_sampler_rejects_indefinite_matrices():
    cov = IncrementCovariance(
        matrix=np.array([[1.0, 2.0], [2.0, 1.0]]),  # eigenvalues 3 and -1
        indices=np.array([[1, 1], [1, 2]]),
        n=8, k=4, eps=0.5, c_n=0.0625, engine="x",
    )
    with pytest.raises(ValueError, match="PSD"):
        sample_increments_exact(cov, seed=0, reps=10)
    with pytest.raises(ValueError, match="replication"):
        sample_increments_exact(cov, seed=0, reps=0)


def test_thinning_schedule_examples():
    assert admissible_thinning(600, 0.4) == (47, 47 / 600)
    assert admissible_thinning(64, 0.5) == (8, 0.125)
    assert admissible_thinning(64, 0.4) == (13, 13 / 64)


# ------------------------------------------------------------------- exports

def test_field_csv_roundtrip(tmp_path):
    sig = sample_volatility(ConstantVol(1.0), 32, seed=0)
    fld = simulate_lattice(UniformWeight(), sig, 4, 32, seed=9)
    path = tmp_path / "field.csv"
    save_field_csv(fld, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# lattice field: n=4 weight='UniformWeight")
    back = np.loadtxt(path, delimiter=",", comments="#")
    assert np.array_equal(back, fld.values)


def test_covariance_csv_roundtrip(tmp_path):
    sig = sample_volatility(ConstantVol(2.0), 16, seed=0)
    cov = increment_covariance(UniformWeight(), sig, 8, 4)
    path = tmp_path / "cov.csv"
    save_covariance_csv(cov, path)
    lines = path.read_text().splitlines()
    assert lines[0] == (
        "# increment covariance: n=8 k=4 eps=0.5 c_n=0.0625 engine=uniform-strips"
    )
    assert lines[1] == "# index order: (1,1) (1,2) (2,1) (2,2)"
    back = np.loadtxt(path, delimiter=",", comments="#")
    assert np.array_equal(back, cov.matrix)
