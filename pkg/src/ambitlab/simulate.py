"""Lattice fields driven by planar white noise, and exact increment statistics.

Two routes to the thinned increments:

* end-to-end: draw a noise grid on [-1,1]^2, convolve with the weight, read
  the field off the lattice and difference it (``simulate_lattice`` +
  ``increments``);
* exact-in-law: build the Gaussian covariance of the thinned increment vector
  by quadrature and draw from it directly (``increment_covariance`` +
  ``sample_increments_exact``).  The second route has no discretization bias,
  which matters when the effect under study is of the same order as that bias.

Random streams are tagged per purpose (volatility=1, noise=2, exact draws=3)
so the three never overlap for a shared master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import QuadratureError
from .kernels import (
    QuadratureConfig,
    SingularWeight,
    UniformWeight,
    _integrate_pieces,
    _make_pieces,
    _profile,
    compute_cn,
    eval_g,
    thinning_count,
)

__all__ = [
    "NoiseGrid",
    "LatticeField",
    "IncrementField",
    "IncrementCovariance",
    "sample_noise",
    "simulate_lattice",
    "increments",
    "increment_covariance",
    "sample_increments_exact",
    "rho_bar",
    "save_field_csv",
    "save_covariance_csv",
]

_NOISE_STREAM = 2
_EXACT_STREAM = 3

# autocorrelation stencil of the four-corner difference: the 16 signed
# products of shifted copies collapse onto a 3x3 grid of lattice offsets
_DIFF_STENCIL = np.outer([-1.0, 2.0, -1.0], [-1.0, 2.0, -1.0])


@dataclass(frozen=True, eq=False)
class NoiseGrid:
    """White-noise cell sums on [-1,1]^2: values[c1, c2] ~ N(0, cell area)."""

    values: np.ndarray
    resolution: int
    seed: int
    rep: int = 0

    def __post_init__(self):
        m = self.resolution
        if self.values.shape != (m, m):
            raise ValueError(f"noise grid shape {self.values.shape} != ({m}, {m})")
        cell = (2.0 / m) ** 2
        emp = float(self.values.var())
        # sample variance of m^2 iid draws: 5 standard errors
        if abs(emp - cell) > 5.0 * cell * np.sqrt(2.0) / m:
            raise ValueError(
                f"noise grid variance {emp:.6e} too far from cell area {cell:.6e}"
            )
        self.values.setflags(write=False)

    @property
    def cell_area(self):
        return (2.0 / self.resolution) ** 2


def sample_noise(resolution, seed, rep=0):
    """Draw a NoiseGrid; deterministic in (resolution, seed, rep)."""
    m = int(resolution)
    if m < 2:
        raise ValueError(f"noise resolution must be >= 2, got {resolution}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _NOISE_STREAM, int(rep))))
    vals = rng.standard_normal((m, m)) * (2.0 / m)
    return NoiseGrid(values=vals, resolution=m, seed=int(seed), rep=int(rep))


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Field values at the (n+1)^2 lattice points (i/n, j/n)."""

    n: int
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.n + 1, self.n + 1):
            raise ValueError(
                f"lattice shape {self.values.shape} != ({self.n + 1}, {self.n + 1})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("lattice field contains non-finite values")
        self.values.setflags(write=False)


def simulate_lattice(spec, sigma, n, M, seed=0, rep=0, noise=None, check=True):
    """Moving-average field on the lattice by discrete convolution.

    Y(i/n, j/n) = sum over noise cells of g(i/n - u_c, j/n - v_c) sigma(u_c, v_c) W_c
    with (u_c, v_c) the cell midpoints.  Evaluated with one FFT convolution and
    spot-checked against the direct sum (three lattice points, 1e-10) unless
    ``check`` is disabled.
    """
    n, M = int(n), int(M)
    if n < 1:
        raise ValueError(f"lattice resolution must be >= 1, got {n}")
    if M % (2 * n) != 0:
        raise ValueError(
            f"noise resolution {M} must be a multiple of 2n = {2 * n} so lattice "
            "points sit on cell corners"
        )
    if sigma.resolution < M:
        raise ValueError(
            f"volatility grid (resolution {sigma.resolution}) is coarser than the "
            f"noise grid (resolution {M})"
        )
    if noise is None:
        noise = sample_noise(M, seed, rep)
    elif noise.resolution != M:
        raise ValueError(f"noise grid resolution {noise.resolution} != M = {M}")

    mid = -1.0 + (2.0 * np.arange(M) + 1.0) / M
    if sigma.resolution == M:
        sig = sigma.values
    else:
        sig = sigma.at(mid[:, None], mid[None, :])
    weighted = sig * noise.values

    # g sampled at the midpoint offset lattice ((2j+1)/M, (2l+1)/M)
    offs = (2.0 * np.arange(M) + 1.0) / M
    table = eval_g(spec, offs[:, None], offs[None, :])
    conv = fftconvolve(table, weighted, mode="full")
    q = M // (2 * n)
    pick = np.arange(n + 1) * q + M // 2 - 1
    vals = conv[np.ix_(pick, pick)]

    err = 0.0
    if check:
        for i, j in {(0, 0), (n // 2, n // 2), (n, n)}:
            direct = float(
                np.sum(eval_g(spec, i / n - mid[:, None], j / n - mid[None, :]) * weighted)
            )
            err = max(err, abs(direct - vals[i, j]) / (1.0 + abs(direct)))
        if err > 1e-10:
            raise QuadratureError(
                f"FFT convolution disagrees with direct summation by {err:.3e}"
            )
    prov = {
        "weight": repr(spec),
        "n": n,
        "M": M,
        "noise_seed": noise.seed,
        "noise_rep": noise.rep,
        "sigma_seed": sigma.seed,
        "direct_check_error": err,
    }
    return LatticeField(n=n, values=vals, provenance=prov)


@dataclass(frozen=True, eq=False)
class IncrementField:
    """Lattice-step four-corner differences retained at every k-th point.

    values[i-1, j-1] is the difference over the single 1/n-cell whose upper
    corner is (ik/n, jk/n); thinning drops the cells in between, it does not
    widen them.  That keeps one normalization c_n valid for every k.
    """

    n: int
    k: int
    values: np.ndarray

    def __post_init__(self):
        m = self.n // self.k
        if self.values.shape != (m, m):
            raise ValueError(f"increment matrix shape {self.values.shape} != ({m}, {m})")
        self.values.setflags(write=False)


def increments(fld, k):
    """Four-corner differences at lattice spacing, kept at every k-th point."""
    k = int(k)
    if not 1 <= k <= fld.n:
        raise ValueError(f"thinning k must satisfy 1 <= k <= n = {fld.n}, got {k}")
    m = fld.n // k
    idx = np.arange(1, m + 1) * k
    v = fld.values
    vals = (v[np.ix_(idx, idx)] - v[np.ix_(idx - 1, idx)]
            - v[np.ix_(idx, idx - 1)] + v[np.ix_(idx - 1, idx - 1)])
    return IncrementField(n=fld.n, k=k, values=vals)


# ------------------------------------------------------ exact covariance path

def _profile_antiderivative(spec):
    """Stable increment y -> F(y + w) - F(y) of the antiderivative F = int f.

    Only slow factors whose profile integrates to a finite power sum admit
    one; anything else raises ValueError and the caller falls back to the
    simulation route.
    """
    al, sc, name = spec.alpha, spec.scale, spec.ell.name
    if name == "one":
        coef = [(1.0, 1.0 - al)]
    elif name == "one_minus_s":
        coef = [(1.0, 1.0 - al), (-1.0, 2.0 - al)]
    elif name == "smooth_cutoff":
        coef = [(1.0, 1.0 - al), (-2.0, 2.0 - al), (1.0, 3.0 - al)]
    else:
        raise ValueError(
            f"exact covariance needs a closed-form antiderivative; slow factor "
            f"{name!r} has none (use the simulation route instead)"
        )

    def fdiff(y, w):
        """F(y + w) - F(y) for y >= 0, zero where w <= 0.

        Formed per power term as y**e * expm1(e * log1p(w/y)), never as a
        difference of two antiderivative values: the graded quadrature feeds
        widths w down to ~1e-17 next to a pinch of the wedge, where
        F(y + w) - F(y) computed literally is pure rounding staircase.
        """
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        live = w > 0.0
        at0 = live & (y <= 0.0)
        safe_y = np.where(y > 0.0, y, 1.0)
        safe_w = np.where(live, w, 1.0)
        grow = np.log1p(np.where(live, w, 0.0) / safe_y)
        out = np.zeros(np.broadcast(y, w).shape, dtype=float)
        for c, e in coef:
            term = np.where(at0, safe_w**e, safe_y**e * np.expm1(e * grow))
            out += (c / e) * term
        return sc * np.where(live, out, 0.0)

    return fdiff


def _g2_singular(spec, w1, w2, quadcfg):
    """Autocorrelation of the singular weight: int g(x) g(x + w) dx.

    Splitting along the two max-diagonals x2 = x1 and x2 = x1 + (w1 - w2)
    leaves wedges where the integrand is constant in one coordinate or a
    separable product, so everything collapses to 1-D integrals of
    f(x)f(x+w)*linear and f(x)*(F-difference) with F the profile
    antiderivative.  Offsets from the singular abscissas {0, -w1, -w2}
    arrive exact from the graded layout.
    """
    a1, b1 = max(0.0, -w1), min(1.0, 1.0 - w1)
    a2, b2 = max(0.0, -w2), min(1.0, 1.0 - w2)
    if b1 <= a1 or b2 <= a2:
        return 0.0
    c = w1 - w2
    fdiff = _profile_antiderivative(spec)

    def offs(x, delta, origin, base):
        if origin is not None and origin == base:
            return np.asarray(delta, dtype=float)
        return np.asarray(x, dtype=float) - base

    def pval(x, delta, origin, base):
        return _profile(spec, offs(x, delta, origin, base))

    # Every length/width below is a min over pairwise differences of the
    # window endpoints, each difference formed at its own best precision
    # (constants cancel symbolically, moving endpoints go through offs so a
    # graded origin keeps full relative accuracy).  Subtracting two clipped
    # endpoint values instead goes to rounding noise exactly where the
    # grading dives deepest.

    def region_a(x, delta, origin):
        moving = offs(x, delta, origin, a2 - min(0.0, c))
        length = np.clip(moving, 0.0, b2 - a2)
        return pval(x, delta, origin, 0.0) * pval(x, delta, origin, -w1) * length

    def region_b(x, delta, origin):
        moving = offs(x, delta, origin, a1 + max(0.0, c))
        length = np.clip(moving, 0.0, b1 - a1)
        return pval(x, delta, origin, 0.0) * pval(x, delta, origin, -w2) * length

    def region_c(x, delta, origin):
        width = np.minimum(
            min(-c, b2 - a2),
            np.minimum(offs(x, delta, origin, a2), -offs(x, delta, origin, b2 - c)),
        )
        low = np.maximum(offs(x, delta, origin, -w1), a2 + w2)
        return pval(x, delta, origin, 0.0) * fdiff(low, width)

    def region_d(x, delta, origin):
        width = np.minimum(
            min(c, b1 - a1),
            np.minimum(offs(x, delta, origin, a1), -offs(x, delta, origin, b1 + c)),
        )
        low = np.maximum(offs(x, delta, origin, -w2), a1 + w1)
        return pval(x, delta, origin, 0.0) * fdiff(low, width)

    brks = [a1, b1, a2, b2, a2 - c, b2 - c, a1 + c, b1 + c,
            -w1, -w2, 1.0 - w1, 1.0 - w2, 0.0, 1.0]
    sing = [0.0, -w1, -w2]
    total = 0.0
    plan = [(region_a, a1, b1), (region_b, a2, b2)]
    if c < 0.0:
        plan.append((region_c, a1, b1))
    elif c > 0.0:
        plan.append((region_d, a2, b2))
    for fn, lo, hi in plan:
        pieces = _make_pieces(brks + sing, sing, lo, hi)
        if pieces:
            total += _integrate_pieces(fn, pieces, quadcfg)
    return total


def _g2_uniform(spec, w1, w2):
    len_s = spec.s2 - spec.s1
    len_t = spec.t2 - spec.t1
    ov1 = max(0.0, len_s - abs(w1))
    ov2 = max(0.0, len_t - abs(w2))
    return spec.scale**2 * ov1 * ov2


_G2_QUAD = QuadratureConfig(rel_tol=1e-12, abs_tol=1e-16, levels=48, nodes=14,
                            smooth_nodes=20)


def _stationary_gamma(spec, n, k, m, quadcfg):
    """Gamma[di, dj] = int h(x) h(x + eps*(di-m+1, dj-m+1)) dx on the offset grid.

    Uses Gamma(w) = sum of the 3x3 difference stencil applied to the plain
    weight autocorrelation at lattice points, every argument an exact multiple
    of 1/n.  The zero offset is replaced by the independently computed c_n and
    cross-checked against the stencil value.
    """
    d = 1.0 / n
    if isinstance(spec, UniformWeight):
        def g2s(i, j):
            return _g2_uniform(spec, i * d, j * d)
    elif isinstance(spec, SingularWeight):
        cache = {}

        def g2s(i, j):
            # G2(w) = G2(-w) and G2 is swap-symmetric, so the canonical key is
            # (smaller magnitude, larger magnitude, same-sign flag)
            same = i == 0 or j == 0 or (i > 0) == (j > 0)
            ii, jj = min(abs(i), abs(j)), max(abs(i), abs(j))
            key = (ii, jj, same)
            if key not in cache:
                w2 = jj * d if same else -jj * d
                cache[key] = _g2_singular(spec, ii * d, w2, quadcfg)
            return cache[key]
    else:
        raise ValueError(
            f"stationary exact covariance supports uniform and singular weights; "
            f"got {type(spec).__name__} (use the simulation route)"
        )

    size = 2 * m - 1
    gam = np.zeros((size, size))
    for di in range(-(m - 1), m):
        for dj in range(-(m - 1), m):
            if di < 0 or (di == 0 and dj < 0):
                continue  # fill by symmetry below
            acc = 0.0
            for k1 in (-1, 0, 1):
                for k2 in (-1, 0, 1):
                    acc += _DIFF_STENCIL[k1 + 1, k2 + 1] * g2s(k * di + k1, k * dj + k2)
            gam[di + m - 1, dj + m - 1] = acc
            gam[m - 1 - di, m - 1 - dj] = acc
    cn = compute_cn(spec, n)
    stencil_cn = gam[m - 1, m - 1]
    if abs(stencil_cn - cn) > 1e-6 * cn:
        raise QuadratureError(
            f"autocorrelation stencil c_n {stencil_cn!r} disagrees with the "
            f"direct value {cn!r}"
        )
    gam[m - 1, m - 1] = cn
    return gam


def _prefix_integral(values):
    """Exact integral of the cell-constant field over [-1,x] x [-1,y], vectorized."""
    m = values.shape[0]
    cell = 2.0 / m
    pref = np.zeros((m + 1, m + 1))
    pref[1:, 1:] = np.cumsum(np.cumsum(values, axis=0), axis=1)
    row_pref = np.concatenate([np.zeros((m, 1)), np.cumsum(values, axis=1)], axis=1)
    col_pref = np.concatenate([np.zeros((1, m)), np.cumsum(values, axis=0)], axis=0)

    def at(x, y):
        x = np.clip((np.asarray(x, dtype=float) + 1.0) / cell, 0.0, m)
        y = np.clip((np.asarray(y, dtype=float) + 1.0) / cell, 0.0, m)
        i = np.minimum(x.astype(int), m - 1)
        j = np.minimum(y.astype(int), m - 1)
        fx, fy = x - i, y - j
        # full cell block + partial strip of row i + partial strip of column j
        # + the fractional corner cell
        acc = pref[i, j] + fx * row_pref[i, j] + fy * col_pref[i, j] \
            + fx * fy * values[i, j]
        return acc * cell * cell

    return at


def _rect_integral(pref, u_iv, v_iv):
    """Integral under a prefix function over a rectangle, clipped to [-1,1]^2."""
    (ua, ub), (va, vb) = u_iv, v_iv
    ua, va = max(ua, -1.0), max(va, -1.0)
    ub, vb = min(ub, 1.0), min(vb, 1.0)
    if ub <= ua or vb <= va:
        return 0.0
    vals = pref(np.array([ub, ub, ua, ua]), np.array([vb, va, vb, va]))
    return float(vals[0] - vals[1] - vals[2] + vals[3])


def _uniform_strips(spec, n, eps, idx):
    """Signed u-intervals carrying the s-difference factor for each index.

    The one-axis difference 1[s1,s2](x) - 1[s1,s2](x-d) is +1 on
    [s1, s1+w) and -1 on [s2+d-w, s2+d) with w = min(d, s2-s1); in the u
    variable (u = lattice coordinate minus x) both flip and translate.
    """
    d = 1.0 / n
    wid_s = min(d, spec.s2 - spec.s1)
    wid_t = min(d, spec.t2 - spec.t1)
    out = []
    for i, j in idx:
        u_plus = (eps * i - spec.s1 - wid_s, eps * i - spec.s1)
        u_minus = (eps * i - spec.s2 - d, eps * i - spec.s2 - d + wid_s)
        v_plus = (eps * j - spec.t1 - wid_t, eps * j - spec.t1)
        v_minus = (eps * j - spec.t2 - d, eps * j - spec.t2 - d + wid_t)
        out.append(((u_plus, 1.0), (u_minus, -1.0), (v_plus, 1.0), (v_minus, -1.0)))
    return out


@dataclass(frozen=True, eq=False)
class IncrementCovariance:
    """Dense covariance of the thinned increment vector, row-major indices."""

    matrix: np.ndarray
    indices: np.ndarray  # (dim, 2) of 1-based (i, j)
    n: int
    k: int
    eps: float
    c_n: float
    engine: str

    def __post_init__(self):
        self.matrix.setflags(write=False)
        self.indices.setflags(write=False)
        dim = self.indices.shape[0]
        if self.matrix.shape != (dim, dim):
            raise ValueError("covariance shape does not match index list")
        if not np.allclose(self.matrix, self.matrix.T, rtol=0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.any(np.diag(self.matrix) <= 0.0):
            raise ValueError("covariance diagonal must be strictly positive")

    @property
    def dim(self):
        return self.indices.shape[0]

    def correlation(self):
        sd = np.sqrt(np.diag(self.matrix))
        return self.matrix / np.outer(sd, sd)

    def normalized(self):
        """C tilde: covariance of increments scaled by c_n^{1/2}."""
        return self.matrix / self.c_n


def increment_covariance(spec, sigma, n, k, quadcfg=None, cap=32):
    """Covariance C_ab = int h(eps*i_a - u, eps*j_a - v) h(...b...) sigma^2(u,v).

    Engines: uniform weight with any volatility grid (signed strip overlaps
    against the exact cell-wise integral of sigma^2), or constant volatility
    with a uniform/singular weight (stationary autocorrelation on the 1/n
    lattice).  Other combinations have no exact route here and are rejected.
    """
    n, k = int(n), int(k)
    if not 1 <= k <= n:
        raise ValueError(f"thinning k must satisfy 1 <= k <= n, got {k}")
    m = n // k
    if m > cap:
        raise ValueError(
            f"thinned lattice {m} x {m} exceeds the dense-covariance cap {cap}"
        )
    if m < 1:
        raise ValueError("thinned lattice is empty")
    eps = k / n
    idx = np.array([(i, j) for i in range(1, m + 1) for j in range(1, m + 1)])
    quadcfg = quadcfg or _G2_QUAD
    cn = compute_cn(spec, n)

    constant_sigma = np.all(sigma.values == sigma.values.flat[0])
    if isinstance(spec, UniformWeight):
        strips = _uniform_strips(spec, n, eps, idx)
        pref = _prefix_integral(sigma.values**2)
        dim = len(idx)
        mat = np.zeros((dim, dim))
        for a in range(dim):
            (upa, uma, vpa, vma) = strips[a]
            for b in range(a, dim):
                (upb, umb, vpb, vmb) = strips[b]
                acc = 0.0
                for (uiv1, su1) in (upa, uma):
                    for (uiv2, su2) in (upb, umb):
                        lo = (max(uiv1[0], uiv2[0]), min(uiv1[1], uiv2[1]))
                        if lo[1] <= lo[0]:
                            continue
                        for (viv1, sv1) in (vpa, vma):
                            for (viv2, sv2) in (vpb, vmb):
                                vo = (max(viv1[0], viv2[0]), min(viv1[1], viv2[1]))
                                if vo[1] <= vo[0]:
                                    continue
                                acc += su1 * su2 * sv1 * sv2 * _rect_integral(pref, lo, vo)
                mat[a, b] = mat[b, a] = spec.scale**2 * acc
        engine = "uniform-strips"
    elif constant_sigma:
        s0sq = float(sigma.values.flat[0]) ** 2
        gam = _stationary_gamma(spec, n, k, m, quadcfg)
        di = idx[:, None, 0] - idx[None, :, 0]
        dj = idx[:, None, 1] - idx[None, :, 1]
        mat = s0sq * gam[di + m - 1, dj + m - 1]
        engine = "stationary-autocorrelation"
    else:
        raise ValueError(
            "exact increment covariance is implemented for uniform weights (any "
            "volatility) and constant volatility (uniform/singular weights); "
            "use the simulation route for other combinations"
        )
    return IncrementCovariance(matrix=mat, indices=idx, n=n, k=k, eps=eps,
                               c_n=cn, engine=engine)


def sample_increments_exact(cov, seed, reps):
    """reps x dim Gaussian draws with covariance cov, symmetric square root."""
    reps = int(reps)
    if reps < 1:
        raise ValueError(f"need at least one replication, got {reps}")
    mat = cov.matrix
    w, v = np.linalg.eigh(mat)
    floor = 1e-12 * float(np.trace(mat)) / cov.dim
    if w.min() < -floor:
        raise ValueError(
            f"covariance is not PSD beyond the eigenvalue floor: min eig {w.min():.3e}"
        )
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T  # symmetric square root
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _EXACT_STREAM)))
    z = rng.standard_normal((reps, cov.dim))
    return z @ root


def rho_bar(cov):
    """Largest off-diagonal correlation magnitude."""
    if cov.dim < 2:
        raise ValueError("correlation extremum needs at least two increments")
    corr = np.abs(cov.correlation())
    np.fill_diagonal(corr, 0.0)
    return float(corr.max())


def admissible_thinning(n, kappa):
    """(k_n, eps_n) for the thinning exponent kappa."""
    k = thinning_count(n, kappa)
    return k, k / n


# ------------------------------------------------------------------ exports

def save_field_csv(fld, path):
    with open(path, "w") as fh:
        fh.write(f"# lattice field: n={fld.n}")
        for key, val in fld.provenance.items():
            fh.write(f" {key}={val!r}" if isinstance(val, str) else f" {key}={val}")
        fh.write("\n")
        np.savetxt(fh, fld.values, delimiter=",", fmt="%.17g")


def save_covariance_csv(cov, path):
    with open(path, "w") as fh:
        fh.write(
            f"# increment covariance: n={cov.n} k={cov.k} eps={float(cov.eps)!r} "
            f"c_n={float(cov.c_n)!r} engine={cov.engine}\n"
        )
        fh.write("# index order: " + " ".join(f"({i},{j})" for i, j in cov.indices) + "\n")
        np.savetxt(fh, cov.matrix, delimiter=",", fmt="%.17g")
