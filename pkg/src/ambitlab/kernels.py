r"""Weight kernels, differenced kernels, and their concentration measures.

A weight kernel g lives on a bounded support inside the unit square.  The
lattice at resolution n differences it across one cell in each direction:

.. math:: h_n(s,t) = g(s,t) - g(s-1/n,\,t) - g(s,\,t-1/n) + g(s-1/n,\,t-1/n),

supported in [0, 1+1/n]^2.  The squared mass c_n = \int h_n^2 normalizes the
concentration measure pi_n = h_n^2 / c_n, whose localization as n grows is
what the limit theory runs on.

Variants
--------
``UniformWeight``   indicator of a rectangle; h_n is a separable product of
                    four signed cell indicators, c_n = 4/n^2 exactly.
``SingularWeight``  g(s,t) = (s \vee t)^{-alpha} ell(s \vee t) on the unit
                    square, algebraically singular along the axes' corner.
``TriangleWeight``  g(s,t) = t^{-alpha} ell(t) on the cone
                    {(1-t)/2 < s < (1+t)/2}, singular at the apex (1/2, 0).
``GridWeight``      bilinear interpolation of sampled node values.

Integration strategy: never brute-force 2-D quadrature.  Rows of the Uniform,
Triangle, and Grid kernels have explicit one-dimensional structure (piecewise
constant, resp. piecewise polynomial, in s for fixed t), so masses reduce to
an outer 1-D integral of exact row integrals.  The Singular kernel is
symmetric, h(s,t) = h(t,s), and below the diagonal its only t-dependence sits
in a single band, so masses reduce to column integrals over the lower
triangle.  Outer integrals use fixed graded Gauss-Legendre layouts (geometric
refinement toward algebraic singularities, 40 dyadic levels) evaluated at two
resolutions; disagreement raises :class:`~ambitlab.errors.QuadratureError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from . import regions
from .errors import QuadratureError
from .regions import (
    Difference,
    Everything,
    HalfPlane,
    Intersection,
    Rect,
    Union,
)

__all__ = [
    "SlowFunction",
    "UniformWeight",
    "SingularWeight",
    "TriangleWeight",
    "GridWeight",
    "QuadratureConfig",
    "ConcentrationReport",
    "AmbitSupport",
    "eval_g",
    "eval_h",
    "compute_cn",
    "mu_mass",
    "concentration_mass",
    "concentration_report",
    "concentration_point",
    "near_region",
    "ambit_support",
    "thinning_count",
    "weight_to_config",
    "weight_from_config",
    "save_grid_csv",
    "load_grid_csv",
]


# ---------------------------------------------------------------------------
# slowly varying factors
# ---------------------------------------------------------------------------

def _ell_one_minus_s(x):
    return 1.0 - x


def _ell_one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _ell_cos_quarter(x):
    return np.cos(0.5 * np.pi * np.asarray(x, dtype=float))


def _ell_smooth_cutoff(x):
    # (1 - x)^2: derivative vanishes at 1, useful for widened thinning ranges
    return (1.0 - np.asarray(x, dtype=float)) ** 2


_ELL_CATALOG = {
    "one_minus_s": (_ell_one_minus_s, dict(ell0_nonzero=True, ell1_zero=True, derivative_bound=1.0, derivative1_zero=False)),
    "one": (_ell_one, dict(ell0_nonzero=True, ell1_zero=False, derivative_bound=0.0, derivative1_zero=True)),
    "cos_quarter": (_ell_cos_quarter, dict(ell0_nonzero=True, ell1_zero=True, derivative_bound=0.5 * np.pi, derivative1_zero=False)),
    "smooth_cutoff": (_ell_smooth_cutoff, dict(ell0_nonzero=True, ell1_zero=True, derivative_bound=2.0, derivative1_zero=True)),
}


@dataclass(frozen=True)
class SlowFunction:
    """A named slowly-varying factor on [0, 1] with declared boundary flags.

    The flags are declarations; ``validate()`` (run on construction) scans a
    dense grid and rejects declarations the catalog closure contradicts.
    ``derivative1_zero`` marks the optional extra smoothness at 1 that widens
    the admissible thinning range; it is off for the default factor 1 - s.
    """

    name: str = "one_minus_s"
    ell0_nonzero: bool = True
    ell1_zero: bool = True
    derivative_bound: float = 1.0
    derivative1_zero: bool = False

    def __post_init__(self):
        if self.name not in _ELL_CATALOG:
            raise ValueError(f"unknown slow-function name {self.name!r}; catalog: {sorted(_ELL_CATALOG)}")
        self.validate()

    @classmethod
    def from_catalog(cls, name):
        if name not in _ELL_CATALOG:
            raise ValueError(f"unknown slow-function name {name!r}; catalog: {sorted(_ELL_CATALOG)}")
        return cls(name=name, **_ELL_CATALOG[name][1])

    def __call__(self, x):
        return _ELL_CATALOG[self.name][0](x)

    def validate(self, gridsize=4096):
        x = np.linspace(1.0 / gridsize, 1.0 - 1.0 / gridsize, gridsize)
        vals = np.asarray(self(x), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"slow function {self.name!r} is not finite on (0,1)")
        slope = np.max(np.abs(np.diff(vals) / np.diff(x)))
        if slope > self.derivative_bound * (1.0 + 1e-6) + 1e-9:
            raise ValueError(
                f"declared derivative bound {self.derivative_bound} violated by "
                f"{self.name!r} (observed slope {slope:.6g})"
            )
        if self.ell0_nonzero and abs(vals[0]) < 1e-6:
            raise ValueError(f"{self.name!r} declared nonvanishing at 0 but evaluates to ~0")
        if self.ell1_zero and abs(vals[-1]) > 1e-2:
            raise ValueError(f"{self.name!r} declared vanishing at 1 but evaluates to {vals[-1]:.4g}")
        if not self.ell1_zero and abs(vals[-1]) < 1e-6:
            raise ValueError(f"{self.name!r} declared nonvanishing at 1 but evaluates to ~0")


# ---------------------------------------------------------------------------
# weight specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformWeight:
    """Indicator of the rectangle [s1, s2] x [t1, t2], optionally scaled."""

    s1: float = 0.25
    s2: float = 0.75
    t1: float = 0.25
    t2: float = 0.75
    scale: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.s1 < self.s2 <= 1.0 and 0.0 <= self.t1 < self.t2 <= 1.0):
            raise ValueError(f"rectangle corners must satisfy 0 <= lo < hi <= 1, got {self!r}")
        if self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class SingularWeight:
    """g(s,t) = (s v t)^(-alpha) ell(s v t) on the unit square, alpha in (0,1)."""

    alpha: float
    ell: SlowFunction = field(default_factory=SlowFunction)
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"singularity exponent must lie in (0,1), got {self.alpha}")
        if self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class TriangleWeight:
    """g(s,t) = t^(-alpha) ell(t) on the cone {(1-t)/2 < s < (1+t)/2}, alpha in (1/2,1)."""

    alpha: float
    ell: SlowFunction = field(default_factory=SlowFunction)
    scale: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.alpha < 1.0:
            raise ValueError(f"cone exponent must lie in (1/2,1), got {self.alpha}")
        if self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True, eq=False)
class GridWeight:
    """Bilinear interpolation of node samples g(i/M, j/M), zero outside [0,1]^2.

    ``values[i, j]`` is the node value at (i/M, j/M); the array is read-only.
    Instances hash by identity (the payload is an array), which is what the
    per-spec caches rely on.
    """

    values: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise ValueError(f"grid values must be square (M+1, M+1) with M >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def resolution(self):
        return self.values.shape[0] - 1


# ---------------------------------------------------------------------------
# kernel evaluation
# ---------------------------------------------------------------------------

def _f_radial(spec, r):
    """The profile r^(-alpha) ell(r) for r in (0,1), +inf at 0, 0 outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > 0.0) & (r < 1.0)
    ri = r[inside]
    out[inside] = ri ** (-spec.alpha) * spec.ell(ri)
    out[r == 0.0] = np.inf
    return out


def eval_g(spec, s, t):
    """Weight kernel value(s) at (s, t); zero outside the support.

    Points where the kernel diverges (the singular corner of the Singular
    variant) return +inf -- the value is flagged rather than clamped, and no
    quadrature rule in this module ever places a node there.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    t = np.atleast_1d(t)

    if isinstance(spec, UniformWeight):
        out = np.where(
            (spec.s1 <= s) & (s <= spec.s2) & (spec.t1 <= t) & (t <= spec.t2),
            spec.scale,
            0.0,
        )
    elif isinstance(spec, SingularWeight):
        r = np.maximum(s, t)
        quadrant = (s >= 0.0) & (t >= 0.0)
        out = np.zeros_like(r)
        pos = quadrant & (r > 0.0) & (r < 1.0)
        out[pos] = spec.scale * r[pos] ** (-spec.alpha) * spec.ell(r[pos])
        out[quadrant & (r == 0.0)] = np.inf
    elif isinstance(spec, TriangleWeight):
        inside = (t > 0.0) & (t < 1.0) & (np.abs(2.0 * s - 1.0) < t)
        out = np.zeros_like(t)
        ti = t[inside]
        out[inside] = spec.scale * ti ** (-spec.alpha) * spec.ell(ti)
    elif isinstance(spec, GridWeight):
        M = spec.resolution
        inside = (s >= 0.0) & (s <= 1.0) & (t >= 0.0) & (t <= 1.0)
        out = np.zeros_like(s)
        si = np.clip(s[inside] * M, 0.0, M)
        ti = np.clip(t[inside] * M, 0.0, M)
        i0 = np.minimum(si.astype(int), M - 1)
        j0 = np.minimum(ti.astype(int), M - 1)
        fs = si - i0
        ft = ti - j0
        v = spec.values
        out[inside] = spec.scale * (
            v[i0, j0] * (1 - fs) * (1 - ft)
            + v[i0 + 1, j0] * fs * (1 - ft)
            + v[i0, j0 + 1] * (1 - fs) * ft
            + v[i0 + 1, j0 + 1] * fs * ft
        )
    else:
        raise TypeError(f"not a weight spec: {spec!r}")
    return float(out[0]) if scalar else out


def eval_h(spec, n, s, t):
    """Differenced kernel h_n(s,t), supported in [0, 1+1/n]^2."""
    if n < 1:
        raise ValueError(f"lattice resolution must be >= 1, got {n}")
    d = 1.0 / n
    return (
        eval_g(spec, s, t)
        - eval_g(spec, np.asarray(s, dtype=float) - d, t)
        - eval_g(spec, s, np.asarray(t, dtype=float) - d)
        + eval_g(spec, np.asarray(s, dtype=float) - d, np.asarray(t, dtype=float) - d)
    )


def thinning_count(n, kappa):
    """Realized thinning k_n = ceil(n^(1-kappa))."""
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"thinning exponent must lie in (0,1), got {kappa}")
    if n < 1:
        raise ValueError(f"lattice resolution must be >= 1, got {n}")
    return int(math.ceil(n ** (1.0 - kappa) - 1e-12))


# ---------------------------------------------------------------------------
# 1-D quadrature engine (graded Gauss-Legendre layouts)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    levels: int = 40          # dyadic grading levels toward a singular endpoint
    nodes: int = 10           # Gauss-Legendre nodes per graded panel
    smooth_nodes: int = 16    # Gauss-Legendre nodes per adaptive panel
    max_depth: int = 48


_DEFAULT_QUAD = QuadratureConfig()


@lru_cache(maxsize=64)
def _gl(nodes):
    x, w = roots_legendre(nodes)
    return x, w


def _gl_batch(f, los, his, nodes):
    """Gauss-Legendre estimates for a batch of panels in one integrand call."""
    xi, wi = _gl(nodes)
    los = np.asarray(los, dtype=float)
    his = np.asarray(his, dtype=float)
    mid = 0.5 * (los + his)[:, None]
    half = 0.5 * (his - los)[:, None]
    vals = f((mid + half * xi).ravel(), None, None).reshape(len(los), nodes)
    return half[:, 0] * (vals @ wi)


def _adaptive_quad(f, a, b, nodes, tol, max_depth):
    """Bisecting Gauss-Legendre with batched evaluation.

    Panels whose two halves disagree with the parent estimate are split; a
    panel still disagreeing at the depth cap raises.  Integrands here are
    piecewise smooth (kinks where moving region sections cross kernel
    breakpoints), which bisection localizes quickly.
    """
    total = 0.0
    work = [(a, b, _gl_batch(f, [a], [b], nodes)[0], 0)]
    while work:
        los = [w[0] for w in work]
        his = [w[1] for w in work]
        mids = [0.5 * (lo + hi) for lo, hi in zip(los, his)]
        left = _gl_batch(f, los, mids, nodes)
        right = _gl_batch(f, mids, his, nodes)
        nxt = []
        for (lo, hi, est, depth), m, lv, rv in zip(work, mids, left, right):
            refined = lv + rv
            err = abs(refined - est)
            if err <= tol + 1e-15 * abs(refined):
                total += refined
            elif depth >= max_depth:
                raise QuadratureError(
                    f"adaptive panel ({lo}, {hi}) failed to converge "
                    f"(residual {err:.3g} at depth {depth})",
                    estimate=total + refined,
                )
            else:
                nxt.append((lo, m, lv, depth + 1))
                nxt.append((m, hi, rv, depth + 1))
        work = nxt
    return total


def _graded_quad(f, a, b, toward, levels, nodes):
    """Integrate f over (a,b), panels shrinking geometrically toward one end.

    Nodes are generated as offsets from the singular endpoint and handed to
    the integrand alongside the absolute positions, so algebraic profiles can
    be evaluated at full relative precision however deep the grading goes --
    reconstructing the offset by subtracting nearby floats would destroy it.

    The sliver of relative width 2^-levels next to the singular endpoint is
    estimated by geometric extrapolation of the innermost panel ratio: for an
    algebraic singularity the panel masses decay geometrically and the slowly
    varying factor is flat at that scale, so the extrapolated tail stays far
    below the layout-agreement tolerance even when the sliver's true mass
    (which can exceed float resolution to a small power) is not negligible.
    """
    xi, wi = _gl(nodes)
    origin = a if toward == "left" else b
    offs = (b - a) * 2.0 ** (-np.arange(levels, -1.0, -1.0))  # ascending offsets
    lo, hi = offs[:-1], offs[1:]
    mid = 0.5 * (lo + hi)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    delta = mid + half * xi
    if toward == "left":
        x = origin + delta
    else:
        x = origin - delta
        delta = -delta  # offsets are signed: always x - origin
    vals = f(x.ravel(), delta.ravel(), origin).reshape(delta.shape)
    panels = half[:, 0] * (vals @ wi)
    total = float(np.sum(panels))
    # innermost two panels estimate the geometric tail in the skipped sliver
    inner0, inner1 = panels[0], panels[1]
    if inner0 > 0.0 and inner1 > 0.0:
        ratio = inner0 / inner1
        if ratio >= 1.0:
            raise QuadratureError(
                f"graded panels toward {toward} endpoint of ({a}, {b}) do not "
                f"decay (ratio {ratio:.4g}); integrand looks non-integrable",
                estimate=total,
            )
        if ratio > 1e-3:
            total += float(inner0 * ratio / (1.0 - ratio))
    return total


def _integrate_pieces(f, pieces, quadcfg, f_check=None):
    """Sum piece integrals at two resolutions; demand agreement.

    ``pieces`` is a list of (a, b, kind), kind in {"smooth", "left", "right"}
    where left/right mark an algebraic singularity at that endpoint.
    ``f_check`` substitutes a higher-accuracy integrand for the second run
    (used when the integrand itself embeds a fixed inner quadrature layout).
    """
    c = quadcfg

    def run(g, levels, nodes, smooth_nodes):
        spans = [(a, b) for a, b, kind in pieces if b > a and kind == "smooth"]
        scale = float(np.sum(np.abs(_gl_batch(g, *zip(*spans), smooth_nodes)))) if spans else 0.0
        tol = c.rel_tol * max(scale, c.abs_tol) / 8.0 + c.abs_tol
        total = 0.0
        for a, b, kind in pieces:
            if b <= a:
                continue
            if kind == "smooth":
                total += _adaptive_quad(g, a, b, smooth_nodes, tol, c.max_depth)
            else:
                total += _graded_quad(g, a, b, "left" if kind == "left" else "right", levels, nodes)
        return total

    v1 = run(f, c.levels, c.nodes, c.smooth_nodes)
    v2 = run(f_check or f, c.levels + 6, c.nodes + 4, c.smooth_nodes + 8)
    if abs(v1 - v2) > c.rel_tol * max(abs(v1), abs(v2)) + c.abs_tol:
        raise QuadratureError(
            f"kernel-mass quadrature did not stabilize: {v1!r} vs {v2!r}",
            estimate=v2,
        )
    return v2


def _make_pieces(edges, singular_points, lo, hi):
    """Panels between sorted edges clipped to (lo, hi), tagged by singularity."""
    pts = sorted({lo, hi, *(e for e in edges if lo < e < hi)})
    singular = set(singular_points)
    pieces = []
    for a, b in zip(pts[:-1], pts[1:]):
        if any(abs(a - sp) < 1e-15 for sp in singular):
            pieces.append((a, b, "left"))
        elif any(abs(b - sp) < 1e-15 for sp in singular):
            pieces.append((a, b, "right"))
        else:
            pieces.append((a, b, "smooth"))
    return pieces


def _crossing_edges(region, struct_lines, axis):
    """Outer-axis values where a region boundary meets a structural line.

    The inner 1-D reductions are only piecewise smooth in the outer variable:
    a kink appears whenever a moving cross-section endpoint (traveling along a
    region boundary line) passes a line where the integrand itself changes
    formula.  Returns the s-coordinates (``axis=0``) or t-coordinates
    (``axis=1``) of all such intersection points so they can join the outer
    panel edges.
    """
    out = []
    for a1, b1, c1 in regions.boundary_lines(region):
        for a2, b2, c2 in struct_lines:
            det = a1 * b2 - a2 * b1
            if abs(det) < 1e-12:
                continue
            s = (c1 * b2 - c2 * b1) / det
            t = (a1 * c2 - a2 * c1) / det
            out.append(s if axis == 0 else t)
    return out


# ---------------------------------------------------------------------------
# squared-kernel masses by dimensional reduction
# ---------------------------------------------------------------------------

def _profile(spec, r):
    """The radial/height profile r^(-alpha) ell(r), zero outside (0,1).

    Callers guarantee r != 0; accepts scalars or arrays.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > 0.0) & (r < 1.0)
    ri = r[inside]
    out[inside] = spec.scale * ri ** (-spec.alpha) * spec.ell(ri)
    return out if out.ndim else float(out)


def _row_breaks_uniform(spec, n):
    d = 1.0 / n
    sb = np.array([spec.s1, spec.s1 + d, spec.s2, spec.s2 + d])
    tb = [spec.t1, spec.t1 + d, spec.t2, spec.t2 + d]
    return (lambda t: sb), tb


def _row_breaks_grid(spec, n):
    d = 1.0 / n
    M = spec.resolution
    base = np.arange(M + 1) / M
    sb = np.unique(np.concatenate([base, base + d]))
    return (lambda t: sb), list(sb)


def _mu_rowwise(spec, n, region, quadcfg, piece_nodes):
    """Integral of h_n^2 over a region for kernels with bounded rows.

    Rows of the rectangle-indicator kernel are piecewise constant in s
    (``piece_nodes = 0``: the midpoint value is exact on each piece); grid
    kernels have piecewise-bilinear rows, integrated exactly with a few Gauss
    nodes per piece.  The outer t-integral is adaptive.
    """
    d = 1.0 / n
    sbreaks_fn, t_edges = {
        UniformWeight: _row_breaks_uniform,
        GridWeight: _row_breaks_grid,
    }[type(spec)](spec, n)

    if piece_nodes:
        xi, wi = _gl(piece_nodes)

    def rows(ts, deltas, origin):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros_like(ts)
        mids, owners = [], []
        for i, t in enumerate(ts):
            secs = regions.row_sections(region, t)
            secs = regions.clip_intervals(secs, 0.0, 1.0 + d)
            if not secs:
                continue
            brks = sbreaks_fn(t)
            for a, b in secs:
                cuts = [a] + [float(x) for x in brks if a < x < b] + [b]
                for lo, hi in zip(cuts[:-1], cuts[1:]):
                    if hi > lo:
                        mids.append((lo, hi))
                        owners.append(i)
        if not mids:
            return out
        bounds = np.asarray(mids)
        owners = np.asarray(owners)
        lo, hi = bounds[:, 0], bounds[:, 1]
        if piece_nodes:
            x = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * xi
            tt = np.broadcast_to(ts[owners][:, None], x.shape)
            vals = eval_h(spec, n, x.ravel(), tt.ravel()) ** 2
            contrib = 0.5 * (hi - lo) * (vals.reshape(x.shape) @ wi)
        else:
            x = 0.5 * (lo + hi)
            vals = eval_h(spec, n, x, ts[owners]) ** 2
            contrib = (hi - lo) * vals
        np.add.at(out, owners, contrib)
        return out

    struct = [(1.0, 0.0, float(sv)) for sv in sbreaks_fn(0.0)]
    edges = list(t_edges) + regions.t_breakpoints(region)
    edges += _crossing_edges(region, struct, axis=1)
    pieces = _make_pieces(edges, [], 0.0, 1.0 + d)
    return _integrate_pieces(rows, pieces, quadcfg)


def _mu_triangle(spec, n, region, quadcfg):
    """Integral of h_n^2 over a region for the cone kernel.

    For fixed t the differenced kernel is piecewise constant in s: a signed
    combination of the cone cross-section I(t), its 1/n-shift, and the same
    pair one lattice row down.  Rows are summed exactly from symbolic
    breakpoints expressed as (multiple of 1/n) + (coefficient) * u, where u
    is the exact offset of t from the active singular height (0 or 1/n) --
    keeping piece lengths of order u exact however deep the outer grading
    goes.  Everything is done in the centered coordinate y = 2s - 1, where
    the cross-section is just (-t, t).
    """
    d = 1.0 / n

    def rows(ts, deltas, origin):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if origin is not None and origin == 0.0:
            us = np.atleast_1d(deltas)           # u == t, exact near zero
            mode = "zero"
        elif origin is not None and origin == d:
            us = np.atleast_1d(deltas)           # u == t - d, exact
            mode = "shift"
        else:
            us = ts - d
            mode = "shift"
        out = np.zeros_like(ts)
        for i, (t, u) in enumerate(zip(ts, us)):
            if t <= 0.0 or t >= 1.0 + d:
                continue
            ft = _profile(spec, t)
            tau = t - d if mode == "zero" else u
            ftau = _profile(spec, tau) if tau > 0.0 else 0.0
            if ft == 0.0 and ftau == 0.0:
                continue
            # symbolic y-breakpoints (base, coeff): position = base + coeff*u
            if mode == "zero":
                cur = ((0.0, -1.0), (0.0, 1.0))              # (-t, t)
                curs = ((2.0 * d, -1.0), (2.0 * d, 1.0))     # (2d-t, 2d+t)
                old = olds = None                            # tau < 0 here
            else:
                cur = ((-d, -1.0), (d, 1.0))                 # t = d + u
                curs = ((d, -1.0), (3.0 * d, 1.0))
                old = ((0.0, -1.0), (0.0, 1.0))              # (-tau, tau)
                olds = ((2.0 * d, -1.0), (2.0 * d, 1.0))
            brks = [*cur, *curs]
            if ftau != 0.0 and old is not None:
                brks.extend((*old, *olds))

            def pos(bk):
                return bk[0] + bk[1] * u

            def before(m, bk):
                # is symbolic midpoint m strictly left of breakpoint bk?
                if m[0] == bk[0]:
                    return (m[1] - bk[1]) * u < 0.0
                return pos(m) < pos(bk)

            def inside(m, iv):
                return bool(iv is not None and before(iv[0], m) and before(m, iv[1]))

            secs = regions.row_sections(region, t)
            secs = regions.clip_intervals(secs, 0.0, 1.0 + d)
            acc = 0.0
            for a, b in secs:
                ya, yb = 2.0 * a - 1.0, 2.0 * b - 1.0
                cuts = [(ya, 0.0)] + sorted(
                    (bk for bk in brks if before((ya, 0.0), bk) and before(bk, (yb, 0.0))),
                    key=pos,
                ) + [(yb, 0.0)]
                for lo, hi in zip(cuts[:-1], cuts[1:]):
                    length = (hi[0] - lo[0]) + (hi[1] - lo[1]) * u
                    if length <= 0.0:
                        continue
                    m = (0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]))
                    v = 0.0
                    if ft != 0.0:
                        v += ft * (inside(m, cur) - inside(m, curs))
                    if ftau != 0.0:
                        v -= ftau * (inside(m, old) - inside(m, olds))
                    acc += length * v * v
            out[i] = 0.5 * acc  # ds = dy / 2
        return out

    # cone edges 2s -+ t = 1 of all four shifted kernel copies
    struct = [(2.0, -1.0, v) for v in (1.0, 1.0 + 2.0 * d, 1.0 - d, 1.0 + d)]
    struct += [(2.0, 1.0, v) for v in (1.0, 1.0 + 2.0 * d, 1.0 + d, 1.0 + 3.0 * d)]
    edges = [0.0, d, 2.0 * d, 3.0 * d, 1.0, 1.0 + d] + regions.t_breakpoints(region)
    edges += _crossing_edges(region, struct, axis=1)
    # opposite-family cone edges cross each other at multiples of d/2; rows
    # kink there even without a region cut (the full-mass pieces happen to
    # put dyadic panel edges on those heights, arbitrary regions do not)
    edges += [0.5 * d, 1.5 * d, 2.5 * d]
    pieces = _make_pieces(edges, [0.0, d], 0.0, 1.0 + d)
    return _integrate_pieces(rows, pieces, quadcfg)


def _mu_singular_half(spec, n, region, quadcfg):
    """Integral of h_n^2 over region intersected with the lower triangle {t < s}.

    Below the diagonal the differenced kernel at fixed s > 1/n is built from
    three profile values: with sig = s - 1/n,

    ========================  =======================
    t in (0, min(1/n, sig))   f(s) - f(sig)
    t in (1/n, sig)           0
    t in (sig, 1/n)           f(s) - f(t)
    t in (max(1/n, sig), 1)   f(sig) - f(t)
    t in (1, s)               f(sig)
    ========================  =======================

    (for s <= 1/n the whole column is the constant f(s)).  Pieces varying
    through f(t) integrate on panels doubling geometrically in absolute t, so
    the per-panel relative variation stays bounded however close the lower
    endpoint sits to the origin.  The offset sig arrives exact from the outer
    graded layout; the table above never subtracts nearby floats.
    """
    d = 1.0 / n
    inner_nodes = quadcfg.nodes

    def make_col(nodes, doublings=64):
        xi, wi = _gl(nodes)
        growth = 2.0 ** np.arange(doublings, dtype=float)

        def col(ss, deltas, origin):
            ss = np.atleast_1d(np.asarray(ss, dtype=float))
            if origin is not None and origin == d:
                sigs = np.atleast_1d(deltas)
            else:
                sigs = ss - d
            out = np.zeros_like(ss)
            own, los, his, consts = [], [], [], []
            for i, (s, sig) in enumerate(zip(ss, sigs)):
                top = min(s, 1.0 + d)
                secs = regions.col_sections(region, s)
                secs = regions.clip_intervals(secs, 0.0, top)
                if not secs:
                    continue
                fs = _profile(spec, s)
                if sig <= 0.0:
                    # whole column constant: the shifted copies fall outside
                    for a, b in secs:
                        out[i] += (b - a) * fs * fs
                    continue
                fsig = _profile(spec, sig)
                if sig < d:
                    # below 1/n: (0, sig) constant, (sig, 1/n) varying in f(t)
                    for a, b in regions.clip_intervals(secs, 0.0, d):
                        local = [a] + ([sig] if a < sig < b else []) + [b]
                        for lo, hi in zip(local[:-1], local[1:]):
                            if hi <= lo:
                                continue
                            if 0.5 * (lo + hi) < sig:
                                v = fs - fsig
                                out[i] += (hi - lo) * v * v
                            else:
                                own.append(i)
                                los.append(lo)
                                his.append(hi)
                                consts.append(fs)
                    # top band (1/n, s): true width sig, kept as exact offsets
                    # from 1/n even when s = 1/n + sig rounds back to 1/n and
                    # the float interval collapses (Sterbenz: a - d is exact);
                    # f is smooth here, one Gauss panel suffices
                    if top > d:
                        trail = [(a - d, sig if b >= top else b - d)
                                 for a, b in regions.clip_intervals(secs, d, top)]
                    elif regions.contains(region, s, d):
                        trail = [(0.0, sig)]
                    else:
                        trail = []
                    for lo_off, hi_off in trail:
                        w = hi_off - lo_off
                        if w > 0.0:
                            tq = d + (lo_off + 0.5 * w * (1.0 + xi))
                            vals = (fsig - _profile(spec, tq)) ** 2
                            out[i] += 0.5 * w * float(vals @ wi)
                    continue
                cuts = sorted({d, sig, 1.0})
                for a, b in secs:
                    local = [a] + [x for x in cuts if a < x < b] + [b]
                    for lo, hi in zip(local[:-1], local[1:]):
                        if hi <= lo:
                            continue
                        m = 0.5 * (lo + hi)
                        if m < d:
                            v = fs - fsig
                            out[i] += (hi - lo) * v * v
                        elif m < sig:
                            pass  # shifted copies cancel exactly
                        elif m >= 1.0:
                            out[i] += (hi - lo) * fsig * fsig
                        else:
                            own.append(i)
                            los.append(lo)
                            his.append(hi)
                            consts.append(fsig)
            if own:
                own = np.asarray(own)
                lo = np.asarray(los)
                hi = np.asarray(his)
                amp = np.asarray(consts)
                edges = np.minimum(lo[:, None] * growth, hi[:, None])
                edges = np.concatenate([edges, hi[:, None]], axis=1)
                a, b = edges[:, :-1], edges[:, 1:]
                x = 0.5 * (a + b)[:, :, None] + 0.5 * (b - a)[:, :, None] * xi
                hv = (amp[:, None, None] - _profile(spec, x.ravel()).reshape(x.shape)) ** 2
                contrib = np.sum(0.5 * (b - a)[:, :, None] * wi * hv, axis=(1, 2))
                np.add.at(out, own, contrib)
            return out

        return col

    col_lo = make_col(inner_nodes)
    col_hi = make_col(inner_nodes + 4)

    # inner formula changes on t in {0, 1/n, 1} and on the moving cuts
    # t = s and t = s - 1/n
    struct = [(0.0, 1.0, 0.0), (0.0, 1.0, d), (0.0, 1.0, 1.0),
              (1.0, -1.0, 0.0), (1.0, -1.0, d)]
    edges = [0.0, d, 2.0 * d, 1.0, 1.0 + d] + regions.s_breakpoints(region)
    edges += _crossing_edges(region, struct, axis=0)
    pieces = _make_pieces(edges, [0.0, d], 0.0, 1.0 + d)
    return _integrate_pieces(col_lo, pieces, quadcfg, f_check=col_hi)


def mu_mass(spec, n, region=None, quadcfg=None):
    """mu_n(region) = integral of h_n^2 over the region (whole plane if None)."""
    if n < 2:
        raise ValueError(f"lattice resolution must be >= 2 for mass integrals, got {n}")
    region = Everything() if region is None else region
    quadcfg = quadcfg or _DEFAULT_QUAD
    if isinstance(spec, UniformWeight):
        return _mu_rowwise(spec, n, region, quadcfg, piece_nodes=0)
    if isinstance(spec, TriangleWeight):
        return _mu_triangle(spec, n, region, quadcfg)
    if isinstance(spec, GridWeight):
        return _mu_rowwise(spec, n, region, quadcfg, piece_nodes=5)
    if isinstance(spec, SingularWeight):
        lower = _mu_singular_half(spec, n, region, quadcfg)
        upper = _mu_singular_half(spec, n, regions.transpose(region), quadcfg)
        return lower + upper
    raise TypeError(f"not a weight spec: {spec!r}")


@lru_cache(maxsize=4096)
def _cn_cached(spec, n, quadcfg):
    return mu_mass(spec, n, None, quadcfg)


def compute_cn(spec, n, quadcfg=None):
    """Squared mass c_n = integral of h_n^2 (cached per spec instance)."""
    return _cn_cached(spec, n, quadcfg or _DEFAULT_QUAD)


def concentration_mass(spec, n, region, quadcfg=None):
    """pi_n(region) = mu_n(region) / c_n."""
    return mu_mass(spec, n, region, quadcfg) / compute_cn(spec, n, quadcfg)


# ---------------------------------------------------------------------------
# concentration geometry
# ---------------------------------------------------------------------------

def concentration_point(spec):
    """Limit point of the concentration measures, when there is a single one."""
    if isinstance(spec, SingularWeight):
        return (0.0, 0.0)
    if isinstance(spec, TriangleWeight):
        return (0.5, 0.0)
    return None


def near_region(spec, eps):
    """The shrinking neighborhood E carrying the concentration mass."""
    if eps <= 0.0:
        raise ValueError(f"neighborhood size must be positive, got {eps}")
    if isinstance(spec, SingularWeight):
        return Rect(0.0, eps, 0.0, eps)
    if isinstance(spec, TriangleWeight):
        return Rect(0.5 - 0.5 * eps, 0.5 + 0.5 * eps, 0.0, 0.5 * eps)
    raise ValueError(
        f"{type(spec).__name__} has no single concentration point; "
        "pass an explicit center to build a neighborhood"
    )


def corner_squares(spec, n):
    """The four corner cells carrying the Uniform kernel's concentration mass."""
    if not isinstance(spec, UniformWeight):
        raise ValueError("corner squares exist for the rectangle-indicator kernel only")
    d = 1.0 / n
    return {
        "corner_11": Rect(spec.s1, spec.s1 + d, spec.t1, spec.t1 + d),
        "corner_21": Rect(spec.s2, spec.s2 + d, spec.t1, spec.t1 + d),
        "corner_12": Rect(spec.s1, spec.s1 + d, spec.t2, spec.t2 + d),
        "corner_22": Rect(spec.s2, spec.s2 + d, spec.t2, spec.t2 + d),
    }


@dataclass(frozen=True)
class ConcentrationReport:
    n: int
    c_n: float
    kappa: float | None
    k_n: int | None
    eps_n: float | None
    region_masses: dict
    assumption2_ratio: float | None
    notes: tuple = ()


def concentration_report(spec, n, kappa=None, quadcfg=None):
    """Masses of the canonical concentration regions at resolution n.

    With a thinning exponent, also reports the escaping-mass ratio
    pi_n(complement of E_n) / eps_n^2 at the realized eps_n = k_n / n.
    """
    quadcfg = quadcfg or _DEFAULT_QUAD
    c_n = compute_cn(spec, n, quadcfg)
    notes = []
    masses = {}
    if isinstance(spec, UniformWeight):
        for name, reg in corner_squares(spec, n).items():
            masses[name] = mu_mass(spec, n, reg, quadcfg) / c_n
        exact = 4.0 / n ** 2 * spec.scale ** 2
        if abs(c_n - exact) > 1e-8 * exact:
            notes.append(f"separable mass {c_n!r} deviates from exact-geometry value {exact!r}")
    else:
        d = 1.0 / n
        if concentration_point(spec) is not None:
            masses["near_cell"] = mu_mass(spec, n, near_region(spec, 2.0 * d), quadcfg) / c_n

    k_n = eps_n = ratio = None
    if kappa is not None:
        k_n = thinning_count(n, kappa)
        eps_n = k_n / n
        if concentration_point(spec) is not None:
            inside = mu_mass(spec, n, near_region(spec, eps_n), quadcfg) / c_n
            masses["near_eps"] = inside
            ratio = (1.0 - inside) / eps_n ** 2
        else:
            notes.append("no single concentration point; escaping-mass ratio undefined")
    return ConcentrationReport(
        n=n,
        c_n=c_n,
        kappa=kappa,
        k_n=k_n,
        eps_n=eps_n,
        region_masses=masses,
        assumption2_ratio=ratio,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# supports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmbitSupport:
    """Support A_g of the weight kernel plus the moving sets A(s,t) = (s,t) - A_g."""

    region: object

    def at(self, s, t):
        return regions.reflect_translate(self.region, s, t)

    def contains(self, s, t):
        return regions.contains(self.region, s, t)


def ambit_support(spec):
    if isinstance(spec, UniformWeight):
        return AmbitSupport(Rect(spec.s1, spec.s2, spec.t1, spec.t2))
    if isinstance(spec, SingularWeight):
        return AmbitSupport(Rect(0.0, 1.0, 0.0, 1.0))
    if isinstance(spec, TriangleWeight):
        # closure of the cone: vertices (1/2, 0), (0, 1), (1, 1)
        return AmbitSupport(
            Intersection(
                (
                    Rect(0.0, 1.0, 0.0, 1.0),
                    HalfPlane(-2.0, -1.0, -1.0),  # 2s + t > 1
                    HalfPlane(2.0, -1.0, 1.0),    # 2s - t < 1
                )
            )
        )
    if isinstance(spec, GridWeight):
        return AmbitSupport(Rect(0.0, 1.0, 0.0, 1.0))
    raise TypeError(f"not a weight spec: {spec!r}")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def weight_to_config(spec):
    """Flat key-value representation (values already stringified)."""
    if isinstance(spec, UniformWeight):
        out = {
            "weight.variant": "uniform",
            "weight.s1": repr(spec.s1),
            "weight.s2": repr(spec.s2),
            "weight.t1": repr(spec.t1),
            "weight.t2": repr(spec.t2),
        }
    elif isinstance(spec, SingularWeight):
        out = {
            "weight.variant": "singular",
            "weight.alpha": repr(spec.alpha),
            "weight.ell": spec.ell.name,
        }
    elif isinstance(spec, TriangleWeight):
        out = {
            "weight.variant": "triangle",
            "weight.alpha": repr(spec.alpha),
            "weight.ell": spec.ell.name,
        }
    elif isinstance(spec, GridWeight):
        raise ValueError("grid-sampled weights serialize through CSV files; store the path instead")
    else:
        raise TypeError(f"not a weight spec: {spec!r}")
    if spec.scale != 1.0:
        out["weight.scale"] = repr(spec.scale)
    return out


def weight_from_config(mapping):
    """Inverse of :func:`weight_to_config`; grid variants load their CSV path."""
    variant = mapping.get("weight.variant")
    if variant is None:
        raise ValueError("missing key weight.variant")
    scale = float(mapping.get("weight.scale", 1.0))
    if variant == "uniform":
        return UniformWeight(
            s1=float(mapping.get("weight.s1", 0.25)),
            s2=float(mapping.get("weight.s2", 0.75)),
            t1=float(mapping.get("weight.t1", 0.25)),
            t2=float(mapping.get("weight.t2", 0.75)),
            scale=scale,
        )
    if variant in ("singular", "triangle"):
        if "weight.alpha" not in mapping:
            raise ValueError(f"missing key weight.alpha for the {variant} variant")
        ell = SlowFunction.from_catalog(mapping.get("weight.ell", "one_minus_s"))
        cls = SingularWeight if variant == "singular" else TriangleWeight
        return cls(alpha=float(mapping["weight.alpha"]), ell=ell, scale=scale)
    if variant == "grid":
        if "weight.path" not in mapping:
            raise ValueError("missing key weight.path for the grid variant")
        return GridWeight(values=load_grid_csv(mapping["weight.path"]), scale=scale)
    raise ValueError(f"unknown weight variant {variant!r}")


def save_grid_csv(path, values):
    """Write node samples with the `resolution=M` header line."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"grid values must be square, got shape {v.shape}")
    M = v.shape[0] - 1
    with open(path, "w") as fh:
        fh.write(f"resolution={M}\n")
        for row in v:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_grid_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("resolution="):
            raise ValueError(f"grid file {path!r} must start with a resolution=M header")
        M = int(header.split("=", 1)[1])
        rows = [[float(x) for x in line.strip().split(",")] for line in fh if line.strip()]
    v = np.asarray(rows, dtype=float)
    if v.shape != (M + 1, M + 1):
        raise ValueError(
            f"grid file {path!r} declares resolution {M} but carries shape {v.shape}"
        )
    return v
