"""Decay diagnostics for the squared-increment concentration measures.

The limit theory implemented by this package rests on two numbered
hypotheses about the concentration measures pi_n = h_n^2 dx / c_n:

1. pi_n converges weakly to a fixed purely atomic probability measure pi
   supported on finitely many points (checked here by shrinking-ball probes);
2. for the Gaussian fluctuation result, the pi_n-mass outside a window E_n
   of diameter ~eps_n around the concentration point must vanish faster
   than eps_n^2 (checked here as a ratio that should trend to zero).

For the two kernels that concentrate at a single point -- the corner-singular
profile and the cone profile -- the differenced kernel h_n is piecewise
explicit, and its squared mass splits over a small catalog of named regions:
a window ``E`` around the concentration point, a core ``Etilde`` where the
fresh kernel value stands alone, and edge bands ``B1``..``B4`` where shifted
copies overlap or cancel.  Each band's mass decays polynomially in n with a
known exponent, and the admissible thinning exponents fall out of comparing
those rates.  This module builds the catalogs, measures the regions, fits
the decay slopes, and reports the admissible thinning ranges.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, regions
from .errors import QuadratureError
from .kernels import SingularWeight, TriangleWeight, UniformWeight, GridWeight
from .regions import HalfPlane, Intersection, Rect, Union, band

__all__ = [
    "PROBE_RADII",
    "KappaRange",
    "RegionCatalog",
    "SlopeFit",
    "admissible_kappa",
    "assumption1_probe",
    "assumption2_ratio",
    "first_valid_resolution",
    "region_catalog",
    "region_measures",
    "save_catalog_csv",
    "save_measures_csv",
    "slope_fit",
]

#: Ball radii used by the weak-convergence probe, largest first.
PROBE_RADII = (0.2, 0.1, 0.05)


# ---------------------------------------------------------------------------
# admissible thinning ranges
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KappaRange:
    """Interval (0, upper) or (0, upper] of valid thinning exponents.

    ``upper <= 0`` encodes the empty range; ``note`` carries the reason
    (which kernels admit no single-point concentration at all).
    """

    upper: float
    upper_inclusive: bool = False
    note: str = ""

    @property
    def empty(self):
        return self.upper <= 0.0

    def contains(self, kappa):
        kappa = float(kappa)
        if kappa <= 0.0 or self.empty:
            return False
        if self.upper_inclusive:
            return kappa <= self.upper
        return kappa < self.upper

    def __str__(self):
        if self.empty:
            return "empty"
        bracket = "]" if self.upper_inclusive else ")"
        return f"(0, {self.upper:g}{bracket}"


def admissible_kappa(spec):
    """Thinning exponents for which both hypotheses are known to hold.

    The range depends on how fast the kernel's singularity spreads mass away
    from the concentration point:

    * corner-singular, exponent alpha < 1/2: (0, alpha], closed at the top;
    * corner-singular, alpha >= 1/2: (0, (2*alpha+1)/(2*alpha+3)), open;
    * cone kernel: (0, (2*alpha-1)/(2*alpha+1)), open.

    The rectangle indicator concentrates on four separated corners, so no
    single shrinking window can capture the mass: the range is empty.  Grid
    kernels have no closed-form range; probe them empirically with
    ``assumption2_ratio``.
    """
    if isinstance(spec, SingularWeight):
        a = spec.alpha
        if a < 0.5:
            return KappaRange(upper=a, upper_inclusive=True)
        return KappaRange(upper=(2.0 * a + 1.0) / (2.0 * a + 3.0))
    if isinstance(spec, TriangleWeight):
        a = spec.alpha
        return KappaRange(upper=(2.0 * a - 1.0) / (2.0 * a + 1.0))
    if isinstance(spec, UniformWeight):
        return KappaRange(
            upper=0.0,
            note=(
                "the rectangle indicator concentrates on four separated "
                "corner cells, so the single-window decay hypothesis cannot "
                "hold for any thinning exponent"
            ),
        )
    if isinstance(spec, GridWeight):
        raise ValueError(
            "no closed-form thinning range for grid-sampled kernels; "
            "probe the window ratio empirically with assumption2_ratio"
        )
    raise TypeError(f"not a weight spec: {spec!r}")


# ---------------------------------------------------------------------------
# region catalogs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionCatalog:
    """Named regions splitting the squared differenced kernel's support.

    ``regions`` maps names to geometric region descriptions:

    * ``"E"`` -- the window of diameter ~eps around the concentration point;
    * ``"Etilde"`` -- the core below height 1/n where the fresh kernel value
      stands alone (contained in ``E``);
    * ``"B1"``..``"B4"`` -- edge bands where shifted kernel copies overlap;
    * ``"T"`` (corner-singular only) -- the lower half {t < s}, which carries
      exactly half the total mass by the swap symmetry of that kernel.

    For the corner-singular kernel the band anatomy lives in the lower half
    and each ``Bi`` is stored together with its mirror image across t = s,
    so that ``partition`` -- the window once plus the four bands -- adds up
    to c_n exactly.  ``Etilde`` and ``T`` stay one-sided: their masses match
    the exact one-dimensional formulas without a mirror factor.
    """

    variant: str
    n: int
    kappa: float
    k: int
    eps: float
    regions: dict
    partition: tuple

    def __getitem__(self, name):
        return self.regions[name]


def _slant_band(b, lo, hi):
    """{lo < 2*s + b*t - 1 < hi}: a band along one edge of the cone."""
    return Intersection((
        HalfPlane(-2.0, -b, -(1.0 + lo)),
        HalfPlane(2.0, b, 1.0 + hi),
    ))


def region_catalog(spec, n, kappa):
    """Build the named-region catalog for one (kernel, resolution, thinning).

    The corner-singular catalog follows the anatomy of the lower half
    {t < s}: a strip ``B1`` just above the s-axis, a diagonal band ``B2``
    hugging t = s, the interior ``B3`` between them (where the four kernel
    copies cancel exactly), and the leftovers ``B4`` beyond s = 1.

    The cone catalog follows the edge anatomy of the differenced cone: at
    each height the four shifted copies cut six slanted slivers of width
    (1/n)/2 into the two cone edges -- the fresh edge pair ``B1``, the
    differenced pair ``B2``, the stale pair ``B3`` -- plus the top band
    ``B4`` above height 1.  This anatomy needs the cone at the window edge
    to be wider than the sliver stack, i.e. eps/2 >= 2/n.
    """
    if n < 2:
        raise ValueError(f"lattice resolution must be >= 2, got {n}")
    k = kernels.thinning_count(n, kappa)
    d = 1.0 / n
    eps = k / n

    if isinstance(spec, SingularWeight):
        lower_half = HalfPlane(-1.0, 1.0, 0.0)          # {t < s}
        below_diag = HalfPlane(-1.0, 1.0, -d)           # {t < s - 1/n}

        def mirrored(reg):
            return Union((reg, regions.transpose(reg)))

        catalog = {
            "E": Rect(0.0, eps, 0.0, eps),
            "Etilde": Intersection((Rect(0.0, d, 0.0, d), lower_half)),
            "T": Intersection((Rect(0.0, 1.0 + d, 0.0, 1.0 + d), lower_half)),
            "B1": mirrored(Rect(eps, 1.0, 0.0, d)),
            "B2": mirrored(Intersection((Rect(eps, 1.0, 0.0, 1.0), band(0.0, d)))),
            "B3": mirrored(Intersection((Rect(eps, 1.0 + d, d, 1.0 + d), below_diag))),
            "B4": mirrored(Union((
                Rect(1.0, 1.0 + d, 0.0, d),
                Intersection((Rect(1.0, 1.0 + d, 0.0, 1.0 + d), band(0.0, d))),
            ))),
        }
        return RegionCatalog(
            variant="singular", n=n, kappa=kappa, k=k, eps=eps,
            regions=catalog, partition=("E", "B1", "B2", "B3", "B4"),
        )

    if isinstance(spec, TriangleWeight):
        if 0.5 * eps < 2.0 * d:
            raise ValueError(
                f"cone cross-section at the window edge (height {0.5 * eps:g}) "
                f"is narrower than the differenced edge bands (depth {2.0 * d:g}); "
                "increase n or lower kappa"
            )
        heights = Rect(0.0, 2.0, 0.5 * eps, 1.0)
        cone = Intersection((HalfPlane(-2.0, -1.0, -1.0), HalfPlane(2.0, -1.0, 1.0)))
        catalog = {
            "E": Rect(0.5 - 0.5 * eps, 0.5 + 0.5 * eps, 0.0, 0.5 * eps),
            "Etilde": Intersection((cone, Rect(0.0, 1.0, 0.0, d))),
            # left slivers indexed by 2s+t-1, right slivers by 2s-t-1
            "B1": Intersection((heights, Union((
                _slant_band(1.0, 0.0, d), _slant_band(-1.0, d, 2.0 * d))))),
            "B2": Intersection((heights, Union((
                _slant_band(1.0, d, 2.0 * d), _slant_band(-1.0, 0.0, d))))),
            "B3": Intersection((heights, Union((
                _slant_band(1.0, 2.0 * d, 3.0 * d), _slant_band(-1.0, -d, 0.0))))),
            "B4": Intersection((Rect(0.0, 2.0, 1.0, 1.0 + d), Union((
                _slant_band(1.0, d, 3.0 * d), _slant_band(-1.0, -d, d))))),
        }
        return RegionCatalog(
            variant="triangle", n=n, kappa=kappa, k=k, eps=eps,
            regions=catalog, partition=("E", "B1", "B2", "B3", "B4"),
        )

    raise ValueError(
        "region catalogs exist for the corner-singular and cone kernels only; "
        f"got {type(spec).__name__}"
    )


_CATALOG_SPEC_TYPE = {"singular": SingularWeight, "triangle": TriangleWeight}


def region_measures(spec, n, catalog, names=None, quadcfg=None):
    """Squared-kernel mass of each catalog region, by name.

    A quadrature failure is re-raised with the offending region's name so a
    long measurement run identifies which integral broke.
    """
    if catalog.n != n:
        raise ValueError(f"catalog was built for n={catalog.n}, asked to measure n={n}")
    if not isinstance(spec, _CATALOG_SPEC_TYPE[catalog.variant]):
        raise ValueError(
            f"catalog variant {catalog.variant!r} does not match {type(spec).__name__}"
        )
    names = tuple(catalog.regions) if names is None else tuple(names)
    out = {}
    for name in names:
        try:
            out[name] = float(kernels.mu_mass(spec, n, catalog.regions[name], quadcfg))
        except QuadratureError as exc:
            raise QuadratureError(
                f"region {name!r} at n={n}: {exc}", estimate=exc.estimate
            ) from exc
    return out


# ---------------------------------------------------------------------------
# decay-slope fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of log(value) against log(n).

    ``intercept`` is the fitted log-value at n = 1 (natural log); the
    coefficient of determination is reported alongside, never hidden,
    so a poor fit cannot masquerade as a measured exponent.
    """

    exponent: float
    intercept: float
    r_squared: float
    n_range: tuple


def slope_fit(values):
    """Fit a decay exponent to a map {n: positive value}.

    Requires at least four points spanning at least two octaves in n;
    refuses nonpositive or non-finite values outright rather than dropping
    them silently.
    """
    items = sorted((int(n), float(v)) for n, v in values.items())
    if len(items) < 4:
        raise ValueError(f"need at least 4 points for a slope fit, got {len(items)}")
    ns = np.array([n for n, _ in items], dtype=float)
    vs = np.array([v for _, v in items], dtype=float)
    if np.any(ns < 1.0):
        raise ValueError("resolutions must be >= 1")
    if not np.all(np.isfinite(vs)) or np.any(vs <= 0.0):
        bad = [n for (n, v) in items if not (math.isfinite(v) and v > 0.0)]
        raise ValueError(f"slope fit needs positive finite values; offending n: {bad}")
    if ns[-1] / ns[0] < 4.0:
        raise ValueError(
            f"n range [{items[0][0]}, {items[-1][0]}] spans fewer than two octaves"
        )
    x = np.log(ns)
    y = np.log(vs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = y - np.mean(y)
    ss_tot = float(total @ total)
    ss_res = float(resid @ resid)
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return SlopeFit(
        exponent=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        n_range=(items[0][0], items[-1][0]),
    )


# ---------------------------------------------------------------------------
# hypothesis probes
# ---------------------------------------------------------------------------

def first_valid_resolution(spec, kappa, n_max=65536):
    """Smallest resolution at which the catalog anatomy holds.

    Scans n >= 4 for the first value where the realized thinning count is at
    least 2 (at least 4 for the cone kernel, whose edge-band anatomy needs
    the window taller than the sliver stack) and the slowly-varying factor
    is nonvanishing on (0, 1/n), checked on a dense grid.
    """
    if not isinstance(spec, (SingularWeight, TriangleWeight)):
        raise ValueError(
            "the resolution threshold applies to the corner-singular and "
            "cone kernels only"
        )
    k_min = 4 if isinstance(spec, TriangleWeight) else 2
    for n in range(4, n_max + 1):
        k = kernels.thinning_count(n, kappa)
        if k < k_min:
            continue
        x = np.linspace(1.0 / (512.0 * n), 1.0 / n, 512)
        if np.all(np.abs(spec.ell(x)) > 0.0):
            return n
    raise ValueError(f"no valid resolution found up to {n_max}")


def assumption2_ratio(spec, n, kappa, center=None, quadcfg=None):
    """Mass outside the shrinking window, relative to eps_n^2.

    The thinning exponent kappa is realized as k_n = ceil(n^(1-kappa)) and
    eps_n = k_n/n; the reported ratio uses the realized eps_n.  A sequence of
    these ratios trending to zero over an n schedule supports the Gaussian
    fluctuation scaling at this kappa; a flat or growing tail is evidence
    against it (the known ranges are sufficient conditions, so a failure
    outside them is an observation, not a contradiction).

    For kernels without a built-in window shape (grid-sampled ones), pass
    ``center`` to probe an eps-sided square window centered there.
    """
    k = kernels.thinning_count(n, kappa)
    eps = k / n
    if center is not None:
        x0, y0 = center
        window = Rect(x0 - 0.5 * eps, x0 + 0.5 * eps, y0 - 0.5 * eps, y0 + 0.5 * eps)
    else:
        window = kernels.near_region(spec, eps)
    inside = kernels.concentration_mass(spec, n, window, quadcfg)
    return float((1.0 - inside) / eps**2)


def assumption1_probe(spec, n_schedule, pi, quadcfg=None):
    """Concentration mass escaping shrinking balls around the target atoms.

    ``pi`` is any object with an ``atoms`` attribute listing (weight, (x, y))
    pairs -- the purely atomic candidate limit.  For each n in the schedule
    and each radius in ``PROBE_RADII``, reports the concentration mass outside
    the union of radius-r sup-norm balls around the atoms.  Masses tending to
    zero for every radius support weak convergence to the candidate; an atom
    placed outside the kernel's support leaves the mass near 1 instead.
    """
    atoms = tuple(pi.atoms)
    if not atoms:
        raise ValueError("the candidate limit has no atoms")
    for w, point in atoms:
        if not w > 0.0:
            raise ValueError(f"atom weights must be positive, got {w}")
        if len(point) != 2:
            raise ValueError(f"atom locations must be planar points, got {point!r}")
    out = {}
    for n in n_schedule:
        per_radius = {}
        for r in PROBE_RADII:
            balls = Union(tuple(
                Rect(x - r, x + r, y - r, y + r) for _, (x, y) in atoms
            ))
            per_radius[r] = float(1.0 - kernels.concentration_mass(spec, n, balls, quadcfg))
        out[int(n)] = per_radius
    return out


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def save_measures_csv(measures, path):
    """Write a {n: {region: mass}} table as `n,region,mass` rows."""
    with open(path, "w") as fh:
        fh.write("# squared-kernel mass by catalog region\n")
        fh.write("n,region,mass\n")
        for n in sorted(measures):
            for name, mass in measures[n].items():
                fh.write(f"{int(n)},{name},{float(mass)!r}\n")


def save_catalog_csv(catalog, path):
    """Write one catalog's region descriptions as `name,description` rows."""
    with open(path, "w") as fh:
        fh.write(
            f"# region catalog: variant={catalog.variant} n={catalog.n} "
            f"kappa={float(catalog.kappa)!r} k={catalog.k} eps={float(catalog.eps)!r}\n"
        )
        fh.write("name,description\n")
        for name, reg in catalog.regions.items():
            fh.write(f'{name},"{reg!r}"\n')
