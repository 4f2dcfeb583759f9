"""Limit targets for thinned power variations and the harnesses that check them.

Per replication, the scaled variation field of a simulated lattice converges
to m_p * Sigma^(p,pi): an integral functional of the realized volatility
against the concentration limit pi of the squared differenced kernel.  Its
fluctuations around the exact conditional mean are asymptotically Gaussian
with variance (m_2p - m_p^2) * integral of sigma^(2p) over the shifted
window.  This module computes both targets from realized volatility grids --
read cell-constantly, exactly as the simulation itself reads them -- and
runs the two reference Monte Carlo experiments:

* ``lln_experiment``: convolution-path simulation, sup distance between the
  scaled variation field and its limit over an evaluation grid, with the
  error split into the exact conditional mean's bias and the stochastic rest;
* ``clt_experiment``: exact-covariance path, the centered and rescaled
  variation against its Gaussian limit, with moment and distribution-distance
  diagnostics.

Both experiments derive every random stream from one master seed and refuse
thinning exponents outside the kernel's admissible range unless explicitly
overridden.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import admissible_kappa
from .errors import AdmissibilityError
from .gaussian import abs_moment
from .kernels import (
    GridWeight,
    SingularWeight,
    TriangleWeight,
    UniformWeight,
    compute_cn,
    thinning_count,
)
from .simulate import (
    increment_covariance,
    increments,
    rho_bar,
    sample_increments_exact,
    simulate_lattice,
)
from .variation import expected_scaled_pv, scaled_power_variation, variation_field
from .volatility import ConstantVol, LogGaussianVol, sample_volatility

__all__ = [
    "CLTConfig",
    "DiracAt",
    "DiracMixture",
    "LLNConfig",
    "MonteCarloReport",
    "clt_experiment",
    "clt_variance",
    "limit_pi",
    "lln_experiment",
    "save_report_csv",
    "save_report_json",
    "sigma_functional",
]

_REDRAW_STREAM = 4  # substream tag: per-replication volatility re-draw roots


# ---------------------------------------------------------------------------
# concentration limits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiracAt:
    """Point mass at z0 = (s0, t0)."""

    point: tuple

    def __post_init__(self):
        pt = tuple(float(x) for x in self.point)
        if len(pt) != 2 or not all(math.isfinite(x) for x in pt):
            raise ValueError(f"point mass needs a finite planar location, got {self.point!r}")
        object.__setattr__(self, "point", pt)

    @property
    def atoms(self):
        return ((1.0, self.point),)


@dataclass(frozen=True)
class DiracMixture:
    """Finitely many point masses given as (weight, (x, y)) pairs."""

    atoms: tuple

    def __post_init__(self):
        try:
            atoms = tuple((float(w), (float(x), float(y))) for w, (x, y) in self.atoms)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"atoms must be (weight, (x, y)) pairs: {exc}") from exc
        if not atoms:
            raise ValueError("a mixture needs at least one atom")
        weights = [w for w, _ in atoms]
        if any(not (w > 0.0 and math.isfinite(w)) for w in weights):
            raise ValueError(f"atom weights must be positive and finite, got {weights}")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"atom weights must sum to 1, got {sum(weights)!r}")
        object.__setattr__(self, "atoms", atoms)


def limit_pi(spec):
    """Concentration limit of the squared differenced kernel's mass.

    The rectangle indicator splits its mass evenly over the four window
    corners; the corner-singular and cone kernels concentrate at a single
    point.  Grid-sampled kernels have no closed-form limit -- probe them
    with ``asymptotics.assumption1_probe`` against a candidate instead.
    """
    if isinstance(spec, UniformWeight):
        return DiracMixture(atoms=(
            (0.25, (spec.s1, spec.t1)), (0.25, (spec.s1, spec.t2)),
            (0.25, (spec.s2, spec.t1)), (0.25, (spec.s2, spec.t2)),
        ))
    if isinstance(spec, SingularWeight):
        return DiracAt(point=(0.0, 0.0))
    if isinstance(spec, TriangleWeight):
        return DiracAt(point=(0.5, 0.0))
    if isinstance(spec, GridWeight):
        raise ValueError(
            "grid-sampled kernels have no closed-form concentration limit; "
            "probe a candidate with assumption1_probe"
        )
    raise TypeError(f"not a weight spec: {spec!r}")


def _pi_atoms(pi):
    atoms = getattr(pi, "atoms", None)
    if atoms is None:
        raise TypeError(f"not a concentration limit (needs .atoms): {pi!r}")
    return tuple(atoms)


# ---------------------------------------------------------------------------
# limit functionals
# ---------------------------------------------------------------------------

def _check_shifted_domain(atoms, s, t):
    for _, (xi, tau) in atoms:
        if xi < s - 1.0 - 1e-12 or xi > 1.0 + 1e-12 or tau < t - 1.0 - 1e-12 or tau > 1.0 + 1e-12:
            raise ValueError(
                f"shifted domain for the atom at ({xi}, {tau}) escapes the "
                f"sampled square [-1,1]^2 at evaluation point ({s}, {t})"
            )


def _mixture_cell_table(sigma, atoms, s_max, t_max):
    """Overlay cuts of [0,s]x[0,t] and the mixture of squared volatilities.

    Cell-constant volatility stays cell-constant after shifting, so cutting
    at every shifted cell edge makes the mixture exactly piecewise constant
    and the integrals below exact for the grid-as-defined.
    """
    m = sigma.resolution
    edges = -1.0 + 2.0 * np.arange(m + 1) / m

    def cuts(limit, offsets):
        cs = [np.array([0.0, limit])]
        for off in offsets:
            e = edges + off
            cs.append(e[(e > 0.0) & (e < limit)])
        return np.unique(np.concatenate(cs))

    cu = cuts(s_max, [xi for _, (xi, _) in atoms])
    cv = cuts(t_max, [tau for _, (_, tau) in atoms])
    mu = 0.5 * (cu[1:] + cu[:-1])
    mv = 0.5 * (cv[1:] + cv[:-1])
    mix = np.zeros((mu.size, mv.size))
    for w, (xi, tau) in atoms:
        mix += w * sigma.at(mu[:, None] - xi, mv[None, :] - tau) ** 2
    return cu, cv, mix


def _functional_on_grid(sigma, p, atoms, s_list, t_list):
    """Sigma^(p,pi) at every (s_i, t_j) of a rectangular evaluation grid."""
    s_max, t_max = max(s_list), max(t_list)
    _check_shifted_domain(atoms, s_max, t_max)
    vals0 = sigma.values
    if np.all(vals0 == vals0.flat[0]):
        # a probability measure integrates a constant to that constant
        base = float(vals0.flat[0]) ** p
        return base * np.outer(s_list, t_list)
    cu, cv, mix = _mixture_cell_table(sigma, atoms, s_max, t_max)
    F = mix ** (0.5 * p)
    wu = np.clip(np.minimum(np.asarray(s_list)[:, None], cu[None, 1:]) - cu[None, :-1],
                 0.0, None)
    wv = np.clip(np.minimum(np.asarray(t_list)[:, None], cv[None, 1:]) - cv[None, :-1],
                 0.0, None)
    return wu @ F @ wv.T


def sigma_functional(sigma, p, pi, s, t):
    """Limit of the scaled variation per unit m_p: Sigma^(p,pi) at (s, t).

    Integrates (integral of sigma^2(u-xi, v-tau) against pi)^(p/2) over
    [0,s] x [0,t], reading the realized grid cell-constantly -- the same
    reading the simulation path uses, so comparisons are apples to apples.
    For a point mass at (s0, t0) this is the plain integral of sigma^p over
    [-s0, s-s0] x [-t0, t-t0].
    """
    if not (p > 0.0 and math.isfinite(p)):
        raise ValueError(f"power must be positive, got {p}")
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise ValueError(f"evaluation point ({s}, {t}) outside the unit square")
    atoms = _pi_atoms(pi)
    _check_shifted_domain(atoms, s, t)
    if s == 0.0 or t == 0.0:
        return 0.0
    return float(_functional_on_grid(sigma, p, atoms, [s], [t])[0, 0])


def clt_variance(sigma, p, z0, s, t):
    """Variance of the Gaussian fluctuation limit at (s, t).

    (m_2p - m_p^2) times the integral of sigma^(2p) over the window shifted
    by z0; monotone nondecreasing in s and t since the integrand is positive.
    """
    spread = abs_moment(2.0 * p) - abs_moment(p) ** 2
    return spread * sigma_functional(sigma, 2.0 * p, DiracAt(point=tuple(z0)), s, t)


# ---------------------------------------------------------------------------
# experiment configuration and reports
# ---------------------------------------------------------------------------

def _require(cond, message):
    if not cond:
        raise ValueError(message)


@dataclass(frozen=True)
class LLNConfig:
    """Settings for the convolution-path mean-convergence experiment."""

    weight: object
    volatility: object
    p_values: tuple = (2.0,)
    n_schedule: tuple = (64, 128, 256)
    k: int | None = None
    kappa: float | None = None
    reps: int = 200
    grid_size: int = 5
    oversample: int = 1
    seed: int = 0
    pi: object = None
    decompose: bool = True
    workers: int = 1
    override_admissibility: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "n_schedule", tuple(int(n) for n in self.n_schedule))
        _require(len(self.p_values) > 0, "need at least one power p")
        _require(all(p > 0.0 for p in self.p_values),
                 f"powers must be positive, got {self.p_values}")
        _require(len(self.n_schedule) > 0, "need a nonempty n schedule")
        _require(all(n >= 2 for n in self.n_schedule),
                 f"resolutions must be >= 2, got {self.n_schedule}")
        _require(all(a < b for a, b in zip(self.n_schedule, self.n_schedule[1:])),
                 "n schedule must be strictly increasing")
        _require((self.k is None) != (self.kappa is None),
                 "thinning rule must set exactly one of k and kappa")
        if self.k is not None:
            _require(self.k >= 1, f"constant thinning k must be >= 1, got {self.k}")
        _require(self.reps >= 1, f"need at least one replication, got {self.reps}")
        _require(self.grid_size >= 0, f"grid size must be >= 0, got {self.grid_size}")
        _require(self.oversample >= 1, f"oversample must be >= 1, got {self.oversample}")
        _require(self.workers >= 1, f"worker count must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class CLTConfig:
    """Settings for the exact-covariance fluctuation experiment."""

    weight: object
    volatility: object
    p: float = 2.0
    n_schedule: tuple = (200, 400, 600)
    kappa: float = 0.4
    reps: int = 2000
    eval_point: tuple = (1.0, 1.0)
    seed: int = 0
    cap: int = 32
    sigma_resolution: int = 64
    trend_batches: int = 8
    workers: int = 1
    override_admissibility: bool = False

    def __post_init__(self):
        object.__setattr__(self, "n_schedule", tuple(int(n) for n in self.n_schedule))
        object.__setattr__(self, "eval_point", tuple(float(x) for x in self.eval_point))
        _require(self.p > 0.0, f"power must be positive, got {self.p}")
        _require(len(self.n_schedule) > 0, "need a nonempty n schedule")
        _require(all(a < b for a, b in zip(self.n_schedule, self.n_schedule[1:])),
                 "n schedule must be strictly increasing")
        _require(0.0 < self.kappa < 1.0,
                 f"thinning exponent must lie in (0,1), got {self.kappa}")
        _require(self.reps >= 1, f"need at least one replication, got {self.reps}")
        s, t = self.eval_point
        _require(0.0 < s <= 1.0 and 0.0 < t <= 1.0,
                 f"evaluation point {self.eval_point} outside (0,1]^2")
        _require(self.cap >= 1, f"covariance cap must be >= 1, got {self.cap}")
        _require(self.sigma_resolution >= 2,
                 f"volatility resolution must be >= 2, got {self.sigma_resolution}")
        _require(self.trend_batches >= 2,
                 f"need >= 2 trend batches, got {self.trend_batches}")
        _require(self.workers >= 1, f"worker count must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class MonteCarloReport:
    """Per-n summary of one experiment, JSON/CSV serializable.

    ``per_n`` maps each resolution to its statistics: for the mean-convergence
    kind one nested table per power p, for the fluctuation kind one flat
    table.  ``flags`` records anything that kept an entry incomplete (empty
    evaluation grid, single replication, skipped decompositions) -- a flagged
    report is still a faithful account of what ran.
    """

    kind: str
    n_schedule: tuple
    reps: int
    per_n: dict
    seed: int
    runtime_s: float
    flags: tuple = ()

    def __post_init__(self):
        if self.kind not in ("lln", "clt"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.per_n:
            if set(self.per_n) != set(self.n_schedule):
                raise ValueError("per-n entries do not cover the n schedule")
        elif not self.flags:
            raise ValueError("empty per-n table requires an explanatory flag")
        for entry in self.per_n.values():
            tables = entry.values() if self.kind == "lln" else [entry]
            for tab in tables:
                for key, val in tab.items():
                    if "sup_error" in key and val is not None and val < 0.0:
                        raise ValueError(f"negative sup-error {val} under {key}")


def _quartiles(xs):
    q1, q2, q3 = np.percentile(np.asarray(xs, dtype=float), [25.0, 50.0, 75.0])
    return float(q1), float(q2), float(q3)


def _gate_kappa(weight, kappa, override, flags):
    """Refuse thinning exponents outside the known-good range unless overridden."""
    try:
        rng = admissible_kappa(weight)
    except ValueError:
        if not override:
            raise AdmissibilityError(
                "no admissible thinning range is known for this kernel; "
                "pass override_admissibility=True to run anyway"
            ) from None
        flags.append("admissibility unknown for this kernel: override accepted")
        return
    if rng.contains(kappa):
        return
    if not override:
        detail = rng.note if rng.empty else f"admissible range is {rng}"
        raise AdmissibilityError(
            f"thinning exponent {kappa} is not admissible for this kernel "
            f"({detail}); pass override_admissibility=True to run anyway"
        )
    flags.append(f"inadmissible thinning exponent {kappa} run under override")


def _redraw_seed(seed, rep):
    return int(np.random.SeedSequence((int(seed), _REDRAW_STREAM, int(rep))).generate_state(1)[0])


# ---------------------------------------------------------------------------
# mean-convergence experiment
# ---------------------------------------------------------------------------

def lln_experiment(config):
    """Simulate, scale, and measure the distance to m_p * Sigma^(p,pi).

    Per resolution and power: the sup over the evaluation grid of
    |scaled variation - m_p * Sigma^(p,pi)| per replication, summarized by
    quartiles, and -- where the exact conditional-expectation path exists --
    the split into the deterministic mean part |E_W[scaled] - limit| and the
    stochastic part |scaled - E_W[scaled]|.  The unscaled variation at (1,1)
    is averaged as well, with its standard error, as a raw sanity anchor.
    """
    t_start = time.perf_counter()
    flags = []
    weight, vol = config.weight, config.volatility
    if config.kappa is not None:
        _gate_kappa(weight, config.kappa, config.override_admissibility, flags)
    if config.grid_size == 0:
        flags.append("empty evaluation grid: nothing to measure")
        return MonteCarloReport(
            kind="lln", n_schedule=config.n_schedule, reps=config.reps, per_n={},
            seed=config.seed, runtime_s=time.perf_counter() - t_start,
            flags=tuple(flags),
        )

    pi = config.pi if config.pi is not None else limit_pi(weight)
    atoms = _pi_atoms(pi)
    grid = [i / config.grid_size for i in range(1, config.grid_size + 1)]
    redraw = isinstance(vol, LogGaussianVol)
    exact_mean_path = isinstance(vol, ConstantVol) or isinstance(weight, UniformWeight)
    per_rep_mean_path = (config.decompose and exact_mean_path
                         and (isinstance(vol, ConstantVol) or not redraw))
    if config.decompose and exact_mean_path and not per_rep_mean_path:
        flags.append(
            "mean/stochastic split skipped: volatility re-draws per replication "
            "make the exact conditional expectation quadratic in the lattice"
        )

    per_n = {}
    for n in config.n_schedule:
        k = config.k if config.k is not None else thinning_count(n, config.kappa)
        if k > n:
            raise ValueError(f"thinning k={k} exceeds n={n}")
        eps = k / n
        cn = compute_cn(weight, n)
        M = 2 * n * config.oversample
        sigma_shared = None if redraw else sample_volatility(vol, M, seed=config.seed)

        targets_shared = {}
        mean_field_shared = {}
        if sigma_shared is not None:
            for p in config.p_values:
                targets_shared[p] = abs_moment(p) * _functional_on_grid(
                    sigma_shared, p, atoms, grid, grid)
                if per_rep_mean_path:
                    mean_field_shared[p] = np.array([
                        [expected_scaled_pv(weight, sigma_shared, n, k, p, s, t)
                         for t in grid] for s in grid])

        sup_err = {p: [] for p in config.p_values}
        mean_part = {p: [] for p in config.p_values}
        stoch_part = {p: [] for p in config.p_values}
        raw_v = {p: [] for p in config.p_values}
        for rep in range(config.reps):
            if redraw:
                sigma = sample_volatility(vol, M, seed=_redraw_seed(config.seed, rep))
            else:
                sigma = sigma_shared
            fld = simulate_lattice(weight, sigma, n, M, seed=config.seed, rep=rep)
            inc = increments(fld, k)
            for p in config.p_values:
                V = variation_field(inc, p, c_n=cn)
                scaled = scaled_power_variation(V)
                svals = np.array([[scaled.at(s, t) for t in grid] for s in grid])
                if sigma_shared is not None:
                    target = targets_shared[p]
                else:
                    target = abs_moment(p) * _functional_on_grid(sigma, p, atoms, grid, grid)
                sup_err[p].append(float(np.max(np.abs(svals - target))))
                raw_v[p].append(float(V.at(1.0, 1.0)))
                if per_rep_mean_path:
                    if sigma_shared is not None:
                        mean_field = mean_field_shared[p]
                    else:
                        mean_field = np.array([
                            [expected_scaled_pv(weight, sigma, n, k, p, s, t)
                             for t in grid] for s in grid])
                    mean_part[p].append(float(np.max(np.abs(mean_field - target))))
                    stoch_part[p].append(float(np.max(np.abs(svals - mean_field))))

        entry = {}
        for p in config.p_values:
            q1, q2, q3 = _quartiles(sup_err[p])
            stats_p = {
                "k": k, "eps": eps, "c_n": float(cn),
                "sup_error_q1": q1, "sup_error_median": q2, "sup_error_q3": q3,
                "raw_v_mean": float(np.mean(raw_v[p])),
                "raw_v_se": float(np.std(raw_v[p], ddof=1) / math.sqrt(config.reps))
                if config.reps > 1 else None,
            }
            if per_rep_mean_path:
                m1, m2, m3 = _quartiles(mean_part[p])
                s1, s2, s3 = _quartiles(stoch_part[p])
                stats_p.update({
                    "mean_part_q1": m1, "mean_part_median": m2, "mean_part_q3": m3,
                    "stoch_part_q1": s1, "stoch_part_median": s2, "stoch_part_q3": s3,
                })
            else:
                stats_p.update({
                    "mean_part_q1": None, "mean_part_median": None, "mean_part_q3": None,
                    "stoch_part_q1": None, "stoch_part_median": None, "stoch_part_q3": None,
                })
            entry[repr(p)] = stats_p
        per_n[n] = entry

    if config.reps == 1:
        flags.append("single replication: dispersion statistics degenerate")
    return MonteCarloReport(
        kind="lln", n_schedule=config.n_schedule, reps=config.reps, per_n=per_n,
        seed=config.seed, runtime_s=time.perf_counter() - t_start, flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# fluctuation experiment
# ---------------------------------------------------------------------------

def clt_experiment(config):
    """Exact-covariance fluctuations of the thinned variation.

    Per resolution: draw the thinned increment vector from its exact
    covariance, center the variation at the exact conditional expectation,
    rescale, and compare the sample variance against (a) the exact finite-n
    value -- in closed form for p=2 -- and (b) the asymptotic limit variance.
    Skewness, excess kurtosis and the Kolmogorov distance to a fitted normal
    quantify the distributional trend; batch medians of the absolute moment
    diagnostics give a robust monotone-trend statistic.
    """
    t_start = time.perf_counter()
    flags = []
    weight, vol = config.weight, config.volatility
    p = float(config.p)
    _gate_kappa(weight, config.kappa, config.override_admissibility, flags)
    sigma = sample_volatility(vol, config.sigma_resolution, seed=config.seed)
    s_eval, t_eval = config.eval_point

    try:
        pi = limit_pi(weight)
    except ValueError:
        pi = None
    if isinstance(pi, DiracAt):
        asymptotic = clt_variance(sigma, p, pi.point, s_eval, t_eval)
    else:
        asymptotic = None
        flags.append(
            "no single concentration point: asymptotic variance target omitted"
        )

    mp = abs_moment(p)
    per_n = {}
    for n in config.n_schedule:
        k = thinning_count(n, config.kappa)
        eps = k / n
        cov = increment_covariance(weight, sigma, n, k, cap=config.cap)
        keep = np.where((cov.indices[:, 0] * eps <= s_eval + 1e-12)
                        & (cov.indices[:, 1] * eps <= t_eval + 1e-12))[0]
        if keep.size == 0:
            raise ValueError(
                f"evaluation point {config.eval_point} excludes every retained "
                f"increment at n={n} (eps={eps:g})"
            )
        mat = cov.matrix[np.ix_(keep, keep)]
        diag = np.diag(mat)
        cn = cov.c_n
        scale = eps / cn ** (0.5 * p)
        expected_v = mp * float(np.sum(diag ** (0.5 * p)))

        draws = sample_increments_exact(cov, config.seed, config.reps)[:, keep]
        z = scale * (np.sum(np.abs(draws) ** p, axis=1) - expected_v)

        rb = rho_bar(cov) if cov.dim >= 2 else 0.0
        entry = {
            "k": k, "eps": eps, "c_n": float(cn), "dim": int(keep.size),
            "rho_bar": float(rb),
            "asymptotic_variance": asymptotic,
        }
        if p == 2.0:
            exact_var = 2.0 * float(np.sum((eps * mat / cn) ** 2))
            envelope = (2.0 * eps**2 * float(np.sum((diag / cn) ** 2))
                        * (1.0 + keep.size * rb**2))
            if exact_var > envelope * (1.0 + 1e-12):
                raise RuntimeError(
                    f"exact variance {exact_var!r} exceeds its correlation "
                    f"envelope {envelope!r}; covariance engine inconsistent"
                )
            entry["exact_variance"] = exact_var
        else:
            exact_var = None
            entry["exact_variance"] = None
            flags.append(
                f"exact finite-n variance in closed form needs p=2, got p={p}"
            ) if n == config.n_schedule[0] else None

        if config.reps > 1:
            entry["sample_variance"] = float(np.var(z, ddof=1))
            base = exact_var if exact_var is not None else entry["sample_variance"]
            entry["variance_se"] = float(base * math.sqrt(2.0 / (config.reps - 1)))
            entry["skewness"] = float(stats.skew(z))
            entry["excess_kurtosis"] = float(stats.kurtosis(z))
            entry["kolmogorov_distance"] = float(
                stats.kstest(z, "norm", args=(np.mean(z), np.std(z, ddof=1))).statistic)
        else:
            for key in ("sample_variance", "variance_se", "skewness",
                        "excess_kurtosis", "kolmogorov_distance"):
                entry[key] = None
        if config.reps >= 2 * config.trend_batches:
            batches = np.array_split(z[: config.reps - config.reps % config.trend_batches],
                                     config.trend_batches)
            entry["abs_skewness_median"] = float(
                np.median([abs(stats.skew(b)) for b in batches]))
            entry["abs_excess_kurtosis_median"] = float(
                np.median([abs(stats.kurtosis(b)) for b in batches]))
        else:
            entry["abs_skewness_median"] = None
            entry["abs_excess_kurtosis_median"] = None
        per_n[n] = entry

    if config.reps == 1:
        flags.append("single replication: sample variance undefined")
    return MonteCarloReport(
        kind="clt", n_schedule=config.n_schedule, reps=config.reps, per_n=per_n,
        seed=config.seed, runtime_s=time.perf_counter() - t_start, flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def report_to_dict(report):
    """JSON-ready dictionary with string keys throughout."""
    per_n = {}
    for n, entry in report.per_n.items():
        if report.kind == "lln":
            per_n[str(n)] = {pkey: dict(tab) for pkey, tab in entry.items()}
        else:
            per_n[str(n)] = dict(entry)
    return {
        "kind": report.kind,
        "n_schedule": list(report.n_schedule),
        "reps": report.reps,
        "seed": report.seed,
        "runtime_s": report.runtime_s,
        "flags": list(report.flags),
        "per_n": per_n,
    }


def save_report_json(report, path):
    import json

    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report_csv(report, path):
    """Long-format per-n table; None entries are skipped, not invented."""
    with open(path, "w") as fh:
        if report.kind == "lln":
            fh.write("n,p,stat,value\n")
            for n in sorted(report.per_n):
                for pkey in sorted(report.per_n[n]):
                    for stat, val in report.per_n[n][pkey].items():
                        if val is not None:
                            fh.write(f"{n},{pkey},{stat},{float(val)!r}\n")
        else:
            fh.write("n,stat,value\n")
            for n in sorted(report.per_n):
                for stat, val in report.per_n[n].items():
                    if val is not None:
                        fh.write(f"{n},{stat},{float(val)!r}\n")
