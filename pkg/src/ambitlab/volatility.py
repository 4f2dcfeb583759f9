"""Volatility fields on [-1,1]^2 and integrated powers of their realizations.

Three models: a constant, a named deterministic closure, and a smoothed
log-Gaussian draw.  Realizations are cell-midpoint grids that stay immutable
once sampled; the random stream is derived from the caller's seed with a
substream tag reserved for volatility, so fields never share randomness with
the driving noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, QuadratureError

__all__ = [
    "ConstantVol",
    "DeterministicVol",
    "LogGaussianVol",
    "SigmaField",
    "sample_volatility",
    "integrated_power",
    "save_sigma_csv",
    "vol_to_config",
    "vol_from_config",
]

_VOL_STREAM = 1  # substream tag: volatility draws (driving noise uses its own)


def _sine_product(u, v):
    return 1.0 + 0.5 * np.sin(2.0 * np.pi * u) * np.sin(2.0 * np.pi * v)


def _gentle_slope(u, v):
    return 1.0 + (u + v) / 8.0


def _bowl(u, v):
    return 0.75 + 0.125 * (u * u + v * v)


# name -> (closure, per-coordinate Lipschitz bound on [-1,1]^2)
_DET_CATALOG = {
    "sine_product": (_sine_product, np.pi),
    "gentle_slope": (_gentle_slope, 0.125),
    "bowl": (_bowl, 0.25),
}


@dataclass(frozen=True)
class ConstantVol:
    """Constant field sigma(u, v) = sigma0."""

    sigma0: float = 1.0

    def __post_init__(self):
        if not (self.sigma0 > 0.0 and np.isfinite(self.sigma0)):
            raise ValueError(f"constant volatility must be positive, got {self.sigma0}")


@dataclass(frozen=True)
class DeterministicVol:
    """Catalog closure selected by name; see keys of the module catalog."""

    name: str = "sine_product"

    def __post_init__(self):
        if self.name not in _DET_CATALOG:
            raise ValueError(
                f"unknown deterministic volatility {self.name!r}; "
                f"catalog has {sorted(_DET_CATALOG)}"
            )

    def __call__(self, u, v):
        return _DET_CATALOG[self.name][0](u, v)


@dataclass(frozen=True)
class LogGaussianVol:
    """exp of a stationary Gaussian field: i.i.d. grid draws convolved with a
    compact bump of the given radius (domain units), rescaled to unit pointwise
    variance before applying mean/variance.
    """

    mean: float = 0.0
    variance: float = 0.25
    smooth_length: float = 0.25

    def __post_init__(self):
        if not (self.variance > 0.0 and np.isfinite(self.variance)):
            raise ValueError(f"log-field variance must be positive, got {self.variance}")
        if not (self.smooth_length > 0.0 and np.isfinite(self.smooth_length)):
            raise ValueError(
                f"smoothing length must be positive, got {self.smooth_length}"
            )


@dataclass(frozen=True, eq=False)
class SigmaField:
    """Realized volatility values at the midpoints of an M x M cell grid.

    values[i, j] = sigma(u_i, v_j) with u_i = -1 + (2i+1)/M; immutable and
    safe to share.  ``closure`` is kept only when the model is analytic, so
    integrated powers can refine beyond the grid; grids obtained by scaling
    drop it and integrate the cached values literally.
    """

    values: np.ndarray
    resolution: int
    model: object = None
    seed: int | None = None
    closure: object = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"volatility grid must be square, got shape {vals.shape}")
        if vals.shape[0] != self.resolution:
            raise ValueError(
                f"grid shape {vals.shape} does not match resolution {self.resolution}"
            )
        if not np.all(np.isfinite(vals)) or not np.all(vals > 0.0):
            raise ValueError("volatility values must be finite and strictly positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def midpoints(self):
        u = -1.0 + (2.0 * np.arange(self.resolution) + 1.0) / self.resolution
        return u, u.copy()

    def at(self, u, v):
        """Value of the covering cell (grids are cell-constant by convention)."""
        m = self.resolution
        i = np.clip(((np.asarray(u) + 1.0) * 0.5 * m).astype(int), 0, m - 1)
        j = np.clip(((np.asarray(v) + 1.0) * 0.5 * m).astype(int), 0, m - 1)
        out = self.values[i, j]
        return float(out) if np.isscalar(u) and np.isscalar(v) else out

    def scaled(self, c):
        """Field with values c*sigma; grid-backed, so powers scale exactly."""
        if not (c > 0.0 and np.isfinite(c)):
            raise ValueError(f"volatility scale factor must be positive, got {c}")
        return SigmaField(values=c * self.values, resolution=self.resolution)


def _bump_kernel(radius_cells):
    """Quartic bump weights on integer offsets, unit Euclidean norm."""
    r = max(int(np.ceil(radius_cells - 1e-12)) - 1, 0)
    off = np.arange(-r, r + 1, dtype=float)
    rr = np.hypot(off[:, None], off[None, :]) / radius_cells
    w = np.where(rr < 1.0, (1.0 - rr**2) ** 2, 0.0)
    return w / np.sqrt(np.sum(w * w))


def _lag_one_correlation(w):
    return float(np.sum(w[1:, :] * w[:-1, :]))


def _check_realization(model, values, resolution):
    """Continuity tripwire: adjacent cells must not jump past the model's modulus."""
    du = np.abs(np.diff(values, axis=0))
    dv = np.abs(np.diff(values, axis=1))
    jump = max(du.max() if du.size else 0.0, dv.max() if dv.size else 0.0)
    pitch = 2.0 / resolution
    if isinstance(model, ConstantVol):
        bound = 1e-12
    elif isinstance(model, DeterministicVol):
        bound = _DET_CATALOG[model.name][1] * pitch * (1.0 + 1e-6) + 1e-12
    else:
        # bound the log-field increments instead: Gaussian with known lag-one
        # correlation, ten standard deviations clears any honest draw
        radius = max(model.smooth_length * resolution / 2.0, 1.0)
        rho1 = _lag_one_correlation(_bump_kernel(radius))
        sd = np.sqrt(max(2.0 * (1.0 - rho1), 0.0) * model.variance)
        dlog = np.log(values)
        du = np.abs(np.diff(dlog, axis=0))
        dv = np.abs(np.diff(dlog, axis=1))
        jump = max(du.max() if du.size else 0.0, dv.max() if dv.size else 0.0)
        bound = 10.0 * sd + 1e-9
    if jump > bound:
        raise ValueError(
            f"realized volatility violates its continuity modulus: "
            f"max adjacent jump {jump:.3e} > declared {bound:.3e}"
        )


def sample_volatility(model, resolution, seed=0):
    """Realize a volatility model on the M x M midpoint grid of [-1,1]^2.

    Deterministic in (model, resolution, seed).  The log-Gaussian model draws
    an i.i.d. standard-normal grid from the volatility substream of ``seed``,
    convolves it (periodically) with a unit-norm bump of the declared radius
    so every point keeps exactly unit variance, then shifts, scales and
    exponentiates.
    """
    m = int(resolution)
    if m < 2 or m != resolution:
        raise ValueError(f"volatility grid resolution must be an integer >= 2, got {resolution}")
    u = -1.0 + (2.0 * np.arange(m) + 1.0) / m
    if isinstance(model, ConstantVol):
        vals = np.full((m, m), model.sigma0)
        closure = lambda uu, vv: np.broadcast_to(model.sigma0, np.broadcast_shapes(np.shape(uu), np.shape(vv))).astype(float)  # noqa: E731
    elif isinstance(model, DeterministicVol):
        vals = model(u[:, None], u[None, :])
        closure = model
    elif isinstance(model, LogGaussianVol):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), _VOL_STREAM)))
        z = rng.standard_normal((m, m))
        radius = max(model.smooth_length * m / 2.0, 1.0)
        w = _bump_kernel(radius)
        pad = np.zeros((m, m))
        r = w.shape[0] // 2
        if w.shape[0] > m:
            raise ValueError(
                f"smoothing length {model.smooth_length} too large for resolution {m}"
            )
        pad[: w.shape[0], : w.shape[1]] = w
        pad = np.roll(pad, (-r, -r), axis=(0, 1))
        smooth = np.fft.irfft2(np.fft.rfft2(z) * np.fft.rfft2(pad), s=(m, m))
        vals = np.exp(model.mean + np.sqrt(model.variance) * smooth)
        closure = None
    else:
        raise TypeError(f"not a volatility model: {model!r}")
    _check_realization(model, vals, m)
    return SigmaField(values=vals, resolution=m, model=model,
                      seed=int(seed), closure=closure)


def _validate_rect(rect):
    a, b, c, d = (float(x) for x in rect)
    tol = 1e-12
    if not (a <= b and c <= d):
        raise ValueError(f"rectangle has inverted sides: {rect}")
    if a < -1.0 - tol or b > 1.0 + tol or c < -1.0 - tol or d > 1.0 + tol:
        raise ValueError(f"rectangle {rect} leaves the sampled domain [-1,1]^2")
    return a, b, c, d


def _grid_rect_sum(fieldvals, m, p, rect):
    """Midpoint sum of sigma^p over rect, partial edge cells weighted by overlap."""
    a, b, c, d = rect
    edges = -1.0 + 2.0 * np.arange(m + 1) / m
    wu = np.clip(np.minimum(b, edges[1:]) - np.maximum(a, edges[:-1]), 0.0, None)
    wv = np.clip(np.minimum(d, edges[1:]) - np.maximum(c, edges[:-1]), 0.0, None)
    return float(wu @ (fieldvals**p) @ wv)


def integrated_power(sigma, p, rect=(0.0, 1.0, 0.0, 1.0)):
    """integral of sigma(u,v)^p over [a,b] x [c,d], rect inside [-1,1]^2.

    Analytic models refine by doubling a midpoint rule until 1e-6 relative
    stability; purely grid-backed fields integrate their cells literally
    (exact for the cell-constant interpretation, no refinement available).
    Zero-area rectangles integrate to 0 and emit a warning.
    """
    if not (p > 0.0 and np.isfinite(p)):
        raise ValueError(f"integrated power requires p > 0, got {p}")
    a, b, c, d = _validate_rect(rect)
    if a == b or c == d:
        warnings.warn("integrated_power over a zero-area rectangle", stacklevel=2)
        return 0.0
    if sigma.closure is None:
        return _grid_rect_sum(sigma.values, sigma.resolution, p, (a, b, c, d))
    f = sigma.closure
    m = max(2, min(int(sigma.resolution), 512))
    prev = None
    for _ in range(14):
        xu = a + (b - a) * (np.arange(m) + 0.5) / m
        xv = c + (d - c) * (np.arange(m) + 0.5) / m
        cur = float(np.sum(f(xu[:, None], xv[None, :]) ** p)) * (b - a) * (d - c) / (m * m)
        if prev is not None and abs(cur - prev) <= 1e-6 * abs(cur):
            return cur
        prev, m = cur, 2 * m
    raise QuadratureError(
        f"integrated power did not stabilize to 1e-6 by resolution {m}", estimate=prev
    )


def save_sigma_csv(sigma, path):
    """Write the realized grid row-major with a provenance header."""
    model = sigma.model
    tag = type(model).__name__ if model is not None else "scaled"
    with open(path, "w") as fh:
        fh.write(f"# volatility grid: resolution={sigma.resolution} model={tag} "
                 f"seed={sigma.seed}\n")
        np.savetxt(fh, sigma.values, delimiter=",", fmt="%.17g")


def vol_to_config(model, prefix="volatility"):
    """Flatten a model into dotted config keys."""
    if isinstance(model, ConstantVol):
        return {f"{prefix}.variant": "constant", f"{prefix}.sigma0": repr(model.sigma0)}
    if isinstance(model, DeterministicVol):
        return {f"{prefix}.variant": "deterministic", f"{prefix}.name": model.name}
    if isinstance(model, LogGaussianVol):
        return {
            f"{prefix}.variant": "log_gaussian",
            f"{prefix}.mean": repr(model.mean),
            f"{prefix}.variance": repr(model.variance),
            f"{prefix}.smooth_length": repr(model.smooth_length),
        }
    raise TypeError(f"not a volatility model: {model!r}")


def vol_from_config(entries, prefix="volatility"):
    """Rebuild a model from dotted config keys (inverse of vol_to_config)."""
    def get(key, default=None):
        return entries.get(f"{prefix}.{key}", default)

    variant = get("variant")
    if variant is None:
        raise ConfigError(f"missing {prefix}.variant")
    try:
        if variant == "constant":
            return ConstantVol(sigma0=float(get("sigma0", 1.0)))
        if variant == "deterministic":
            return DeterministicVol(name=get("name", "sine_product"))
        if variant == "log_gaussian":
            return LogGaussianVol(
                mean=float(get("mean", 0.0)),
                variance=float(get("variance", 0.25)),
                smooth_length=float(get("smooth_length", 0.25)),
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad volatility parameters: {exc}") from exc
    raise ConfigError(f"unknown volatility variant {variant!r}")
