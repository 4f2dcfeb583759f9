"""Power-variation statistics of increment fields.

The raw statistic at (s, t) sums |increment|^p over the retained lattice
cells whose upper corners fall inside [0, s] x [0, t]; the scaled version
multiplies by eps_n^2 / c_n^(p/2) so that a law-of-large-numbers limit of
order one emerges, and the relative version divides by the full-square value
so the kernel constants cancel altogether.

Exact conditional expectations (given the volatility path) come in two
flavours: a closed form for constant volatility, and a quadrature route for
the uniform window weight where the kernel concentration measure is four
rectangles and the volatility integrates in closed form cell by cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import abs_moment
from .kernels import UniformWeight, compute_cn
from .simulate import _prefix_integral, _rect_integral, _uniform_strips

__all__ = [
    "PowerVariationField",
    "power_variation",
    "variation_field",
    "scaled_power_variation",
    "relative_power_variation",
    "expected_scaled_pv",
    "bias_term",
    "save_variation_csv",
]


def _floor_frac(x, eps):
    """Number of whole eps-cells inside [0, x], and the fractional overhang.

    Single rounding point for every floor/fractional-part in this module:
    the expectation formulas and the bias closed form must floor the same
    quotient the same way or their algebraic identities break at arguments
    like 0.55/0.1 that land on rounding boundaries.
    """
    q = x / eps
    c = int(np.floor(q))
    return c, q - c


@dataclass(frozen=True, eq=False)
class PowerVariationField:
    """Cumulative |increment|^p sums at the retained lattice corners.

    values[i, j] is the statistic at (ki/n, kj/n); row and column 0 are the
    empty sums.  c_n is attached when known so the scaled field can be formed
    later without the weight spec at hand.
    """

    p: float
    k: int
    n: int
    values: np.ndarray
    c_n: float | None = None

    def __post_init__(self):
        m = self.n // self.k
        if self.values.shape != (m + 1, m + 1):
            raise ValueError(
                f"variation field shape {self.values.shape} != ({m + 1}, {m + 1})"
            )
        if np.any(self.values[0, :] != 0.0) or np.any(self.values[:, 0] != 0.0):
            raise ValueError("variation field must vanish on the axes")
        if np.any(self.values < 0.0):
            raise ValueError("variation field must be nonnegative")
        if np.any(np.diff(self.values, axis=0) < 0.0) or np.any(
            np.diff(self.values, axis=1) < 0.0
        ):
            raise ValueError("variation field must be monotone in each coordinate")
        self.values.setflags(write=False)

    @property
    def eps(self):
        return self.k / self.n

    def at(self, s, t):
        """Step-field evaluation: the value at the last corner inside [0,s]x[0,t]."""
        i, _ = _floor_frac(float(s), self.eps)
        j, _ = _floor_frac(float(t), self.eps)
        m = self.values.shape[0] - 1
        return float(self.values[min(i, m), min(j, m)])


def power_variation(inc, p, s, t):
    """Sum of |increment|^p over retained cells with corners in [0,s] x [0,t]."""
    p = float(p)
    if p <= 0.0:
        raise ValueError(f"power must be positive, got {p}")
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise ValueError(f"evaluation point ({s}, {t}) outside the unit square")
    eps = inc.k / inc.n
    i, _ = _floor_frac(float(s), eps)
    j, _ = _floor_frac(float(t), eps)
    if i == 0 or j == 0:
        return 0.0
    m = inc.values.shape[0]
    block = np.abs(inc.values[: min(i, m), : min(j, m)])
    return float(np.sum(block**p))


def variation_field(inc, p, c_n=None):
    """The whole variation field at once, by cumulative sums."""
    p = float(p)
    if p <= 0.0:
        raise ValueError(f"power must be positive, got {p}")
    absp = np.abs(inc.values) ** p
    m = absp.shape[0]
    vals = np.zeros((m + 1, m + 1))
    vals[1:, 1:] = np.cumsum(np.cumsum(absp, axis=0), axis=1)
    return PowerVariationField(
        p=p, k=inc.k, n=inc.n, values=vals,
        c_n=None if c_n is None else float(c_n),
    )


def scaled_power_variation(V):
    """Multiply by eps^2 / c_n^(p/2); requires c_n attached."""
    if V.c_n is None:
        raise ValueError(
            "scaling needs the kernel normalization c_n; build the field with "
            "c_n=compute_cn(spec, n)"
        )
    factor = V.eps**2 / V.c_n ** (V.p / 2.0)
    return PowerVariationField(
        p=V.p, k=V.k, n=V.n, values=factor * V.values, c_n=V.c_n
    )


def relative_power_variation(V):
    """Divide by the full-square value; the kernel and power constants cancel."""
    denom = float(V.values[-1, -1])
    if denom == 0.0:
        raise ValueError(
            "relative variation undefined: the full-square statistic is zero "
            "for this realization"
        )
    return PowerVariationField(
        p=V.p, k=V.k, n=V.n, values=V.values / denom, c_n=None
    )


def _pi_average_sq_uniform(spec, sigma, n, eps, idx):
    """int sigma^2(eps i - xi, eps j - tau) pi_n(dxi, dtau) for each (i, j).

    The squared differenced kernel of the window weight is +1 on four
    rectangles (products of two strips per axis), so the concentration
    measure integrates sigma^2 as four prefix-integral rectangles over
    scale^2 / c_n.
    """
    strips = _uniform_strips(spec, n, eps, idx)
    pref = _prefix_integral(sigma.values**2)
    cn = compute_cn(spec, n)
    out = np.empty(len(idx))
    for a, (up, um, vp, vm) in enumerate(strips):
        acc = 0.0
        for u_iv, _ in (up, um):
            for v_iv, _ in (vp, vm):
                acc += _rect_integral(pref, u_iv, v_iv)
        out[a] = spec.scale**2 * acc / cn
    return out


def expected_scaled_pv(spec, sigma, n, k, p, s, t):
    """Exact conditional expectation of the scaled variation given sigma.

    eps^2 sum_ij m_p (int sigma^2(eps i - xi, eps j - tau) pi_n)^{p/2} over
    the retained corners in [0,s] x [0,t].  Constant volatility collapses to
    m_p sigma^p eps^2 floor(s/eps) floor(t/eps) for every weight; otherwise
    only the uniform window weight admits an exact route here.
    """
    n, k, p = int(n), int(k), float(p)
    if p <= 0.0:
        raise ValueError(f"power must be positive, got {p}")
    if not 1 <= k <= n:
        raise ValueError(f"thinning k must satisfy 1 <= k <= n, got {k}")
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise ValueError(f"evaluation point ({s}, {t}) outside the unit square")
    eps = k / n
    ci, _ = _floor_frac(float(s), eps)
    cj, _ = _floor_frac(float(t), eps)
    if ci == 0 or cj == 0:
        return 0.0
    mp = abs_moment(p)
    if np.all(sigma.values == sigma.values.flat[0]):
        sigma0 = float(sigma.values.flat[0])
        return mp * sigma0**p * eps**2 * ci * cj
    if isinstance(spec, UniformWeight):
        idx = np.array([(i, j) for i in range(1, ci + 1) for j in range(1, cj + 1)])
        avg = _pi_average_sq_uniform(spec, sigma, n, eps, idx)
        return float(eps**2 * mp * np.sum(avg ** (p / 2.0)))
    raise ValueError(
        "exact conditional expectation is available for constant volatility "
        "(any weight) or the uniform window weight (any volatility); use the "
        "simulation route for other combinations"
    )


def bias_term(sigma0, p, eps_n, s, t):
    """Closed-form gap between the expected scaled variation and its limit.

    For constant volatility the expectation is m_p sigma^p (eps floor(s/eps))
    (eps floor(t/eps)) while the limit is m_p sigma^p s t; the difference is
    -m_p sigma^p eps ({s/eps} t + {t/eps} s - eps {s/eps} {t/eps}), exactly
    zero when s and t sit on the coarse lattice.
    """
    sigma0, p, eps_n = float(sigma0), float(p), float(eps_n)
    if p <= 0.0:
        raise ValueError(f"power must be positive, got {p}")
    if not 0.0 < eps_n <= 1.0:
        raise ValueError(f"cell width must lie in (0, 1], got {eps_n}")
    _, fs = _floor_frac(float(s), eps_n)
    _, ft = _floor_frac(float(t), eps_n)
    return -abs_moment(p) * sigma0**p * eps_n * (fs * t + ft * s - eps_n * fs * ft)


def save_variation_csv(V, path):
    m = V.values.shape[0] - 1
    with open(path, "w") as fh:
        fh.write(
            f"# power variation field: p={float(V.p)!r} k={V.k} n={V.n} "
            f"eps={float(V.eps)!r} c_n={None if V.c_n is None else float(V.c_n)!r}\n"
        )
        fh.write("s,t,value\n")
        for i in range(m + 1):
            for j in range(m + 1):
                fh.write(
                    f"{repr(i * V.k / V.n)},{repr(j * V.k / V.n)},"
                    f"{repr(float(V.values[i, j]))}\n"
                )
