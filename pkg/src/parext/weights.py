"""Explicit decay weights and a Muckenhoupt ``A_p`` constant estimator.

With ``x = (x', x_d)``::

    upsilon(x)      = min(1, |x'|^-d, |x_d - |x'|^2|^-d)
    upsilon_star(x) = min(1, |x'|^-d, |x_d + |x'|^2|^-d)
    w  = 1 / upsilon_star = max(1, |x'|^d, |x_d + |x'|^2|^d)
    w* = 1 / upsilon      = max(1, |x'|^d, |x_d - |x'|^2|^d)

A term whose base is zero is +inf inside the ``min`` and simply drops out,
which is the same as evaluating the ``max`` form and taking a reciprocal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularEvaluation
from .grid import GridSpec, SampledField

__all__ = [
    "WeightKind",
    "WeightSpec",
    "BallFamily",
    "eval_weight",
    "weight_field",
    "ap_constant",
    "max_weight_comparison",
    "axis_family",
    "standard_family",
    "APResult",
]


class WeightKind(str, enum.Enum):
    UPSILON = "upsilon"
    UPSILON_STAR = "upsilon_star"
    W = "w"
    W_STAR = "w_star"
    AXIS_POWER = "axis"
    PARABOLA_POWER = "parabola"
    MAX = "max"  # pointwise maximum of two other specs


@dataclass(frozen=True)
class WeightSpec:
    """A weight kind, the dimension ``d`` and an extra power on top.

    ``s`` is the exponent for the two power kinds; ``parts`` holds the two
    operands of a ``MAX`` weight.
    """

    kind: WeightKind
    d: int = 2
    power: float = 1.0
    s: float = 0.0
    parts: tuple = field(default=(), compare=True)

    def __post_init__(self):
        object.__setattr__(self, "kind", WeightKind(self.kind))
        if self.d < 2:
            raise ValueError("d must be >= 2")

    @classmethod
    def parse(cls, text: str, d: int = 2) -> "WeightSpec":
        """Parse the CLI form ``upsilon``, ``w_star``, ``axis:0.5`` or ``parabola:0.3``."""
        name, _, arg = text.partition(":")
        kind = WeightKind(name.strip().lower())
        if kind in (WeightKind.AXIS_POWER, WeightKind.PARABOLA_POWER):
            if not arg:
                raise ValueError(f"{name} needs an exponent, e.g. {name}:0.5")
            return cls(kind, d=d, s=float(arg))
        if arg:
            return cls(kind, d=d, power=float(arg))
        return cls(kind, d=d)

    def label(self) -> str:
        if self.kind in (WeightKind.AXIS_POWER, WeightKind.PARABOLA_POWER):
            base = f"{self.kind.value}:{self.s:g}"
        elif self.kind is WeightKind.MAX:
            base = "max(" + ",".join(p.label() for p in self.parts) + ")"
        else:
            base = self.kind.value
        return base if self.power == 1.0 else f"{base}^{self.power:g}"


def upsilon_max(x1, x2, d: int, sign: int):
    """``max(1, |x'|^d, |x_d + sign |x'|^2|^d)`` for ``x'`` given by ``x1``.

    ``x1`` may carry a trailing axis of length ``d - 1`` when ``d > 2``.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if d == 2:
        r2 = x1 * x1
    else:
        r2 = np.sum(x1 * x1, axis=-1)
    a = np.abs(x2 + sign * r2) ** d
    return np.maximum(np.maximum(1.0, r2 ** (d / 2.0)), a)


def _raw(spec: WeightSpec, x1, x2):
    d = spec.d
    if spec.kind is WeightKind.W:
        return upsilon_max(x1, x2, d, +1)
    if spec.kind is WeightKind.W_STAR:
        return upsilon_max(x1, x2, d, -1)
    if spec.kind is WeightKind.UPSILON:
        return 1.0 / upsilon_max(x1, x2, d, -1)
    if spec.kind is WeightKind.UPSILON_STAR:
        return 1.0 / upsilon_max(x1, x2, d, +1)
    if spec.kind is WeightKind.MAX:
        a, b = spec.parts
        return np.maximum(eval_weight(a, x1, x2), eval_weight(b, x1, x2))
    x1 = np.asarray(x1, dtype=np.float64)
    r2 = x1 * x1 if d == 2 else np.sum(x1 * x1, axis=-1)
    if spec.kind is WeightKind.AXIS_POWER:
        base = np.sqrt(r2)
    else:
        base = np.abs(np.asarray(x2, dtype=np.float64) + r2)
    if spec.s < 0 and np.any(base == 0):
        raise SingularEvaluation(f"{spec.label()} is infinite on its singular set")
    with np.errstate(divide="ignore"):
        return base ** spec.s


def eval_weight(spec: WeightSpec, x1, x2):
    """Evaluate the weight at ``(x1, x2)``; arrays broadcast.

    Raises :class:`SingularEvaluation` where the value would be infinite.
    """
    v = _raw(spec, x1, x2)
    if spec.power != 1.0:
        if spec.power < 0 and np.any(v == 0):
            raise SingularEvaluation(f"{spec.label()} vanishes and is raised to a negative power")
        with np.errstate(divide="ignore", over="ignore"):
            v = v ** spec.power
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise SingularEvaluation(f"{spec.label()} is not finite at a requested point")
    return float(v) if v.ndim == 0 else v


def weight_field(spec: WeightSpec, grid: GridSpec) -> SampledField:
    x1, x2 = grid.mesh()
    return SampledField(grid, eval_weight(spec, x1, x2))


# -- A_p estimation ------------------------------------------------------------


@dataclass(frozen=True)
class BallFamily:
    """Finite set of balls over which the ``A_p`` supremum is taken.

    Balls are all ``(center, r)`` pairs with ``r = r_min * 2**k`` for
    ``k = 0..K``.  Ball averages use a midpoint lattice on the bounding
    square: ``samples_per_axis`` points per side when ``spacing`` is None,
    otherwise a lattice of absolute step ``spacing`` (capped at
    ``max_per_axis`` points per side for weights that depend on both
    coordinates).
    """

    centers: tuple
    r_min: float
    K: int
    samples_per_axis: int = 32
    spacing: float | None = None
    max_per_axis: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(tuple(map(float, c)) for c in self.centers))
        if self.r_min <= 0:
            raise ValueError("radii must be positive")
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.samples_per_axis ** 2 < 64:
            raise ValueError("at least 64 samples per ball are required")

    @property
    def radii(self) -> np.ndarray:
        return self.r_min * 2.0 ** np.arange(self.K + 1)

    def balls(self):
        for r in self.radii:
            for c in self.centers:
                yield c, float(r)

    def n_per_axis(self, r: float) -> int:
        if self.spacing is None:
            return self.samples_per_axis
        return max(self.samples_per_axis, int(round(2.0 * r / self.spacing)))


def axis_family(r_min: float = 1.0, K: int = 6, heights=(0.0, 1.0, -1.0, 3.0)) -> BallFamily:
    """Balls centred on the axis ``x1 = 0``.

    The lattice step is tied to the smallest radius (32 points across the
    smallest ball), so extending the ladder downward also refines the
    sampling near the singular axis.
    """
    centers = tuple((0.0, float(y)) for y in heights)
    return BallFamily(centers, r_min, K, spacing=2.0 * r_min / 32)


def standard_family(samples_per_axis: int = 32) -> BallFamily:
    """Default family: coarse 9x9 lattice, axis and parabola centres, radii 2^-3..2^5."""
    g = np.arange(-4, 5) * 2.0
    centers = [(a, b) for a in g for b in g]
    centers += [(0.0, y) for y in (-3.0, -1.0, -0.5, 0.5, 1.0, 3.0)]
    centers += [(a, -a * a) for a in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)]
    return BallFamily(tuple(centers), 2.0 ** -3, 8, samples_per_axis=samples_per_axis)


def _depends_on_x1_only(spec: WeightSpec) -> bool:
    if spec.kind is WeightKind.AXIS_POWER:
        return True
    if spec.kind is WeightKind.MAX:
        return all(_depends_on_x1_only(p) for p in spec.parts)
    return False


def _ball_lattice(c, r, n):
    u = -1.0 + (2.0 * np.arange(n) + 1.0) / n  # midpoints in (-1, 1)
    return c[0] + r * u, c[1] + r * u, u


def _ball_averages(u_spec: WeightSpec, p: float, c, r: float, n: int, cap: int, jitter=0.0):
    """Lattice averages of ``u`` and ``u^(-1/(p-1))`` over the ball ``B(c, r)``."""
    q = -1.0 / (p - 1.0)
    if _depends_on_x1_only(u_spec):
        x1, _, uu = _ball_lattice((c[0] + jitter * r / n, c[1]), r, n)
        # the weight is constant along each lattice column, so only the
        # number of column points inside the disc matters
        half = np.sqrt(np.maximum(1.0 - uu * uu, 0.0))
        v = uu
        counts = np.searchsorted(v, half, side="right") - np.searchsorted(v, -half, side="left")
        counts = counts.astype(np.float64)
        vals = eval_weight(u_spec, x1, np.zeros_like(x1))
        keep = counts > 0
        if np.any(vals[keep] == 0):
            raise SingularEvaluation("u vanishes at a lattice point")
        counts, vals = counts[keep], vals[keep]
        total = counts.sum()
        a = float(np.sum(counts * vals) / total)
        b = float(np.sum(counts * vals ** q) / total)
        return a, b
    n = min(n, cap)
    x1, x2, uu = _ball_lattice((c[0] + jitter * r / n, c[1] + jitter * r / n), r, n)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    U, V = np.meshgrid(uu, uu, indexing="ij")
    inside = U * U + V * V <= 1.0
    vals = eval_weight(u_spec, X1[inside], X2[inside])
    if np.any(vals == 0):
        raise SingularEvaluation("u vanishes at a lattice point")
    a = float(np.mean(vals))
    with np.errstate(divide="ignore", over="ignore"):
        inv = vals ** q
    if not np.all(np.isfinite(inv)):
        raise SingularEvaluation("u^(-1/(p-1)) is infinite at a lattice point")
    b = float(np.mean(inv))
    return a, b


@dataclass
class APResult:
    value: float
    center: tuple
    radius: float
    per_ball: list = field(default_factory=list, repr=False)

    def as_dict(self):
        return {"ap": self.value, "argmax_ball": {"center": list(self.center), "radius": self.radius}}


def ap_constant(spec: WeightSpec, p: float, family: BallFamily, keep_per_ball: bool = False) -> APResult:
    """Family-restricted ``A_p`` constant ``max_B avg(u) * avg(u^(-1/(p-1)))^(p-1)``.

    A lattice point landing on a singular set triggers one retry with the
    lattice shifted by a third of a cell; a second hit raises.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    best = APResult(-np.inf, (np.nan, np.nan), np.nan)
    per_ball = []
    for c, r in family.balls():
        n = family.n_per_axis(r)
        try:
            a, b = _ball_averages(spec, p, c, r, n, family.max_per_axis)
        except SingularEvaluation:
            a, b = _ball_averages(spec, p, c, r, n, family.max_per_axis, jitter=1.0 / 3.0)
        val = a * b ** (p - 1.0)
        if keep_per_ball:
            per_ball.append((c, r, val))
        if val > best.value:
            best = APResult(val, c, r)
    best.per_ball = per_ball
    return best


def max_weight_comparison(u: WeightSpec, v: WeightSpec, p: float, family: BallFamily) -> dict:
    """Constants of ``u``, ``v`` and ``max(u, v)`` on one family, plus the 2x bound."""
    m = WeightSpec(WeightKind.MAX, d=u.d, parts=(u, v))
    ap_u = ap_constant(u, p, family).value
    ap_v = ap_constant(v, p, family).value
    ap_m = ap_constant(m, p, family).value
    return {
        "ap_max": ap_m,
        "ap_u": ap_u,
        "ap_v": ap_v,
        "bound": 2.0 * max(ap_u, ap_v),
        "ok": bool(ap_m <= 2.0 * max(ap_u, ap_v) * (1 + 1e-12)),
    }
