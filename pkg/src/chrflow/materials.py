"""Double-well potentials, reaction laws and their structural checks.

A :class:`MaterialLaw` bundles the chemical energy density ``f`` (with two
derivatives), the reaction rate ``R(s, w)`` of concentration trace ``s`` and
chemical potential ``w``, its primitive ``G`` in ``w`` and the derivative
``R_w``.  All callables are vectorised over numpy arrays.

The validator samples every growth/monotonicity hypothesis the existence
theory needs, with all dual exponents fixed to 2, and reports an empirical
constant for each.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

Array = np.ndarray
Scalar1 = Callable[[Array], Array]
Scalar2 = Callable[[Array, Array], Array]

# Sobolev exponent used for the f'' growth check in dimension <= 2 (any value
# above 2 is admissible there; 6 makes quartic wells admissible).
SOBOLEV_EXPONENT = 6.0
# Reported constants above this are treated as violations on the sample grid.
MAX_CONSTANT = 1e6
BV_AREA_FLOOR = 0.05


@dataclass(frozen=True)
class MaterialLaw:
    f: Scalar1
    df: Scalar1
    d2f: Scalar1
    R: Scalar2
    dR_dw: Scalar2
    G: Scalar2
    epsilon: float
    variant: str
    params: dict = field(default_factory=dict)

    @property
    def beta(self) -> float | None:
        return self.params.get("beta")

    @property
    def k(self) -> float | None:
        return self.params.get("k")

    def rescaled_well(self, factor: float) -> "MaterialLaw":
        """Same law with ``f`` multiplied by ``factor``."""
        f, df, d2f = self.f, self.df, self.d2f
        return MaterialLaw(
            lambda s: factor * f(s), lambda s: factor * df(s), lambda s: factor * d2f(s),
            self.R, self.dR_dw, self.G, self.epsilon, self.variant,
            {**self.params, "well_scale": factor * self.params.get("well_scale", 1.0)},
        )


def _clamp01(s):
    return np.clip(s, 0.0, 1.0)


def quartic_well(scale: float = 1.0) -> tuple[Scalar1, Scalar1, Scalar1]:
    """``scale * s^2 (1 - s)^2`` and its first two derivatives."""
    def f(s):
        s = np.asarray(s, dtype=float)
        return scale * s**2 * (1.0 - s) ** 2

    def df(s):
        s = np.asarray(s, dtype=float)
        return scale * 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s)

    def d2f(s):
        s = np.asarray(s, dtype=float)
        return scale * (2.0 - 12.0 * s + 12.0 * s**2)

    return f, df, d2f


def make_quartic_affine(epsilon: float, k: float = 0.0, beta: float = 1.0) -> MaterialLaw:
    """Quartic well with the affine insertion law ``R = k (1 - s) - beta w``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not k >= 0:
        raise ValueError("k must be nonnegative")
    f, df, d2f = quartic_well()

    def R(s, w):
        return k * (1.0 - _clamp01(s)) - beta * np.asarray(w, dtype=float)

    def dR_dw(s, w):
        return np.broadcast_to(-beta, np.broadcast(np.asarray(s), np.asarray(w)).shape).astype(float)

    def G(s, w):
        w = np.asarray(w, dtype=float)
        return k * (1.0 - _clamp01(s)) * w - 0.5 * beta * w**2

    return MaterialLaw(f, df, d2f, R, dR_dw, G, float(epsilon), "affine",
                       {"k": float(k), "beta": float(beta)})


def make_clipped_butler_volmer(epsilon: float, i0: float = 1.0, alpha: float = 0.5,
                               w_max: float = 4.0) -> MaterialLaw:
    """Quartic well with Butler-Volmer kinetics, linearly continued past ``|w| = w_max``.

    ``R = i0 a(s) g(w)`` with ``g(w) = exp(-alpha w) - exp((1 - alpha) w)``
    for ``|w| <= w_max`` and the tangent line of ``g`` beyond, and
    ``a(s) = s (1 - s) + 0.05`` on the clamped trace.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not i0 > 0:
        raise ValueError("i0 must be positive")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not w_max > 0:
        raise ValueError("w_max must be positive")
    f, df, d2f = quartic_well()
    a1 = 1.0 - alpha

    def g(w):
        return np.exp(-alpha * w) - np.exp(a1 * w)

    def dg(w):
        return -alpha * np.exp(-alpha * w) - a1 * np.exp(a1 * w)

    def prim(w):
        return (1.0 - np.exp(-alpha * w)) / alpha - (np.exp(a1 * w) - 1.0) / a1

    def area(s):
        s = _clamp01(np.asarray(s, dtype=float))
        return s * (1.0 - s) + BV_AREA_FLOOR

    def split(w):
        w = np.asarray(w, dtype=float)
        wc = np.clip(w, -w_max, w_max)
        return w, wc, w - wc

    def g_ext(w):
        w, wc, d = split(w)
        return g(wc) + dg(wc) * d

    def dg_ext(w):
        _, wc, _ = split(w)
        return dg(wc)

    def prim_ext(w):
        w, wc, d = split(w)
        return prim(wc) + g(wc) * d + 0.5 * dg(wc) * d**2

    def R(s, w):
        return i0 * area(s) * g_ext(w)

    def dR_dw(s, w):
        return i0 * area(s) * dg_ext(w)

    def G(s, w):
        return i0 * area(s) * prim_ext(w)

    law = MaterialLaw(f, df, d2f, R, dR_dw, G, float(epsilon), "butler_volmer",
                      {"i0": float(i0), "alpha": float(alpha), "w_max": float(w_max)})
    report = validate(law)
    if not report.passed:
        raise ValueError(f"Butler-Volmer law violates assumption {report.first_failure}")
    return law


def surface_tension(law: MaterialLaw) -> float:
    """``sigma = int_0^1 sqrt(2 f(s)) ds``."""
    val, _ = integrate.quad(lambda s: math.sqrt(max(2.0 * float(law.f(s)), 0.0)), 0.0, 1.0,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def _well_max(law: MaterialLaw) -> float:
    res = optimize.minimize_scalar(lambda s: -float(law.f(s)), bounds=(0.0, 1.0), method="bounded",
                                   options={"xatol": 1e-12})
    grid = np.linspace(0.0, 1.0, 1001)
    return max(-res.fun, float(np.max(law.f(grid))))


def phi_geodesic(law: MaterialLaw, s: float, growth_constant: float | None = None) -> float:
    """Geodesic-distance primitive ``int_0^s sqrt(2 min{f(t), t^2/(1+C) + K}) dt``.

    ``K`` is twice the maximum of ``f`` on ``[0, 1]``, so the cap is inactive
    there and ``phi(1)`` equals the surface tension.
    """
    C = validate(law).constant if growth_constant is None else growth_constant
    K = 2.0 * _well_max(law)

    def integrand(t):
        cap = t * t / (1.0 + C) + K
        return math.sqrt(2.0 * max(min(float(law.f(t)), cap), 0.0))

    points = [p for p in (0.0, 1.0) if min(0.0, s) < p < max(0.0, s)]
    val, _ = integrate.quad(integrand, 0.0, s, epsabs=1e-13, epsrel=1e-13, limit=200,
                            points=points or None)
    return val


@dataclass
class AssumptionCheck:
    name: str
    description: str
    passed: bool
    constant: float
    witness: tuple | None = None


@dataclass
class ValidationReport:
    checks: list[AssumptionCheck]
    s_grid: np.ndarray
    w_grid: np.ndarray

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> str | None:
        for c in self.checks:
            if not c.passed:
                return c.name
        return None

    @property
    def constant(self) -> float:
        vals = [c.constant for c in self.checks if c.passed and np.isfinite(c.constant)]
        return max(vals) if vals else float("nan")

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "constant": self.constant,
            "checks": [
                {"name": c.name, "description": c.description, "passed": c.passed,
                 "constant": c.constant, "witness": list(c.witness) if c.witness else None}
                for c in self.checks
            ],
            "grid": {"s": [float(self.s_grid[0]), float(self.s_grid[-1]), len(self.s_grid)],
                     "w": [float(self.w_grid[0]), float(self.w_grid[-1]), len(self.w_grid)]},
        }


def _smallest_constant(ok: Callable[[float], bool], hi: float = MAX_CONSTANT) -> float:
    """Smallest C in [1, hi] with ``ok(C)``, assuming monotonicity in C."""
    if ok(1.0):
        return 1.0
    if not ok(hi):
        return float("inf")
    lo = 1.0
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi / lo < 1 + 1e-6:
            break
    return hi


def validate(law: MaterialLaw, s_grid: np.ndarray | None = None,
             w_grid: np.ndarray | None = None) -> ValidationReport:
    """Sample the structural hypotheses on ``f`` and ``R`` and estimate constants.

    Stops at the first violated hypothesis; later ones are not evaluated.
    """
    s = np.linspace(-10.0, 10.0, 81) if s_grid is None else np.asarray(s_grid, float)
    w = np.linspace(-10.0, 10.0, 81) if w_grid is None else np.asarray(w_grid, float)
    S, W = np.meshgrid(s, w, indexing="ij")
    checks: list[AssumptionCheck] = []

    def add(name, desc, passed, const, witness=None):
        checks.append(AssumptionCheck(name, desc, bool(passed), float(const), witness))
        return passed

    # (2.1): coercive lower bound and f'' growth
    fs, f2 = law.f(s), law.d2f(s)
    c_low = _smallest_constant(lambda C: bool(np.all(fs >= s**2 / C - C)))
    c_f2 = float(np.max(np.abs(f2) / (np.abs(s) ** (SOBOLEV_EXPONENT / 2 - 1) + 1)))
    if not add("well_growth", "f(s) >= |s|^2/C - C and |f''(s)| <= C(|s|^(2*/2-1) + 1)",
               np.isfinite(c_low) and c_f2 <= MAX_CONSTANT, max(c_low, c_f2)):
        return ValidationReport(checks, s, w)

    # (2.2): wells at 0 and 1, positive elsewhere
    f01 = law.f(np.array([0.0, 1.0]))
    off = s[(np.abs(s) > 1e-12) & (np.abs(s - 1) > 1e-12)]
    f_off = law.f(off)
    if abs(f01[0]) > 1e-14 or abs(f01[1]) > 1e-14:
        bad = 0.0 if abs(f01[0]) > 1e-14 else 1.0
        add("well_zeros", "f(0) = f(1) = 0 and f > 0 elsewhere", False, float("nan"),
            (bad, float(law.f(bad))))
        return ValidationReport(checks, s, w)
    if np.any(f_off <= 0):
        i = int(np.argmin(f_off))
        add("well_zeros", "f(0) = f(1) = 0 and f > 0 elsewhere", False, float("nan"),
            (float(off[i]), float(f_off[i])))
        return ValidationReport(checks, s, w)
    add("well_zeros", "f(0) = f(1) = 0 and f > 0 elsewhere", True, 1.0)

    # (2.3): d/dw G = R, fourth-order central differences
    d = 1e-4
    dG = (-law.G(S, W + 2 * d) + 8 * law.G(S, W + d) - 8 * law.G(S, W - d) + law.G(S, W - 2 * d)) / (12 * d)
    Rv = law.R(S, W)
    err = np.abs(dG - Rv) / (1.0 + np.abs(Rv))
    i = np.unravel_index(np.argmax(err), err.shape)
    if not add("primitive_consistency", "d/dw G(s, w) = R(s, w)", err[i] <= 1e-8, float(err[i]),
               (float(S[i]), float(W[i]), float(err[i]))):
        return ValidationReport(checks, s, w)

    # (2.4): strong monotonicity in w over all pairs of the w grid
    dR = Rv[:, :, None] - Rv[:, None, :]
    dW = W[:, :, None] - W[:, None, :]
    mask = np.abs(dW) > 0
    slope = np.where(mask, -dR * dW / np.where(mask, dW**2, 1.0), np.inf)
    j = np.unravel_index(np.argmin(slope), slope.shape)
    m = float(slope[j])
    witness = (float(s[j[0]]), float(w[j[1]]), float(w[j[2]]), float(dR[j] * dW[j]))
    if not add("strict_monotonicity", "(R(s,w2) - R(s,w1))(w2 - w1) <= -|w2 - w1|^2 / C",
               m > 0 and 1.0 / m <= MAX_CONSTANT, 1.0 / m if m > 0 else float("inf"), witness):
        return ValidationReport(checks, s, w)

    # (2.5): linear growth
    c25 = float(np.max(np.abs(Rv) / (np.abs(S) + np.abs(W) + 1.0)))
    if not add("linear_growth", "|R(s,w)| <= C(|s| + |w| + 1)", c25 <= MAX_CONSTANT, c25):
        return ValidationReport(checks, s, w)

    # (2.6): bounded at w = +-1
    s_line = np.linspace(-10.0, 10.0, 401)
    c26 = float(max(np.max(np.abs(law.R(s_line, 1.0))), np.max(np.abs(law.R(s_line, -1.0)))))
    if not add("bounded_near_zero", "|R(s, +-1)| <= C", c26 <= MAX_CONSTANT, c26):
        return ValidationReport(checks, s, w)

    # (2.7): growth of G
    Gv = law.G(S, W)
    c27 = float(np.max(np.abs(Gv) / (np.abs(S) * np.abs(W) + W**2 + 1.0)))
    if not add("primitive_growth", "|G(s,w)| <= C(|s||w| + |w|^2 + 1)", c27 <= MAX_CONSTANT, c27):
        return ValidationReport(checks, s, w)

    # (2.8): coercivity of -w R
    wR = -W * Rv
    c28 = _smallest_constant(lambda C: bool(np.all(wR >= W**2 / C - C)))
    if not add("flux_coercivity", "-w R(s,w) >= |w|^2/C - C", np.isfinite(c28), c28):
        return ValidationReport(checks, s, w)

    # (2.9): coercivity of -G
    c29 = _smallest_constant(lambda C: bool(np.all(Gv <= -W**2 / C + C)))
    add("primitive_coercivity", "G(s,w) <= -|w|^2/C + C", np.isfinite(c29), c29)
    return ValidationReport(checks, s, w)


def make_law(variant: str, epsilon: float, **params) -> MaterialLaw:
    """Build a law from a variant tag and its keyword parameters."""
    if variant in ("affine", "quartic_affine"):
        return make_quartic_affine(epsilon, k=params.get("k", 0.0), beta=params.get("beta", 1.0))
    if variant in ("butler_volmer", "clipped_butler_volmer", "bv"):
        return make_clipped_butler_volmer(epsilon, i0=params.get("i0", 1.0),
                                          alpha=params.get("alpha", 0.5),
                                          w_max=params.get("w_max", 4.0))
    raise ValueError(f"unknown material variant {variant!r}")
