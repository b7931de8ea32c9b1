"""Dissipation laws, configuration potentials, and bi-Lipschitz surrogates.

A dissipation law is a C^1 increasing function vanishing at 0 with slope
bounded below by a coercivity floor sigma.  A potential is lambda-convex
(second derivative >= -lambda) on an open interval containing 0, with
derivative blowing up toward any finite endpoint, and bounded below by
eta r^2 / 2 after an additive shift.

``regularize`` replaces both nonlinearities by clamp-and-affine-extension
surrogates whose slopes are bounded above and below, so the implicit
solver faces a globally Lipschitz monotone problem; inside the clamping
windows the surrogates agree with the originals exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

_SLOPE_TOL = 1e-9


@dataclass(frozen=True)
class DissipationLaw:
    """Velocity-to-force law: increasing, zero at zero, slope >= sigma."""

    label: str
    sigma: float
    value: ArrayFn
    deriv: ArrayFn

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise ValueError(f"coercivity floor must be positive, got {self.sigma}")
        if abs(float(self.value(np.array(0.0)))) > 1e-14:
            raise ValueError("dissipation law must vanish at 0")
        r = np.linspace(-30.0, 30.0, 601)
        if np.min(self.deriv(r)) < self.sigma - _SLOPE_TOL:
            raise ValueError(
                f"slope of {self.label!r} drops below declared floor {self.sigma}"
            )


@dataclass(frozen=True)
class Potential:
    """Configuration potential with domain interval, convexity defect and
    quadratic lower bound.

    ``lam`` is the convexity defect (second derivative >= -lam), ``domain``
    the open admissible interval, ``eta``/``shift`` the constants of the
    quadratic lower bound value >= eta r^2 / 2, and ``analytic`` marks
    real-analyticity on the core interval (needed by omega-limit analysis).
    """

    label: str
    value: ArrayFn
    dW: ArrayFn
    d2W: ArrayFn
    lam: float
    domain: tuple[float, float]
    eta: float
    shift: float
    analytic: bool

    def __post_init__(self) -> None:
        lo, hi = self.domain
        if not (lo < 0.0 < hi):
            raise ValueError(f"domain {self.domain} must contain 0")
        if self.lam < 0.0 or self.eta <= 0.0:
            raise ValueError("need lam >= 0 and eta > 0")
        if abs(float(self.dW(np.array(0.0)))) > 1e-14:
            raise ValueError("potential derivative must vanish at 0")
        r = self.sample_points()
        if np.min(self.d2W(r)) < -self.lam - _SLOPE_TOL:
            raise ValueError(f"{self.label!r}: second derivative below -lam")
        w = self.value(r)
        if np.min(w - 0.5 * self.eta * r * r) < -1e-12:
            raise ValueError(f"{self.label!r}: quadratic lower bound fails")
        self._check_blowup()

    def sample_points(self, m: int = 2001) -> np.ndarray:
        lo, hi = self.domain
        a = lo + 1e-6 * min(1.0, hi - lo) if np.isfinite(lo) else -30.0
        b = hi - 1e-6 * min(1.0, hi - lo) if np.isfinite(hi) else 30.0
        return np.linspace(a, b, m)

    def _check_blowup(self) -> None:
        # derivative must diverge with the right sign toward finite endpoints
        lo, hi = self.domain
        for end, sign in ((hi, 1.0), (lo, -1.0)):
            if not np.isfinite(end):
                continue
            width = hi - lo
            probes = [end - sign * width * 10.0**-k for k in range(2, 8)]
            vals = [sign * float(self.dW(np.array(p))) for p in probes]
            if not all(b > a for a, b in zip(vals, vals[1:])) or vals[-1] < 10.0:
                raise ValueError(
                    f"{self.label!r}: derivative does not blow up toward {end}"
                )

    def contains(self, v: np.ndarray, margin: float = 0.0) -> bool:
        lo, hi = self.domain
        return bool(np.all(v > lo + margin) and np.all(v < hi - margin))


# -- catalog ------------------------------------------------------------------

def make_dissipation(kind: str, sigma: float = 1.0, a: float = 1.0) -> DissipationLaw:
    """Catalog dissipation laws: linear, cubic (sigma r + a r^3), sinh."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if kind == "linear":
        return DissipationLaw(
            f"linear(sigma={sigma:g})", sigma,
            lambda r: sigma * r,
            lambda r: sigma * np.ones_like(np.asarray(r, dtype=float)),
        )
    if kind == "cubic":
        if a < 0.0:
            raise ValueError(f"cubic coefficient must be >= 0, got {a}")
        return DissipationLaw(
            f"cubic(sigma={sigma:g},a={a:g})", sigma,
            lambda r: sigma * r + a * r**3,
            lambda r: sigma + 3.0 * a * np.asarray(r, dtype=float) ** 2,
        )
    if kind == "sinh":
        return DissipationLaw(
            f"sinh(sigma={sigma:g})", sigma,
            lambda r: sigma * np.sinh(r),
            lambda r: sigma * np.cosh(r),
        )
    raise ValueError(f"unknown dissipation kind {kind!r}")


def make_potential(
    kind: str,
    theta: float = 0.0,
    lam: float | None = None,
    eta: float | None = None,
    shift: float | None = None,
) -> Potential:
    """Catalog potentials: quadratic, double_well, logarithmic.

    ``lam`` overrides the intrinsic convexity defect (useful for
    experiments); it must still dominate the sampled second derivative.
    """
    if kind == "quadratic":
        return Potential(
            "quadratic",
            lambda r: 0.5 * np.asarray(r, dtype=float) ** 2,
            lambda r: np.asarray(r, dtype=float),
            lambda r: np.ones_like(np.asarray(r, dtype=float)),
            lam if lam is not None else 0.0,
            (-math.inf, math.inf),
            eta if eta is not None else 1.0,
            shift if shift is not None else 0.0,
            True,
        )
    if kind == "double_well":
        # eta/2 alone is not a valid shift: min over r of
        # (1-r^2)^2/4 - eta r^2/2 is -(eta/2 + eta^2/4), so the shift must
        # exceed it; 0.055 leaves a 2.5e-3 margin for eta = 0.1.
        sh = shift if shift is not None else 0.055
        return Potential(
            "double_well",
            lambda r: 0.25 * (1.0 - np.asarray(r, dtype=float) ** 2) ** 2 + sh,
            lambda r: np.asarray(r, dtype=float) ** 3 - np.asarray(r, dtype=float),
            lambda r: 3.0 * np.asarray(r, dtype=float) ** 2 - 1.0,
            lam if lam is not None else 1.0,
            (-math.inf, math.inf),
            eta if eta is not None else 0.1,
            sh,
            True,
        )
    if kind == "logarithmic":
        if theta < 0.0:
            raise ValueError(f"logarithmic potential needs theta >= 0, got {theta}")
        et = eta if eta is not None else 0.1
        # entropy part dominates r^2, so a shift is needed only when
        # theta + eta exceeds 2
        sh = shift if shift is not None else max(0.0, 0.5 * (theta + et) - 1.0)

        def w(r: np.ndarray) -> np.ndarray:
            r = np.asarray(r, dtype=float)
            return (
                (1.0 + r) * np.log1p(r)
                + (1.0 - r) * np.log1p(-r)
                - 0.5 * theta * r * r
                + sh
            )

        return Potential(
            f"logarithmic(theta={theta:g})",
            w,
            lambda r: np.log1p(np.asarray(r, dtype=float))
            - np.log1p(-np.asarray(r, dtype=float))
            - theta * np.asarray(r, dtype=float),
            lambda r: 2.0 / (1.0 - np.asarray(r, dtype=float) ** 2) - theta,
            lam if lam is not None else max(0.0, theta - 2.0),
            (-1.0, 1.0),
            et,
            sh,
            True,
        )
    raise ValueError(f"unknown potential kind {kind!r}")


# -- bi-Lipschitz surrogates ---------------------------------------------------

@dataclass(frozen=True)
class RegularizedPair:
    """Level-n surrogates of a dissipation law and a potential.

    Both surrogates agree with the originals on their clamping windows and
    continue affinely (law) or linearly-in-derivative (potential) outside,
    so the surrogate law and ``dW + 2 lam id`` have slopes in a fixed
    positive band.
    """

    base_dissipation: DissipationLaw
    base_potential: Potential
    level: int
    dissipation: DissipationLaw
    potential: Potential
    window_velocity: tuple[float, float]
    window_state: tuple[float, float]

    def __post_init__(self) -> None:
        # sampled difference quotients of both monotone maps must sit in a
        # positive finite band (bi-Lipschitz requirement)
        r = np.linspace(-3.0 * self.level - 3.0, 3.0 * self.level + 3.0, 4001)
        spacing = r[1] - r[0]
        for fn, floor, name in (
            (self.dissipation.value, self.dissipation.sigma, "surrogate law"),
            (
                lambda s: self.potential.dW(s) + 2.0 * self.potential.lam * s,
                0.5 / self.level,
                "surrogate dW + 2 lam id",
            ),
        ):
            vals = fn(r)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"{name} is not finite on the test range")
            dq = np.diff(vals) / np.diff(r)
            # quotients of fast-growing laws cancel at the scale of the
            # largest value; widen the floor accordingly
            tol = _SLOPE_TOL + 4.0 * float(np.spacing(np.max(np.abs(vals)))) / spacing
            if np.min(dq) <= 0.0:
                raise ValueError(f"{name} is not strictly increasing")
            if np.min(dq) < floor - tol:
                raise ValueError(f"{name} slope drops below {floor}")


def regularize(
    dissipation: DissipationLaw, potential: Potential, level: int
) -> RegularizedPair:
    """Clamp both nonlinearities to level-n windows and extend affinely.

    The law is clamped to |r| <= n with outer slope 1/n; the potential
    derivative is clamped to a window keeping distance 1/n from finite
    endpoints (or reaching +-n for infinite ones), with outer slope at
    least -2 lam + 1/n.  Raises if the window would be empty or exclude 0.
    """
    if level < 1:
        raise ValueError(f"regularization level must be >= 1, got {level}")
    n = float(level)

    sig = dissipation.sigma
    base_a, base_da = dissipation.value, dissipation.deriv
    out_slope = 1.0 / n

    def a_val(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        c = np.clip(r, -n, n)
        return base_a(c) + out_slope * (r - c)

    def a_der(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = np.abs(r) <= n
        return np.where(inside, base_da(np.clip(r, -n, n)), out_slope)

    alpha_n = DissipationLaw(
        f"{dissipation.label}|reg{level}", min(sig, out_slope), a_val, a_der
    )

    lo, hi = potential.domain
    lo_n = lo + 1.0 / n if np.isfinite(lo) else -n
    hi_n = hi - 1.0 / n if np.isfinite(hi) else n
    if not (lo_n < 0.0 < hi_n):
        raise ValueError(
            f"clamping window [{lo_n}, {hi_n}] at level {level} is empty "
            "or excludes 0"
        )

    lam = potential.lam
    slope_floor = -2.0 * lam + 1.0 / n
    s_lo = max(float(potential.d2W(np.array(lo_n))), slope_floor)
    s_hi = max(float(potential.d2W(np.array(hi_n))), slope_floor)
    w_lo = float(potential.value(np.array(lo_n)))
    w_hi = float(potential.value(np.array(hi_n)))
    dw_lo = float(potential.dW(np.array(lo_n)))
    dw_hi = float(potential.dW(np.array(hi_n)))

    def w_val(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        c = np.clip(r, lo_n, hi_n)
        out = np.array(potential.value(c), dtype=float)
        d = r - c
        below = r < lo_n
        above = r > hi_n
        out = np.where(below, w_lo + dw_lo * d + 0.5 * s_lo * d * d, out)
        out = np.where(above, w_hi + dw_hi * d + 0.5 * s_hi * d * d, out)
        return out

    def w_d1(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        c = np.clip(r, lo_n, hi_n)
        out = np.array(potential.dW(c), dtype=float)
        d = r - c
        out = np.where(r < lo_n, dw_lo + s_lo * d, out)
        out = np.where(r > hi_n, dw_hi + s_hi * d, out)
        return out

    def w_d2(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.array(potential.d2W(np.clip(r, lo_n, hi_n)), dtype=float)
        out = np.where(r < lo_n, s_lo, out)
        out = np.where(r > hi_n, s_hi, out)
        return out

    # quadratic lower bound constant for the surrogate, calibrated on a wide
    # sample (the surrogate grows at least quadratically once s_lo, s_hi > 0)
    span = np.linspace(-3.0 * n - 3.0, 3.0 * n + 3.0, 2001)
    wv = w_val(span)
    rsq = 0.5 * span * span
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rsq > 1e-12, wv / rsq, np.inf)
    eta_n = min(potential.eta, 0.9 * float(np.min(ratios)))
    if eta_n <= 0.0:
        raise ValueError(
            f"surrogate potential at level {level} loses its quadratic lower bound"
        )

    w_n = Potential(
        f"{potential.label}|reg{level}",
        w_val,
        w_d1,
        w_d2,
        lam,
        (-math.inf, math.inf),
        eta_n,
        potential.shift,
        False,
    )
    return RegularizedPair(
        dissipation, potential, level, alpha_n, w_n, (-n, n), (lo_n, hi_n)
    )
