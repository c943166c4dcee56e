"""Reaction terms: bistable, ignition, and monostable classes with modifiers.

Concrete families:

* ``cubic_bistable(theta)``: u (1 - u) (u - theta)
* ``ignition(theta)``: 0 on [0, theta], scale * (u - theta)^2 (1 - u) above,
  so the function stays C^1 at the ignition threshold
* ``allee_monostable(beta)``: u^beta (1 - u); beta = 1 is the classical
  logistic/KPP case, beta > 1 has zero slope at the origin

Two modifiers mirror the constructions used by the solver: ``linear_shift``
subtracts tau * u (the tail-mass shift for restricted measures) and
``cutoff_index`` multiplies by a smooth ramp chi(n u) vanishing below 1/n,
turning a monostable term into an ignition one.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import quadrature
from .errors import BadInterval, ClassViolation, OutOfBand, WrongClass

BISTABLE = "bistable"
IGNITION = "ignition"
MONOSTABLE = "monostable"

EVAL_BAND = (-0.1, 1.1)


@dataclass(frozen=True)
class CubicBistableKind:
    theta: float


@dataclass(frozen=True)
class IgnitionKind:
    theta: float
    exponent: float = 2.0
    scale: float = 1.0


@dataclass(frozen=True)
class AlleeMonostableKind:
    beta: float


@dataclass(frozen=True)
class CustomKind:
    f: Callable
    fprime: Callable
    class_tag: str


@dataclass(frozen=True)
class NonlinearityDescriptor:
    kind: object
    linear_shift: float = 0.0
    cutoff_index: Optional[int] = None

    def __post_init__(self):
        k = self.kind
        if isinstance(k, (CubicBistableKind, IgnitionKind)):
            if not 0.0 < k.theta < 1.0:
                raise ClassViolation("threshold must lie in (0, 1)")
            if isinstance(k, IgnitionKind) and k.exponent <= 1.0:
                raise ClassViolation("ignition exponent must exceed 1 for C^1")
        elif isinstance(k, AlleeMonostableKind):
            if k.beta < 1.0:
                raise ClassViolation("allee exponent must be >= 1")
        elif not isinstance(k, CustomKind):
            raise ClassViolation(f"unknown reaction kind {type(k).__name__}")
        if self.linear_shift < 0.0:
            raise ClassViolation("linear shift must be nonnegative")

    @property
    def class_tag(self):
        k = self.kind
        if self.cutoff_index is not None:
            return IGNITION
        if isinstance(k, CubicBistableKind):
            return BISTABLE
        if isinstance(k, IgnitionKind):
            return IGNITION
        if isinstance(k, AlleeMonostableKind):
            return MONOSTABLE
        return k.class_tag

    @property
    def theta(self):
        """Threshold below which the (unshifted) reaction is <= 0."""
        if self.cutoff_index is not None:
            return 1.0 / self.cutoff_index
        k = self.kind
        if isinstance(k, (CubicBistableKind, IgnitionKind)):
            return k.theta
        return None


def cubic_bistable(theta):
    return NonlinearityDescriptor(CubicBistableKind(theta))


def ignition(theta, exponent=2.0, scale=1.0):
    return NonlinearityDescriptor(IgnitionKind(theta, exponent, scale))


def allee_monostable(beta):
    return NonlinearityDescriptor(AlleeMonostableKind(beta))


def custom(f, fprime, class_tag):
    if class_tag not in (BISTABLE, IGNITION, MONOSTABLE):
        raise ClassViolation(f"unknown class tag {class_tag!r}")
    return NonlinearityDescriptor(CustomKind(f, fprime, class_tag))


def smoothstep(t):
    """Quintic ramp: 0 below 0, 1 above 1, C^2 at the joints."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t ** 3 * (10.0 + t * (-15.0 + 6.0 * t))


def smoothstep_deriv(t):
    t = np.asarray(t, dtype=float)
    out = 30.0 * t ** 2 * (1.0 - t) ** 2
    return np.where((t <= 0.0) | (t >= 1.0), 0.0, out)


def _ramp(xi):
    """Cutoff profile: 0 for xi <= 1, 1 for xi >= 2, quintic in between."""
    return smoothstep(np.asarray(xi, dtype=float) - 1.0)


def _ramp_deriv(xi):
    return smoothstep_deriv(np.asarray(xi, dtype=float) - 1.0)


def _base_value_deriv(kind, s):
    s = np.asarray(s, dtype=float)
    if isinstance(kind, CubicBistableKind):
        th = kind.theta
        val = s * (1.0 - s) * (s - th)
        der = -3.0 * s ** 2 + 2.0 * (1.0 + th) * s - th
        return val, der
    if isinstance(kind, IgnitionKind):
        th, p, a = kind.theta, kind.exponent, kind.scale
        d = np.maximum(s - th, 0.0)
        val = a * d ** p * (1.0 - s)
        der = a * (p * d ** (p - 1.0) * (1.0 - s) - d ** p)
        return val, der
    if isinstance(kind, AlleeMonostableKind):
        b = kind.beta
        if b == 1.0:
            return s * (1.0 - s), 1.0 - 2.0 * s
        sp = np.maximum(s, 0.0)
        val = sp ** b * (1.0 - s)
        der = b * sp ** (b - 1.0) * (1.0 - s) - sp ** b
        return val, der
    val = np.asarray(kind.f(s), dtype=float)
    der = np.asarray(kind.fprime(s), dtype=float)
    return val, der


@dataclass(frozen=True)
class Evaluation:
    value: float
    derivative: float


def evaluate_array(nl, s):
    """Vectorized reaction value and derivative without band checks."""
    s = np.asarray(s, dtype=float)
    val, der = _base_value_deriv(nl.kind, s)
    if nl.cutoff_index is not None:
        n = nl.cutoff_index
        chi = _ramp(n * s)
        chi_d = n * _ramp_deriv(n * s)
        val, der = val * chi, der * chi + val * chi_d
    if nl.linear_shift:
        val = val - nl.linear_shift * s
        der = der - nl.linear_shift
    return val, der


def evaluate(nl, s):
    """Reaction value and derivative at a scalar state in the solver band."""
    if not EVAL_BAND[0] <= s <= EVAL_BAND[1]:
        raise OutOfBand(f"state {s} outside band {EVAL_BAND}")
    val, der = evaluate_array(nl, s)
    return Evaluation(value=float(val), derivative=float(der))


def definite_integral(nl, a, b):
    """Integral of the reaction over [a, b] in [0, 1]."""
    if not (0.0 <= a <= b <= 1.0):
        raise BadInterval(f"need 0 <= a <= b <= 1, got [{a}, {b}]")
    if a == b:
        return 0.0
    return quadrature.integrate(lambda s: evaluate_array(nl, s)[0], a, b,
                                rel_tol=1e-12)


@dataclass(frozen=True)
class Classification:
    class_tag: str
    theta: Optional[float]
    well_balanced: bool
    slope_at_zero: float
    integral: float


_SIGN_SAMPLES = 401


def classify(nl):
    """Class tag with derived scalars; sampled signs must match the tag."""
    tag = nl.class_tag
    theta = nl.theta
    integral = definite_integral(nl, 0.0, 1.0)
    slope0 = evaluate_array(nl, 0.0)[1]
    grid = np.linspace(0.0, 1.0, _SIGN_SAMPLES)[1:-1]
    vals = evaluate_array(nl, grid)[0]
    if nl.linear_shift == 0.0:
        if tag == BISTABLE:
            lo, hi = vals[grid < theta - 1e-9], vals[grid > theta + 1e-9]
            if lo.size and lo.max() >= 0.0:
                raise ClassViolation("bistable term must be negative below theta")
            if hi.size and hi.min() <= 0.0:
                raise ClassViolation("bistable term must be positive above theta")
        elif tag == IGNITION:
            lo, hi = vals[grid <= theta], vals[grid > 2.0 * theta + 1e-9]
            if lo.size and np.any(lo != 0.0):
                raise ClassViolation("ignition term must vanish below theta")
            if hi.size and hi.min() <= 0.0:
                raise ClassViolation("ignition term must be positive near 1")
        elif tag == MONOSTABLE:
            if vals.min() <= 0.0:
                raise ClassViolation("monostable term must be positive on (0, 1)")
    return Classification(
        class_tag=tag,
        theta=theta,
        well_balanced=abs(integral) <= 1e-12,
        slope_at_zero=float(slope0),
        integral=integral,
    )


def _bisect_root(fn, lo, hi, tol=1e-12, max_iter=200):
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        return None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or hi - lo < tol:
            return mid
        if flo * fmid < 0.0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ShiftedBistable:
    descriptor: NonlinearityDescriptor
    gamma: Optional[float]          # largest root of the shifted term, or None
    middle_root: Optional[float]    # unstable zero of the shifted term
    integral_to_gamma: Optional[float]


def shift_by_tail_mass(nl, tau):
    """Subtract tau * u and locate the surviving upper equilibrium.

    Returns the shifted descriptor together with its largest root gamma in
    (theta, 1] found by bisection, or gamma = None when the shift is too
    large for an upper equilibrium to survive.
    """
    if nl.class_tag != BISTABLE:
        raise WrongClass("tail-mass shift applies to bistable terms")
    if tau < 0.0:
        raise ClassViolation("shift must be nonnegative")
    shifted = replace(nl, linear_shift=nl.linear_shift + tau)
    theta = nl.theta

    def g(s):
        return float(evaluate_array(shifted, s)[0])

    if tau == 0.0 and nl.linear_shift == 0.0:
        return ShiftedBistable(shifted, 1.0, theta,
                               definite_integral(shifted, 0.0, 1.0))
    # scan down from 1 for the last sign change of the shifted term
    grid = np.linspace(theta, 1.0, 2001)
    vals = evaluate_array(shifted, grid)[0]
    pos = np.nonzero(vals > 0.0)[0]
    if pos.size == 0:
        return ShiftedBistable(shifted, None, None, None)
    i_hi = pos[-1]
    gamma = _bisect_root(g, grid[i_hi], 1.0) if vals[-1] < 0.0 else 1.0
    i_lo = pos[0]
    middle = _bisect_root(g, theta, grid[i_lo]) if i_lo > 0 else theta
    integ = definite_integral(shifted, 0.0, gamma)
    return ShiftedBistable(shifted, gamma, middle, integ)


def ignition_cutoff(nl, n):
    """Multiply a monostable term by the ramp chi(n u); result is ignition
    class with threshold 1/n and coincides with the original above 2/n."""
    if nl.class_tag != MONOSTABLE:
        raise WrongClass("cutoff applies to monostable terms")
    if n < 1:
        raise ClassViolation("cutoff index must be a positive integer")
    return replace(nl, cutoff_index=int(n))


def sup_norm(nl, lo=0.0, hi=1.0, samples=10001):
    """Dense-sampling sup of |f| over [lo, hi]."""
    grid = np.linspace(lo, hi, samples)
    return float(np.abs(evaluate_array(nl, grid)[0]).max())


def deriv_sup_norm(nl, lo=0.0, hi=1.0, samples=10001):
    grid = np.linspace(lo, hi, samples)
    return float(np.abs(evaluate_array(nl, grid)[1]).max())


def mirror(nl):
    """The reflected bistable term  u -> -f(1 - u).

    For the cubic family this is again a cubic with threshold 1 - theta;
    other kinds are wrapped as custom callables.
    """
    if isinstance(nl.kind, CubicBistableKind) and nl.linear_shift == 0.0 \
            and nl.cutoff_index is None:
        return cubic_bistable(1.0 - nl.kind.theta)

    def f(s):
        return -evaluate_array(nl, 1.0 - np.asarray(s, dtype=float))[0]

    def fp(s):
        return evaluate_array(nl, 1.0 - np.asarray(s, dtype=float))[1]

    return custom(f, fp, nl.class_tag)
