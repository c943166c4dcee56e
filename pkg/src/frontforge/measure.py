"""Symmetric diffuse jump measures, their truncations, and moment functionals.

A descriptor represents a symmetric nonnegative measure on R \\ {0} given by
an even density, subject to the admissibility condition
``integral of min(1, z^2) d(mu) < infinity``. Two modifiers are supported:
``epsilon`` removes jumps smaller than epsilon (small-jump truncation) and
``restrict_radius`` removes jumps larger than the given radius (support
restriction). Only density-type measures are constructible, so diffuseness
holds structurally.

Divergent moments are reported as ``DIVERGENT`` (== ``float('inf')``); callers
branch with ``math.isinf`` rather than catching an exception.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import quadrature
from .errors import InvalidMeasure, NonPositiveRadius

DIVERGENT = math.inf


@dataclass(frozen=True)
class FractionalKind:
    """Power-law kernel amplitude * |z|^(-1-2s), optionally cut at outer_cut."""

    s: float
    amplitude: float = 1.0
    outer_cut: float = math.inf


@dataclass(frozen=True)
class DensityKind:
    """Even density z -> J(|z|), vanishing beyond support_radius."""

    density: Callable
    support_radius: float = math.inf


@dataclass(frozen=True)
class TabulatedKind:
    """Piecewise-linear even density through (nodes, values), zero beyond."""

    nodes: tuple
    values: tuple


@dataclass(frozen=True)
class MeasureDescriptor:
    kind: object
    epsilon: float = 0.0
    restrict_radius: float = math.inf

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidMeasure("epsilon must be >= 0")
        if self.restrict_radius <= 0:
            raise InvalidMeasure("restrict_radius must be positive")
        k = self.kind
        if isinstance(k, FractionalKind):
            if not 0.0 < k.s < 1.0:
                raise InvalidMeasure("fractional exponent must lie in (0, 1)")
            if k.amplitude <= 0 or k.outer_cut <= 0:
                raise InvalidMeasure("amplitude and outer_cut must be positive")
        elif isinstance(k, DensityKind):
            if k.support_radius <= 0:
                raise InvalidMeasure("support_radius must be positive")
            if self.epsilon == 0.0:
                _check_levy_condition(self)
        elif isinstance(k, TabulatedKind):
            nodes = np.asarray(k.nodes, dtype=float)
            vals = np.asarray(k.values, dtype=float)
            if nodes.ndim != 1 or nodes.shape != vals.shape or nodes.size < 2:
                raise InvalidMeasure("tabulated kind needs matching 1-d nodes/values")
            if np.any(np.diff(nodes) <= 0) or nodes[0] < 0:
                raise InvalidMeasure("tabulated nodes must be increasing and >= 0")
            if np.any(vals < 0):
                raise InvalidMeasure("tabulated density must be nonnegative")
        else:
            raise InvalidMeasure(f"unknown measure kind {type(k).__name__}")

    @property
    def support_radius(self):
        """Effective one-sided support radius after all modifiers."""
        k = self.kind
        if isinstance(k, FractionalKind):
            base = k.outer_cut
        elif isinstance(k, DensityKind):
            base = k.support_radius
        else:
            base = float(k.nodes[-1])
        return min(base, self.restrict_radius)

    @property
    def has_bounded_support(self):
        return math.isfinite(self.support_radius)


def fractional(s, amplitude=1.0, outer_cut=math.inf, epsilon=0.0,
               restrict_radius=math.inf):
    return MeasureDescriptor(FractionalKind(s, amplitude, outer_cut),
                             epsilon, restrict_radius)


def density(J, support_radius=math.inf, epsilon=0.0, restrict_radius=math.inf):
    return MeasureDescriptor(DensityKind(J, support_radius),
                             epsilon, restrict_radius)


def tabulated(nodes, values, epsilon=0.0, restrict_radius=math.inf):
    return MeasureDescriptor(TabulatedKind(tuple(nodes), tuple(values)),
                             epsilon, restrict_radius)


def _unit_density(z):
    return np.ones_like(np.asarray(z, dtype=float))


def uniform(radius=1.0, epsilon=0.0):
    """Density identically 1 on [-radius, radius]."""
    return density(_unit_density, support_radius=radius, epsilon=epsilon)


def _tabulated_density(kind):
    nodes = np.asarray(kind.nodes, dtype=float)
    vals = np.asarray(kind.values, dtype=float)

    def J(z):
        return np.interp(np.asarray(z, dtype=float), nodes, vals,
                         left=vals[0], right=0.0)

    return J


def _integral_to_zero(f, b, rel_tol=quadrature.REL_TOL,
                      abs_floor=quadrature.ABS_FLOOR, max_halvings=400):
    """Integrate f over (0, b] with geometric panels shrinking toward 0."""
    hi = b
    total = 0.0
    prev = math.inf
    stall = 0
    for _ in range(max_halvings):
        lo = 0.5 * hi
        piece = quadrature.integrate(f, lo, hi, rel_tol, abs_floor)
        total += piece
        if abs(piece) <= max(abs_floor, 0.3 * rel_tol * abs(total)):
            return total
        if abs(piece) >= 0.995 * abs(prev):
            stall += 1
            if stall >= 8:
                return math.inf
        else:
            stall = 0
        prev = piece
        hi = lo
    return math.inf


def _half_moment(m, q, a, b):
    """One-sided weighted mass: integral of z^q J(z) dz over the effective
    part of (a, b], honoring truncation and restriction."""
    lo = max(a, m.epsilon, 0.0)
    hi = min(b, m.support_radius)
    if hi <= lo:
        return 0.0
    k = m.kind
    if isinstance(k, FractionalKind):
        p = q - 2.0 * k.s
        A = k.amplitude
        if lo == 0.0:
            if p <= 0:
                return math.inf
            return A * hi ** p / p
        if math.isinf(hi):
            if p >= 0:
                return math.inf
            return -A * lo ** p / p
        if p == 0.0:
            return A * math.log(hi / lo)
        return A * (hi ** p - lo ** p) / p
    J = k.density if isinstance(k, DensityKind) else _tabulated_density(k)

    def f(z):
        return z ** q * J(z)

    if lo == 0.0:
        if math.isinf(hi):
            return _integral_to_zero(f, 1.0) + quadrature.integrate_to_infinity(f, 1.0)
        split = min(1.0, hi)
        out = _integral_to_zero(f, split)
        if split < hi:
            out += quadrature.integrate(f, split, hi)
        return out
    if math.isinf(hi):
        return quadrature.integrate_to_infinity(f, lo)
    return quadrature.integrate(f, lo, hi)


def _check_levy_condition(m):
    near = _half_moment(m, 2, 0.0, min(1.0, m.support_radius))
    far = _half_moment(m, 0, 1.0, math.inf)
    if not (math.isfinite(near) and math.isfinite(far)):
        raise InvalidMeasure(
            "integral of min(1, z^2) against the measure must be finite")


def mass_tail(m, r):
    """Two-sided mass of {|z| >= r} under the current modifiers."""
    if r <= 0:
        raise NonPositiveRadius("tail radius must be positive")
    return 2.0 * _half_moment(m, 0, r, math.inf)


def total_mass(m):
    """Two-sided total mass; DIVERGENT for untruncated singular kernels."""
    return 2.0 * _half_moment(m, 0, 0.0, math.inf)


def truncate_small(m, eps):
    """Remove jumps smaller than eps. Stacking truncations keeps the larger."""
    if eps <= 0:
        raise NonPositiveRadius("truncation radius must be positive")
    return replace(m, epsilon=max(eps, m.epsilon))


def restrict(m, r):
    """Remove jumps larger than r. Stacking restrictions keeps the smaller."""
    if r <= 0:
        raise NonPositiveRadius("restriction radius must be positive")
    return replace(m, restrict_radius=min(r, m.restrict_radius))


def window_second_moment(m, delta):
    """Two-sided second moment over {|z| <= delta} (no 1/2 factor)."""
    if delta <= 0:
        raise NonPositiveRadius("window radius must be positive")
    return 2.0 * _half_moment(m, 2, 0.0, delta)


@dataclass(frozen=True)
class MomentSummary:
    m_levy: float   # integral of min(1, z^2)
    m_first: float  # integral of min(|z|, z^2); DIVERGENT when infinite


def moments(m):
    inner = 2.0 * _half_moment(m, 2, 0.0, 1.0)
    m_levy = inner + mass_tail(m, 1.0)
    m_first = inner + 2.0 * _half_moment(m, 1, 1.0, math.inf)
    return MomentSummary(m_levy=m_levy, m_first=m_first)


def cell_moments(m, grid_spacing, half_width_cells):
    """Per-cell moments of orders 0, 1, 2 on cells [k*h, (k+1)*h].

    Returns ``(ks, table)`` where ``ks`` runs from -half_width_cells to
    half_width_cells - 1 and ``table[j]`` holds the signed moments
    (integral of dmu, z dmu, z^2 dmu) over the j-th cell. Negative-k cells
    mirror their positive counterparts with the order-1 moment negated.
    """
    if grid_spacing <= 0:
        raise NonPositiveRadius("grid spacing must be positive")
    h = float(grid_spacing)
    K = int(half_width_cells)
    pos = np.zeros((K, 3))
    for k in range(K):
        a, b = k * h, (k + 1) * h
        pos[k, 0] = _half_moment(m, 0, a, b)
        pos[k, 1] = _half_moment(m, 1, a, b)
        pos[k, 2] = _half_moment(m, 2, a, b)
    ks = np.arange(-K, K)
    table = np.zeros((2 * K, 3))
    table[K:] = pos
    # cell -k-1 = [-(k+1)h, -kh] mirrors cell k
    table[:K] = pos[::-1]
    table[:K, 1] *= -1.0
    return ks, table
