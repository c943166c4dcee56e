"""Newton solver for traveling fronts, with small-jump continuation and the
cutoff ladder for monostable minimal speeds.

The discrete front system couples the N node values with the speed c through
a bordered Newton iteration: N rows of D[u] + c u' + f(u) = 0 (advection by
first-order upwind differences oriented by the sign of c, which preserves
the monotone structure of the assembled operator) plus one phase row
u(0) = level that removes translation invariance. Monotonicity of the
solution is checked afterwards, never enforced, so a nonmonotone result
signals genuine discretization trouble instead of being masked.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import measure as measure_mod
from . import nonlinearity as nl_mod
from . import operators
from .errors import NotMonotoneLadder, StageFailed, WrongClass
from .operators import Grid, Profile

NONEXISTENCE_WARNING = "theory predicts nonexistence"


@dataclass
class FrontSolution:
    speed: float
    profile: Profile
    residual_norm: float
    iterations: int
    converged: bool
    monotone: bool
    epsilon: float
    phase_level: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ContinuationReport:
    schedule: list
    solutions: list
    speeds: list
    converged: bool          # final two speeds within the Cauchy tolerance
    extrapolated_speed: float
    warning: Optional[str] = None

    @property
    def gaps(self):
        return [abs(b - a) for a, b in zip(self.speeds, self.speeds[1:])]


CAUCHY_TOL = 1e-6


def initial_guess(grid, level, width=None, plateau=1.0):
    """Monotone logistic ramp hitting `level` at x = 0.

    The decay rate is 1.5/width so that ten widths of grid leave the ramp
    within 1e-6 of its plateaus for mid-range levels.
    """
    if not 0.0 < level < plateau:
        raise ValueError("level must lie strictly between 0 and the plateau")
    if width is None:
        width = grid.half_length / 10.0
    rate = 1.5 / width
    x = grid.nodes
    ratio = plateau / level - 1.0
    vals = plateau / (1.0 + ratio * np.exp(rate * x))
    return Profile(grid, vals, plateau, 0.0)


def _upwind_difference(u, left_state, right_state, h, c):
    """One-sided first difference oriented so the advection term is
    nonnegative at interior minima (comparison-preserving upwinding)."""
    du = np.empty_like(u)
    if c >= 0.0:
        du[:-1] = (u[1:] - u[:-1]) / h
        du[-1] = (right_state - u[-1]) / h
    else:
        du[1:] = (u[1:] - u[:-1]) / h
        du[0] = (u[0] - left_state) / h
    return du


def _default_phase(nl):
    tag = nl.class_tag
    if tag in (nl_mod.BISTABLE, nl_mod.IGNITION):
        return nl.theta
    return 0.5


def residual(c, p, m, nl, phase_level, delta=0.0):
    """Discrete front residual: N equation rows plus the phase row."""
    asm = operators.get_assembly(m, p.grid, delta)
    A, w_left, w_right = asm.dense()
    h = p.grid.spacing
    u = p.values
    r = np.empty(p.grid.node_count + 1)
    r[:-1] = A @ u + w_left * p.left_state + w_right * p.right_state
    r[:-1] += c * _upwind_difference(u, p.left_state, p.right_state, h, c)
    r[:-1] += nl_mod.evaluate_array(nl, u)[0]
    r[-1] = u[p.grid.center_index] - phase_level
    return r


def _relax(asm, nl, u, left_state, right_state, horizon):
    """Short explicit evolution of u_t = D[u] + f(u): cheap globalization
    that pulls a cold-start ramp into the Newton basin of the front."""
    dt = 0.4 / (asm.total_seen_mass() + nl_mod.deriv_sup_norm(nl) + 1e-12)
    steps = max(1, int(round(horizon / dt)))
    for _ in range(steps):
        u = u + dt * (asm.apply_values(u, left_state, right_state)
                      + nl_mod.evaluate_array(nl, u)[0])
    return u


def _recenter(u, left_state, right_state, level, center):
    """Integer-node shift putting the rightmost level crossing at x = 0."""
    above = np.nonzero(u >= level)[0]
    if above.size == 0 or above[-1] == u.size - 1:
        return u
    shift = int(above[-1]) - center
    if shift == 0:
        return u
    out = np.empty_like(u)
    if shift > 0:
        out[:-shift] = u[shift:]
        out[-shift:] = right_state
    else:
        out[-shift:] = u[:shift]
        out[:-shift] = left_state
    return out


def newton_solve(m, nl, grid, phase_level=None, tol=1e-10, max_iter=50,
                 damping=True, left_state=1.0, right_state=0.0,
                 initial=None, initial_speed=0.0, delta=0.0,
                 guess_width=None):
    """Solve the traveling-front system for (c, u) with a phase condition.

    Cold starts outside the Newton basin are rescued by a short explicit
    relaxation of the parabolic dynamics followed by recentering; the Newton
    iteration itself is damped by residual backtracking. Returns a
    FrontSolution whose ``converged`` and ``monotone`` flags report the
    outcome; a failed solve carries the best iterate rather than raising.
    """
    if phase_level is None:
        phase_level = _default_phase(nl)
        if phase_level is None:
            raise WrongClass("no default phase level for this reaction class")
    asm = operators.get_assembly(m, grid, delta)

    def relaxed(values):
        out = _relax(asm, nl, values, left_state, right_state, horizon=12.0)
        return _recenter(out, left_state, right_state, phase_level,
                         grid.center_index)

    def narrow_ramp():
        return initial_guess(grid, phase_level,
                             width=max(10.0 * grid.spacing,
                                       grid.half_length / 40.0),
                             plateau=left_state).values

    if initial is None:
        ramp = initial_guess(grid, phase_level, width=guess_width,
                             plateau=left_state).values
        attempts = [lambda: relaxed(ramp), lambda: relaxed(narrow_ramp()),
                    lambda: ramp]
    else:
        # warm starts go straight to Newton; relaxation is the fallback
        attempts = [lambda: initial.values.copy(),
                    lambda: relaxed(initial.values.copy()),
                    lambda: relaxed(narrow_ramp())]
    best_sol = None
    for make_start in attempts:
        sol = _newton_core(asm, nl, grid, make_start(), initial_speed,
                           phase_level, tol, max_iter, damping, left_state,
                           right_state, max(m.epsilon, delta))
        if best_sol is None or sol.residual_norm < best_sol.residual_norm:
            best_sol = sol
        if sol.converged:
            return sol
    return best_sol


def _newton_core(asm, nl, grid, start_values, initial_speed, phase_level,
                 tol, max_iter, damping, left_state, right_state,
                 effective_epsilon):
    A, w_left, w_right = asm.dense()
    N = grid.node_count
    h = grid.spacing
    center = grid.center_index
    u = start_values.copy()
    c = float(initial_speed)
    b = w_left * left_state + w_right * right_state

    def full_residual(uu, cc):
        r = np.empty(N + 1)
        du = _upwind_difference(uu, left_state, right_state, h, cc)
        r[:-1] = A @ uu + b + cc * du + nl_mod.evaluate_array(nl, uu)[0]
        r[-1] = uu[center] - phase_level
        return r, du

    r, du = full_residual(u, c)
    res_norm = float(np.max(np.abs(r)))
    best = (u.copy(), c, res_norm)
    J = np.zeros((N + 1, N + 1))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if res_norm <= tol:
            break
        fprime = nl_mod.evaluate_array(nl, u)[1]
        J[:N, :N] = A
        idx = np.arange(N)
        J[idx, idx] += fprime
        if c >= 0.0:
            J[idx, idx] += -c / h
            J[idx[:-1], idx[:-1] + 1] += c / h
        else:
            J[idx, idx] += c / h
            J[idx[1:], idx[1:] - 1] += -c / h
        J[:N, N] = du
        J[N, :] = 0.0
        J[N, center] = 1.0
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        for _ in range(20 if damping else 1):
            u_new = u + scale * step[:N]
            c_new = c + scale * step[N]
            r_new, du_new = full_residual(u_new, c_new)
            norm_new = float(np.max(np.abs(r_new)))
            if norm_new < res_norm or not damping:
                break
            scale *= 0.5
        u, c, r, du, res_norm = u_new, c_new, r_new, du_new, norm_new
        if res_norm < best[2]:
            best = (u.copy(), c, res_norm)
        if not math.isfinite(res_norm):
            break
    u, c, res_norm = best
    profile = Profile(grid, u, left_state, right_state)
    return FrontSolution(
        speed=c,
        profile=profile,
        residual_norm=res_norm,
        iterations=iterations,
        converged=res_norm <= tol,
        monotone=profile.is_monotone_decreasing(1e-9),
        epsilon=effective_epsilon,
        phase_level=phase_level,
    )


def default_floor(grid):
    """Truncation radii below grid resolution are numerically invisible."""
    return max(0.5 * grid.spacing, 1e-4 * grid.half_length)


def _nonexistence_warning(m, nl):
    tag = nl.class_tag
    if tag == nl_mod.IGNITION and math.isinf(measure_mod.moments(m).m_first):
        return NONEXISTENCE_WARNING
    if tag == nl_mod.MONOSTABLE and isinstance(m.kind, measure_mod.FractionalKind):
        beta = nl.kind.beta if isinstance(nl.kind, nl_mod.AlleeMonostableKind) \
            else 1.0
        if (2.0 * m.kind.s - 1.0) * (beta - 1.0) < 1.0:
            return NONEXISTENCE_WARNING
    return None


def continue_in_epsilon(m, nl, grid, eps0=0.4, factor=0.5, floor=None,
                        phase_level=None, tol=1e-10, max_iter=50):
    """Drive the small-jump truncation toward the grid floor, warm-starting
    each stage from the last profile. The report's ``converged`` flag is set
    when the final two speeds agree to 1e-6."""
    if nl.class_tag not in (nl_mod.BISTABLE, nl_mod.IGNITION):
        raise WrongClass("continuation runs on bistable or ignition terms")
    if floor is None:
        floor = default_floor(grid)
    if not 0.0 < factor < 1.0:
        raise ValueError("factor must lie in (0, 1)")
    schedule = [eps0]
    while schedule[-1] > floor:
        schedule.append(max(floor, schedule[-1] * factor))
    report = ContinuationReport(schedule=schedule, solutions=[], speeds=[],
                                converged=False, extrapolated_speed=math.nan,
                                warning=_nonexistence_warning(m, nl))
    prev = None
    for k, eps in enumerate(schedule):
        m_eps = measure_mod.truncate_small(m, eps)
        sol = newton_solve(
            m_eps, nl, grid, phase_level=phase_level, tol=tol,
            max_iter=max_iter,
            initial=prev.profile if prev else None,
            initial_speed=prev.speed if prev else 0.0)
        if not sol.converged:
            report.extrapolated_speed = report.speeds[-1] if report.speeds \
                else math.nan
            raise StageFailed(k, report)
        report.solutions.append(sol)
        report.speeds.append(sol.speed)
        prev = sol
    report.converged = len(report.speeds) >= 2 and \
        abs(report.speeds[-1] - report.speeds[-2]) <= CAUCHY_TOL
    report.extrapolated_speed = _aitken(report.speeds)
    return report


def _aitken(seq):
    if len(seq) >= 3:
        c1, c2, c3 = seq[-3], seq[-2], seq[-1]
        denom = (c3 - c2) - (c2 - c1)
        if denom != 0.0 and abs(denom) > 1e-14:
            accel = c3 - (c3 - c2) ** 2 / denom
            # only trust the acceleration when it extrapolates sanely
            if math.isfinite(accel) and abs(accel - c3) <= abs(c3 - c2):
                return accel
    return seq[-1] if seq else math.nan


def _log_law_limit(ns, speeds):
    """Limit of a cutoff ladder with pulled-front asymptotics.

    Pulled fronts approach their minimal speed like c_n = c - A/(ln n + b)^2
    (the classical logarithmic cutoff correction), so a geometric
    accelerator badly underestimates the limit. Fits the three-parameter
    law through the last three ladder points; falls back to Aitken when the
    data does not support the model.
    """
    if len(ns) < 3:
        return _aitken(list(speeds))
    x1, x2, x3 = (math.log(n) for n in ns[-3:])
    c1, c2, c3 = speeds[-3:]
    g1, g2 = c2 - c1, c3 - c2
    if not g1 > g2 > 0.0:
        return _aitken(list(speeds))
    target = g1 / g2

    def gap_ratio(b):
        d1 = 1.0 / (x1 + b) ** 2 - 1.0 / (x2 + b) ** 2
        d2 = 1.0 / (x2 + b) ** 2 - 1.0 / (x3 + b) ** 2
        return d1 / d2

    lo, hi = -x1 + 1e-6, 200.0
    if not (gap_ratio(lo) - target) * (gap_ratio(hi) - target) < 0.0:
        return _aitken(list(speeds))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (gap_ratio(mid) - target) * (gap_ratio(lo) - target) <= 0.0:
            hi = mid
        else:
            lo = mid
    b = 0.5 * (lo + hi)
    denom = 1.0 / (x2 + b) ** 2 - 1.0 / (x3 + b) ** 2
    A = g2 / denom
    limit = c3 + A / (x3 + b) ** 2
    if not math.isfinite(limit) or limit < c3:
        return _aitken(list(speeds))
    return limit


@dataclass
class Barrier:
    """Explicit supersolution data for the monostable speed bound."""

    kappa: float
    fn: object           # callable x -> w(x), positive, >= 1 far left
    derivative: object   # callable x -> w'(x)
    left_plateau: float = None   # value approached as x -> -infinity


def audit_barrier(m, nl, grid, barrier, z_cap=1e5, near_radius=1e-3):
    """Largest value of D[w] + kappa w' + f(w) over the grid nodes.

    The jump integral is evaluated on the true barrier function (a grid
    profile would freeze the barrier's decay beyond the last node and
    overstate D near the edge). Jumps below ``near_radius`` enter through
    the second-moment series term z^2 w''(x) / 2 per side; the rest uses
    graded Gauss-Legendre panels shared across nodes. Jumps beyond
    ``z_cap`` are bounded conservatively using the left plateau and the
    barrier value at distance ``z_cap``, so the returned margin never
    understates the left-hand side. A negative margin certifies the
    barrier inequality.
    """
    from .quadrature import _GL_NODES, _GL_WEIGHTS

    w = barrier.fn
    xs = grid.nodes
    plateau = barrier.left_plateau
    if plateau is None:
        plateau = float(w(np.asarray(-1e9)))
    lo = m.epsilon
    hi = min(z_cap, m.support_radius)
    out = np.zeros(len(xs))
    # series contribution of the unresolved near field
    if lo < near_radius:
        moment2 = measure_mod._half_moment(m, 2, lo, near_radius)
        if moment2 > 0.0:
            d = 1e-4
            wpp = (w(xs + d) + w(xs - d) - 2.0 * w(xs)) / d ** 2
            out += moment2 * wpp
        lo = near_radius
    # graded panels, four per octave, shared by every node
    edges = [lo]
    while edges[-1] < hi:
        edges.append(min(edges[-1] * 2.0 ** 0.25, hi))
    k = m.kind
    for a, b in zip(edges, edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        z = mid + half * _GL_NODES
        if isinstance(k, measure_mod.FractionalKind):
            dens = k.amplitude * z ** (-1.0 - 2.0 * k.s)
        elif isinstance(k, measure_mod.DensityKind):
            dens = np.asarray(k.density(z), dtype=float)
        else:
            dens = measure_mod._tabulated_density(k)(z)
        wq = half * _GL_WEIGHTS * dens
        pair = w(xs[:, None] + z) + w(xs[:, None] - z) - 2.0 * w(xs)[:, None]
        out += pair @ wq
    tail = measure_mod._half_moment(m, 0, max(hi, lo), math.inf)
    if tail > 0.0:
        r_cap = np.asarray(w(xs + hi), dtype=float)
        out += (plateau + r_cap - 2.0 * np.asarray(w(xs), dtype=float)) * tail
    wx_all = np.asarray(w(xs), dtype=float)
    expr = out + barrier.kappa * np.asarray(barrier.derivative(xs), dtype=float) \
        + nl_mod.evaluate_array(nl, wx_all)[0]
    return float(np.max(expr))


@dataclass
class MonostableLadder:
    cutoff_indices: list
    speeds: list
    c_star: float
    solutions: list
    warning: Optional[str] = None
    barrier_checked: bool = False
    barrier_margin: float = math.nan
    kappa: float = math.nan
    speed_bound_ok: bool = True


def monostable_speed(m, nl, grid, n_schedule=(4, 8, 16, 32), barrier=None,
                     tol=1e-10, monotone_tol=1e-8):
    """Minimal-speed estimate through the increasing cutoff ladder.

    Solves the ignition problem for each cutoff index with phase u(0) = 1/2,
    checks that the speeds are nondecreasing, and extrapolates the limit.
    A supplied barrier (kappa, w) is audited on the grid: the barrier
    inequality D[w] + kappa w' + f(w) < 0 must hold strictly, and then
    c_star <= kappa is verified.
    """
    if nl.class_tag != nl_mod.MONOSTABLE:
        raise WrongClass("the cutoff ladder applies to monostable terms")
    m_eff = m
    if isinstance(m.kind, measure_mod.FractionalKind) and m.kind.s >= 0.9:
        floor = default_floor(grid)
        if m.epsilon < floor:
            m_eff = measure_mod.truncate_small(m, floor)
    ladder = MonostableLadder(cutoff_indices=list(n_schedule), speeds=[],
                              c_star=math.nan, solutions=[],
                              warning=_nonexistence_warning(m, nl))
    prev = None
    for n in n_schedule:
        fn = nl_mod.ignition_cutoff(nl, n)
        sol = newton_solve(
            m_eff, fn, grid, phase_level=0.5, tol=tol,
            initial=prev.profile if prev else None,
            initial_speed=prev.speed if prev else 0.0)
        ladder.solutions.append(sol)
        ladder.speeds.append(sol.speed)
        prev = sol
    for (n1, c1), (n2, c2) in zip(zip(n_schedule, ladder.speeds),
                                  zip(n_schedule[1:], ladder.speeds[1:])):
        if c2 < c1 - monotone_tol:
            raise NotMonotoneLadder(n1, n2, c1, c2)
    # pulled fronts (positive slope at the unstable state) feel the cutoff
    # through the logarithmic law; pushed fronts converge geometrically
    if nl_mod.evaluate_array(nl, 0.0)[1] > 0.0:
        ladder.c_star = max(_log_law_limit(list(n_schedule), ladder.speeds),
                            ladder.speeds[-1])
    else:
        ladder.c_star = max(_aitken(ladder.speeds), ladder.speeds[-1])
    if barrier is not None:
        w_vals = np.asarray(barrier.fn(grid.nodes), dtype=float)
        if w_vals[0] < 1.0 or w_vals.min() <= 0.0 or w_vals.min() >= 1.0:
            raise ValueError(
                "barrier must be positive, >= 1 at the far left, dip below 1")
        margin = audit_barrier(m, nl, grid, barrier)
        ladder.barrier_checked = True
        ladder.barrier_margin = margin
        ladder.kappa = barrier.kappa
        ladder.speed_bound_ok = margin < 0.0 and ladder.c_star <= barrier.kappa
    return ladder
