"""Explicit evolution of the reaction-dispersion dynamics, level-set
tracking, and classification of the spreading regime.

The time stepper is Heun's method under a conservative stability gate tied
to the assembled operator's on-site weight; together with the monotone
spatial scheme this preserves comparison between ordered states, which the
audit helpers rely on. States are never clipped: leaving [0, 1] beyond
roundoff is reported as an error, not hidden.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nonlinearity as nl_mod
from . import operators
from .errors import (BadParameters, LevelNotAttained, OvershootDetected,
                     StabilityViolation, TooFewSamples, WindowExceeded)
from .operators import Profile

FRONT = "FRONT"
ALGEBRAIC = "ALGEBRAIC"
EXPONENTIAL = "EXPONENTIAL"
UNDECIDED = "UNDECIDED"

OVERSHOOT_TOL = 1e-9
WINDOW_FRACTION = 0.7


@dataclass
class Trajectory:
    times: np.ndarray         # every step (level tracking resolution)
    positions: np.ndarray     # level-set abscissa per step
    level: float
    sample_times: np.ndarray  # thinned snapshot instants
    states: list              # Profile snapshots at `sample_times`
    dt: float
    mass_change: float        # grid mass difference between ends
    reaction_mass: float      # time-accumulated reaction contribution


def stable_step(m, grid, nl):
    """Largest admitted explicit step for this measure/grid/reaction."""
    asm = operators.get_assembly(m, grid, 0.0)
    return 0.4 / (asm.total_seen_mass() + nl_mod.deriv_sup_norm(nl) + 1e-300)


def level_position(values, grid, level):
    """Rightmost downward crossing of the level, linearly interpolated."""
    u = np.asarray(values, dtype=float)
    above = u[:-1] >= level
    below = u[1:] < level
    idx = np.nonzero(above & below)[0]
    if idx.size == 0:
        raise LevelNotAttained(f"no crossing of level {level}")
    i = int(idx[-1])
    x = grid.nodes
    frac = (u[i] - level) / (u[i] - u[i + 1])
    return float(x[i] + frac * grid.spacing)


def evolve(u0, m, nl, horizon, dt=None, level=0.5, sample_stride=None,
           track_level=True, window_guard=True):
    """March the semilinear dynamics to the horizon with Heun steps.

    Records the level position at every step (when ``track_level``) and a
    thinned set of state snapshots. Aborts with WindowExceeded when the
    tracked level leaves the trusted fraction of the window instead of
    silently saturating against the boundary.
    """
    grid = u0.grid
    gate = stable_step(m, grid, nl)
    if dt is None:
        dt = gate
    elif dt > gate * (1.0 + 1e-12):
        raise StabilityViolation(f"dt={dt} exceeds the stability gate {gate}")
    steps = max(1, int(math.ceil(horizon / dt)))
    dt = horizon / steps
    if sample_stride is None:
        sample_stride = max(1, steps // 400)
    asm = operators.get_assembly(m, grid, 0.0)
    left, right = u0.left_state, u0.right_state
    u = u0.values.copy()
    h = grid.spacing
    guard = WINDOW_FRACTION * grid.half_length

    def rhs(vals):
        return asm.apply_values(vals, left, right) \
            + nl_mod.evaluate_array(nl, vals)[0]

    sample_times = [0.0]
    states = [Profile(grid, u.copy(), left, right)]
    all_times = [0.0]
    all_positions = [level_position(u, grid, level)] if track_level else []
    mass0 = float(np.sum(u))
    reaction_acc = 0.0
    for k in range(1, steps + 1):
        f1 = rhs(u)
        reaction_acc += 0.5 * dt * float(
            np.sum(nl_mod.evaluate_array(nl, u)[0]))
        pred = u + dt * f1
        reaction_acc += 0.5 * dt * float(
            np.sum(nl_mod.evaluate_array(nl, pred)[0]))
        f2 = rhs(pred)
        u = u + 0.5 * dt * (f1 + f2)
        lo, hi = float(np.min(u)), float(np.max(u))
        if lo < -OVERSHOOT_TOL or hi > 1.0 + OVERSHOOT_TOL:
            raise OvershootDetected(
                f"state left [0,1] by {max(-lo, hi - 1.0):.2e} at t={k * dt}")
        t = k * dt
        if track_level:
            pos = level_position(u, grid, level)
            all_times.append(t)
            all_positions.append(pos)
            if window_guard and pos > guard:
                raise WindowExceeded(
                    f"level {level} reached {pos:.2f} beyond "
                    f"{WINDOW_FRACTION:.0%} of the window at t={t:.3f}")
        if k % sample_stride == 0 or k == steps:
            sample_times.append(t)
            states.append(Profile(grid, u.copy(), left, right))
    mass_change = h * (float(np.sum(u)) - mass0)
    if not track_level:
        all_times = sample_times
        all_positions = [math.nan] * len(sample_times)
    return Trajectory(times=np.asarray(all_times),
                      positions=np.asarray(all_positions), level=level,
                      sample_times=np.asarray(sample_times), states=states,
                      dt=dt, mass_change=mass_change,
                      reaction_mass=h * reaction_acc)


def _linear_fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


@dataclass(frozen=True)
class RegimeVerdict:
    tag: str
    value: float
    r_squared: float


def classify_spreading(tr, burn_in=0.3):
    """Fit the tracked level positions and decide the propagation regime.

    FRONT requires a log-log slope inside [0.9, 1.1] together with a linear
    fit of quality at least 0.99; otherwise a clean exponential fit wins,
    then a clean power law reporting its exponent.
    """
    n = tr.times.size
    start = int(math.ceil(burn_in * n))
    t = tr.times[start:]
    x = tr.positions[start:]
    keep = (t > 0.0) & (x > 0.0)
    t, x = t[keep], x[keep]
    if t.size < 20:
        raise TooFewSamples(f"only {t.size} usable samples after burn-in")
    speed, r2_lin = _linear_fit(t, x)
    p_exp, r2_loglog = _linear_fit(np.log(t), np.log(x))
    rate, r2_exp = _linear_fit(t, np.log(x))
    if 0.9 <= p_exp <= 1.1 and r2_lin >= 0.99:
        return RegimeVerdict(tag=FRONT, value=float(speed),
                             r_squared=float(r2_lin))
    if r2_exp >= 0.995 and r2_exp > r2_loglog:
        return RegimeVerdict(tag=EXPONENTIAL, value=float(rate),
                             r_squared=float(r2_exp))
    if r2_loglog >= 0.98:
        return RegimeVerdict(tag=ALGEBRAIC, value=float(p_exp),
                             r_squared=float(r2_loglog))
    return RegimeVerdict(tag=UNDECIDED, value=math.nan,
                         r_squared=float(max(r2_lin, r2_loglog, r2_exp)))


@dataclass(frozen=True)
class RegimePrediction:
    tag: str
    exponent: Optional[float]


def regime_prediction(s, beta):
    """Predicted propagation regime for a power-law kernel with exponent s
    and a monostable reaction with zero-state degeneracy beta.

    Fronts exist when (2s-1)(beta-1) >= 1; otherwise the level sets
    accelerate algebraically with exponent beta / (2 s (beta - 1)), except
    in the nondegenerate case beta = 1 where the growth is exponential.
    """
    if not (0.0 < s < 1.0) or beta < 1.0:
        raise BadParameters("need s in (0,1) and beta >= 1")
    if beta == 1.0:
        return RegimePrediction(tag=EXPONENTIAL, exponent=None)
    if (2.0 * s - 1.0) * (beta - 1.0) >= 1.0:
        return RegimePrediction(tag=FRONT, exponent=None)
    return RegimePrediction(tag=ALGEBRAIC,
                            exponent=beta / (2.0 * s * (beta - 1.0)))


@dataclass(frozen=True)
class ComparisonAudit:
    ordered: bool
    worst_violation: float
    first_violation_time: Optional[float]


def parabolic_comparison_audit(sub, super_, tol=1e-9):
    """Check that an initially ordered pair of trajectories stays ordered."""
    if len(sub.states) != len(super_.states):
        raise ValueError("trajectories carry different snapshot counts")
    if np.max(sub.states[0].values - super_.states[0].values) > tol:
        raise ValueError("initial data are not ordered")
    worst = -math.inf
    first_time = None
    for t, lo_state, hi_state in zip(sub.sample_times, sub.states,
                                     super_.states):
        gap = float(np.max(lo_state.values - hi_state.values))
        if gap > worst:
            worst = gap
        if gap > tol and first_time is None:
            first_time = float(t)
    return ComparisonAudit(ordered=worst <= tol, worst_violation=worst,
                           first_violation_time=first_time)
