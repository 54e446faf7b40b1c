"""Generic time marching with output sampling, step-schedule replay and abort checks."""

from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationAbort
from .timing import NULL_TIMER


@dataclass
class Trajectory:
    """Sampled solution history.

    ``states[:, k]`` is the state at ``times[k]``, reached after ``out_steps[k]``
    time steps.  ``dts`` is the full step schedule, so another model can
    replay exactly the same time levels (``levels[k]`` is the time after
    ``k`` steps).
    """

    times: np.ndarray
    states: np.ndarray
    dts: np.ndarray
    out_steps: np.ndarray
    levels: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[:, -1]

    @property
    def n_steps(self):
        return len(self.dts)


def output_times(t_end, n_out):
    """``n_out`` uniformly spaced sampling times including 0 and ``t_end``."""
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    if t_end == 0:
        return np.array([0.0])
    if n_out <= 1:
        return np.array([float(t_end)])
    return np.linspace(0.0, t_end, int(n_out))


def march(u0, advance, t_end, n_out=2, dt_fn=None, replay=None, timer=NULL_TIMER, check=None):
    """Advance ``u0`` to ``t_end`` and sample it.

    Parameters
    ----------
    advance : callable ``(u, t, dt) -> u``
    dt_fn : callable ``u -> dt``, used when no schedule is replayed.  Steps
        are shortened so every sampling time is hit exactly.
    replay : :class:`Trajectory` whose step schedule and sampling steps are
        reused; ``t_end``, ``n_out`` and ``dt_fn`` are then ignored.
    check : optional callable ``(u, step, t)`` raising :class:`SimulationAbort`.
    """
    u = np.array(u0, dtype=float, copy=True)
    t = 0.0
    states, times, taken, steps_out, levels = [], [], [], [], [0.0]
    timer.restart()

    def record(step):
        states.append(u.copy())
        times.append(t)
        steps_out.append(step)

    def guard(step):
        if not np.all(np.isfinite(u)):
            raise SimulationAbort("non-finite values in the state", step=step, t=t)
        if check is not None:
            check(u, step, t)

    if replay is not None:
        wanted = set(int(k) for k in replay.out_steps)
        if 0 in wanted:
            record(0)
        for k, dt in enumerate(replay.dts, start=1):
            u = advance(u, t, dt)
            t = replay.levels[k]
            taken.append(dt)
            levels.append(t)
            guard(k)
            if k in wanted:
                record(k)
            timer.lap("other")
    else:
        targets = output_times(t_end, n_out)
        tol = 1e-12 * max(1.0, t_end)
        i = 0
        if targets[0] <= tol:
            record(0)
            i = 1
        k = 0
        while i < len(targets):
            dt = dt_fn(u)
            if not np.isfinite(dt) or dt <= 0:
                raise SimulationAbort("invalid time step", step=k, t=t)
            hit = t + dt >= targets[i] - tol
            if hit:
                dt = targets[i] - t
            u = advance(u, t, dt)
            k += 1
            t = targets[i] if hit else t + dt
            taken.append(dt)
            levels.append(t)
            guard(k)
            if hit:
                record(k)
                i += 1
            timer.lap("other")
    return Trajectory(np.array(times), np.array(states).T, np.array(taken),
                      np.array(steps_out, dtype=int), np.array(levels), timer.as_dict())
