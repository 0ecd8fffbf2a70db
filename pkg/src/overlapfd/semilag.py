"""Trajectory reconstruction and departure-point value recovery.

Arrival nodes are traced backward through the velocity field with RK3, one
step per time-level gap, and solution values are interpolated at the
departure points from each history level's own interpolation bundle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def rk3_step(f, x: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One step of Kutta's third-order method, vectorized over rows of x."""
    k1 = f(x, t)
    k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(x - dt * k1 + 2.0 * dt * k2, t + dt)
    return x + (dt / 6.0) * (k1 + 4.0 * k2 + k3)


def back_trace(arrivals: np.ndarray, velocity, t_arrive: float, t_target: float,
               dt_sub: float) -> np.ndarray:
    """Departure coordinates at ``t_target`` for particles arriving at
    ``arrivals`` at ``t_arrive``.

    Integrates dp/dt = u(p, t) backward with RK3 steps of size ``dt_sub``.
    """
    if t_target >= t_arrive:
        raise ValueError("t_target must precede t_arrive")
    nsteps = int(round((t_arrive - t_target) / dt_sub))
    p = np.array(arrivals, dtype=np.float64, copy=True)
    t = t_arrive
    for _ in range(nsteps):
        p = rk3_step(velocity, p, t, -dt_sub)
        t -= dt_sub
    return p


@dataclass
class DepartureSet:
    """Departure coordinates and reconstructed values per history level."""

    arrival_index: np.ndarray
    coords: list      # departure coordinates, newest history level first
    values: list      # reconstructed values, same order


def reconstruct(history, departures) -> DepartureSet:
    """Interpolate each history level's nodal values to its departure points.

    ``history`` is a sequence of ``(bundle, nodal_values)`` pairs, newest
    first; ``departures`` the matching coordinate arrays.
    """
    from .operators import interp_eval

    if len(history) != len(departures):
        raise ValueError("history and departure level counts differ")
    values = [interp_eval(bundle, vals, dep)
              for (bundle, vals), dep in zip(history, departures)]
    n = departures[0].shape[0] if departures else 0
    return DepartureSet(arrival_index=np.arange(n), coords=list(departures),
                        values=values)
