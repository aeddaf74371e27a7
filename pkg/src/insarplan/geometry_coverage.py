"""Across-track geometry: positions, baselines, look angles, swath and coverage.

Functions accept plain floats or numpy arrays in the position fields, so the
same code scores a single formation or a whole PSO population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Raised for geometries outside the model's domain (nadir, grazing)."""


@dataclass(frozen=True)
class AcrossTrackPosition:
    x: float
    z: float

    def as_tuple(self) -> tuple[float, float]:
        return (float(self.x), float(self.z))


@dataclass(frozen=True)
class FormationState:
    q1: AcrossTrackPosition  # master
    q2: AcrossTrackPosition  # slave


@dataclass(frozen=True)
class BaselineDecomposition:
    b: float
    b_perp: float
    b_par: float
    alpha: float


def baseline_length(q1, q2):
    return np.hypot(np.subtract(q2.x, q1.x), np.subtract(q2.z, q1.z))


def baseline_components(f: FormationState, theta_1: float) -> BaselineDecomposition:
    """Split the baseline into components across and along the master line of sight.

    For coincident UAVs the tilt angle alpha is defined as 0.
    """
    dx = f.q2.x - f.q1.x
    dz = f.q2.z - f.q1.z
    b = math.hypot(dx, dz)
    alpha = math.atan2(dz, dx) if b > 0 else 0.0
    return BaselineDecomposition(
        b=b,
        b_perp=abs(b * math.cos(theta_1 - alpha)),
        b_par=b * math.sin(theta_1 - alpha),
        alpha=alpha,
    )


def perpendicular_baseline(q2, theta_1, x_t):
    """b_perp for a master sitting on the theta_1 line of sight through the target.

    Depends on q2 only: the distance from q2 to that line.
    """
    return np.abs((x_t - q2.x) * np.cos(theta_1) - q2.z * np.sin(theta_1))


def slant_range(q, x_t):
    return np.hypot(np.subtract(q.x, x_t), q.z)


def master_x_from_altitude(z1, x_t: float, theta_1: float):
    return x_t - z1 * np.tan(theta_1)


def master_position(z1: float, x_t: float, theta_1: float) -> AcrossTrackPosition:
    return AcrossTrackPosition(float(master_x_from_altitude(z1, x_t, theta_1)), float(z1))


def slave_look_angle(q2, x_t: float):
    """Look angle of a UAV that points its beam at the target line.

    Uses the magnitude convention arctan((x_t - x) / z), so a UAV behind the
    target (x <= x_t) has a non-negative look angle.
    """
    z = np.asarray(q2.z, dtype=float)
    if np.any(z == 0):
        raise GeometryError("look angle undefined at zero altitude")
    out = np.arctan(np.subtract(x_t, q2.x) / z)
    return float(out) if out.ndim == 0 else out


def swath_edges(q, theta, beamwidth: float):
    """(near, far) ground-range edges of one beam footprint."""
    half = beamwidth / 2
    hi = np.asarray(theta) + half
    if np.any(np.abs(hi) >= math.pi / 2) or np.any(np.abs(np.asarray(theta) - half) >= math.pi / 2):
        raise GeometryError("beam edge at or beyond the horizon")
    near = q.x + q.z * np.tan(np.asarray(theta) - half)
    far = q.x + q.z * np.tan(hi)
    return near, far


def single_swath(q, theta, beamwidth: float):
    near, far = swath_edges(q, theta, beamwidth)
    return far - near


def usable_swath(f: FormationState, theta_1: float, beamwidth: float, x_t: float):
    """Ground-range overlap of the master and slave footprints, clamped at zero."""
    theta_2 = slave_look_angle(f.q2, x_t)
    near1, far1 = swath_edges(f.q1, theta_1, beamwidth)
    near2, far2 = swath_edges(f.q2, theta_2, beamwidth)
    width = np.minimum(far1, far2) - np.maximum(near1, near2)
    out = np.maximum(width, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def along_track_positions(v, delta_t: float) -> np.ndarray:
    """y[0] = 0 and y[n+1] = y[n] + v[n] * delta_t."""
    v = np.asarray(v, dtype=float)
    y = np.empty_like(v)
    y[0] = 0.0
    np.cumsum(v[:-1] * delta_t, out=y[1:])
    return y


def travelled_distance(v, delta_t: float) -> float:
    """Along-track distance flown during the first N-1 slots."""
    return float(np.sum(np.asarray(v, dtype=float)[:-1]) * delta_t)


def coverage(swath, v, delta_t: float):
    return swath * travelled_distance(v, delta_t)


def coverage_upper_bound(cfg) -> float:
    """Largest possible coverage: master footprint at z_max, v_max in every slot."""
    q_max = master_position(cfg.z_max, cfg.x_t, cfg.theta_1)
    width = single_swath(q_max, cfg.theta_1, cfg.beamwidth)
    return float(width * (cfg.n_slots - 1) * cfg.v_max * cfg.delta_t)
