"""Air-to-ground link, SAR raw-data rate, rotary-wing propulsion and energy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry_coverage import GeometryError, along_track_positions
from .scenario import DerivedConstants, ScenarioConfig


def gs_distance(q, y, gs):
    """3-D distance from a UAV at across-track q and along-track y to the ground station."""
    gx, gy, gz = gs
    return np.sqrt((np.asarray(q.x) - gx) ** 2 + (np.asarray(y) - gy) ** 2 + (np.asarray(q.z) - gz) ** 2)


def gs_distances(q, v, cfg: ScenarioConfig) -> np.ndarray:
    return gs_distance(q, along_track_positions(v, cfg.delta_t), cfg.gs)


def throughput(p_com, d, b_c: float, beta: float):
    return b_c * np.log2(1.0 + np.asarray(p_com) * beta / np.asarray(d) ** 2)


def echo_window_factor(theta, beamwidth: float):
    """1/cos(theta + beamwidth/2) - 1/cos(theta - beamwidth/2)."""
    half = beamwidth / 2
    if np.any(np.asarray(theta) + half >= math.pi / 2) or np.any(np.abs(np.asarray(theta) - half) >= math.pi / 2):
        raise GeometryError("beam edge at or beyond the horizon")
    return 1.0 / np.cos(np.asarray(theta) + half) - 1.0 / np.cos(np.asarray(theta) - half)


def min_data_rate(z, theta, cfg: ScenarioConfig):
    """Raw SAR data rate that has to be offloaded in real time (bit/s)."""
    window = np.asarray(z) / cfg.c * echo_window_factor(theta, cfg.beamwidth)
    return cfg.n_b * cfg.b_rg * cfg.prf * (window + cfg.tau_p)


def rate_snr_factor(r_min, b_c: float):
    """2^(R_min / B_c) - 1: the received SNR needed to carry R_min."""
    return np.expm1(np.asarray(r_min) / b_c * math.log(2.0))


def required_power(r_min, d, b_c: float, beta: float):
    """Smallest transmit power meeting the rate R_min at distance d."""
    return rate_snr_factor(r_min, b_c) * np.asarray(d) ** 2 / beta


def induced_power(v, consts: DerivedConstants):
    if consts.v_0 == 0:
        return np.zeros_like(np.asarray(v, dtype=float))
    ratio = np.asarray(v, dtype=float) ** 2 / (2.0 * consts.v_0 ** 2)
    return consts.p_i * np.sqrt(np.sqrt(1.0 + ratio ** 2) - ratio)


def blade_profile_power(v, cfg: ScenarioConfig, consts: DerivedConstants):
    return consts.p_0 * (1.0 + 3.0 * np.asarray(v, dtype=float) ** 2 / cfg.u_tip ** 2)


def parasite_power(v, cfg: ScenarioConfig):
    return 0.5 * cfg.d_0 * cfg.rho * cfg.solidity * cfg.a_e * np.asarray(v, dtype=float) ** 3


def propulsion_power(v, cfg: ScenarioConfig, consts: DerivedConstants):
    """Rotary-wing propulsion power at forward speed v (W)."""
    return blade_profile_power(v, cfg, consts) + induced_power(v, consts) + parasite_power(v, cfg)


@dataclass(frozen=True)
class EnergyLedger:
    propulsion: np.ndarray  # W per slot
    radar: np.ndarray
    communication: np.ndarray
    delta_t: float

    @property
    def per_slot(self) -> np.ndarray:
        return (self.propulsion + self.radar + self.communication) * self.delta_t

    @property
    def total(self) -> float:
        return float(self.per_slot.sum())


def energy_ledger(p_com, v, p_t: float, cfg: ScenarioConfig, consts: DerivedConstants) -> EnergyLedger:
    v = np.asarray(v, dtype=float)
    p_com = np.asarray(p_com, dtype=float)
    if p_com.shape != v.shape:
        raise ValueError("power and velocity vectors must have equal length")
    return EnergyLedger(
        propulsion=propulsion_power(v, cfg, consts),
        radar=np.full_like(v, p_t),
        communication=p_com,
        delta_t=cfg.delta_t,
    )


def total_energy(p_com, v, p_t: float, cfg: ScenarioConfig, consts: DerivedConstants) -> float:
    return energy_ledger(p_com, v, p_t, cfg, consts).total
