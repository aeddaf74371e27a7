"""Interferometric quality models.

Coherence factors, height of ambiguity, the multilook phase-error density and
the 90 % point-to-point phase and height errors derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import hyp2f1

PDF_GRID_POINTS = 4096


@dataclass(frozen=True)
class CoherenceBudget:
    gamma_snr: float
    gamma_rg: float
    gamma_other: float

    @property
    def gamma_total(self) -> float:
        return self.gamma_snr * self.gamma_rg * self.gamma_other


def sar_snr(r, v, theta, gamma_r: float):
    """Single-look SAR SNR of one UAV flying at speed v with slant range r."""
    if np.any(np.sin(theta) == 0):
        raise ValueError("SNR undefined for a nadir-looking radar (theta = 0)")
    return gamma_r / (np.asarray(v) * np.asarray(r) ** 3 * np.sin(theta))


def snr_coherence(snr_1, snr_2):
    """SNR decorrelation of the pair, prod_i (1 + 1/SNR_i)^(-1/2)."""
    return 1.0 / np.sqrt((1.0 + 1.0 / np.asarray(snr_1)) * (1.0 + 1.0 / np.asarray(snr_2)))


def snr_decorrelation(r_1, theta_1, r_2, theta_2, v, gamma_r: tuple[float, float]):
    s1 = sar_snr(r_1, v, theta_1, gamma_r[0])
    s2 = sar_snr(r_2, v, theta_2, gamma_r[1])
    return snr_coherence(s1, s2)


def baseline_decorrelation(theta_2, theta_1, b_p: float):
    """Range spectral decorrelation between the two look angles.

    Written in terms of the smaller and larger of the two angles so that the
    value is 1 for equal angles and falls as the angles separate either way.
    """
    lo = np.minimum(theta_1, theta_2)
    hi = np.maximum(theta_1, theta_2)
    s_lo, s_hi = np.sin(lo), np.sin(hi)
    out = ((2.0 + b_p) * s_lo - (2.0 - b_p) * s_hi) / (b_p * (s_lo + s_hi))
    out = np.where(lo == hi, 1.0, out)
    return float(out) if np.ndim(out) == 0 else out


def height_of_ambiguity(r_1, theta_1, b_perp, wavelength: float):
    b_perp = np.asarray(b_perp, dtype=float)
    if b_perp.ndim == 0:
        if b_perp <= 0:
            raise ValueError("height of ambiguity is infinite for a zero perpendicular baseline")
        return float(wavelength * r_1 * math.sin(theta_1) / b_perp)
    with np.errstate(divide="ignore"):
        return np.where(b_perp > 0, wavelength * np.asarray(r_1) * np.sin(theta_1) / b_perp, np.inf)


# ----------------------------------------------------------------------------
# special functions


def gamma_ratio_half(n_looks: int) -> float:
    """Gamma(n + 1/2) / Gamma(n); exact recursion for integer n."""
    if isinstance(n_looks, (int, np.integer)) and n_looks >= 1:
        ratio = math.sqrt(math.pi) / 2.0
        for k in range(1, int(n_looks)):
            ratio *= (k + 0.5) / k
        return ratio
    return math.exp(math.lgamma(n_looks + 0.5) - math.lgamma(n_looks))


# ----------------------------------------------------------------------------
# phase statistics


def phase_grid(n_points: int = PDF_GRID_POINTS) -> tuple[np.ndarray, float]:
    """Cell-centred grid on [-pi, pi] and its spacing."""
    h = 2.0 * math.pi / n_points
    return -math.pi + (np.arange(n_points) + 0.5) * h, h


def phase_error_pdf(phi, gamma: float, n_looks: int) -> np.ndarray:
    """Multilook interferometric phase density at phase offsets phi."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"coherence must lie in [0, 1), got {gamma}")
    if n_looks < 1:
        raise ValueError("n_looks must be >= 1")
    phi = np.asarray(phi, dtype=float)
    g2 = gamma * gamma
    cos = np.cos(phi)
    x = g2 * cos * cos
    scale = (1.0 - g2) ** n_looks
    first = gamma_ratio_half(n_looks) * scale * gamma * cos / (2.0 * math.sqrt(math.pi) * (1.0 - x) ** (n_looks + 0.5))
    second = scale / (2.0 * math.pi) * hyp2f1(n_looks, 1.0, 0.5, x)
    # the two terms cancel in the far tail, leaving rounding noise around zero
    return np.maximum(first + second, 0.0)


@dataclass(frozen=True)
class PhasePercentile:
    value: float
    saturated: bool


def _convolved_half(gamma: float, n_looks: int, n_points: int) -> tuple[np.ndarray, float]:
    phi, h = phase_grid(n_points)
    p = phase_error_pdf(phi, gamma, n_looks)
    q = np.convolve(p, p) * h  # density of the difference on centres -2pi + (k+1)h
    centre = n_points - 1
    return q[centre:], h  # centres 0, h, 2h, ... up to 2pi - h


def _mass_within(x: float, q_half: np.ndarray, h: float) -> float:
    # piecewise-constant cells of width h centred on k*h, symmetric about 0
    lower = np.arange(q_half.size) * h - h / 2
    widths = np.clip(x - lower, 0.0, h)
    widths[0] = 2.0 * min(x, h / 2)
    contrib = widths * q_half
    contrib[1:] *= 2.0
    return float(contrib.sum())


@lru_cache(maxsize=256)
def _delta_phi_90_cached(gamma: float, n_looks: int, eps: float, n_points: int) -> PhasePercentile:
    q_half, h = _convolved_half(gamma, n_looks, n_points)
    top = (q_half.size - 0.5) * h
    if _mass_within(top, q_half, h) < 0.9:
        return PhasePercentile(2.0 * math.pi, True)
    root = brentq(lambda x: _mass_within(x, q_half, h) - 0.9, 0.0, top, xtol=eps, rtol=4 * np.finfo(float).eps)
    return PhasePercentile(float(root), False)


def delta_phi_90_info(gamma: float, n_looks: int, eps: float = 1e-10,
                      n_points: int = PDF_GRID_POINTS) -> PhasePercentile:
    """90 % percentile of the absolute difference of two independent phase errors."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"coherence must lie in (0, 1), got {gamma}")
    return _delta_phi_90_cached(float(gamma), int(n_looks), float(eps), int(n_points))


def delta_phi_90(gamma: float, n_looks: int, eps: float = 1e-10, n_points: int = PDF_GRID_POINTS) -> float:
    return delta_phi_90_info(gamma, n_looks, eps, n_points).value


def relative_height_error(h_amb, gamma: float, n_looks: int):
    return np.asarray(h_amb) * delta_phi_90(gamma, n_looks) / (2.0 * math.pi)


def worst_case_height_error(h_amb, cfg):
    """Height error at the worst-case coherence allowed by the thresholds."""
    return relative_height_error(h_amb, cfg.gamma_worst, cfg.n_looks)
