"""Master-altitude sub-problem as a 2-D monotonic program solved by polyblock
outer approximation.

The master sits on the fixed-look-angle line through the target, so its
position is a function of z1 alone. The vertex is l = (z1, t), with the
auxiliary t splitting the data-offloading constraint into an increasing part
a1 and a decreasing part a2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import insar_metrics
from .geometry_coverage import (
    AcrossTrackPosition,
    along_track_positions,
    master_position,
    perpendicular_baseline,
    slant_range,
    slave_look_angle,
    travelled_distance,
)
from .scenario import DerivedConstants, ScenarioConfig

log = logging.getLogger(__name__)


@dataclass
class MonotonicProblem:
    cfg: ScenarioConfig
    consts: DerivedConstants
    q2: AcrossTrackPosition
    v: np.ndarray
    p_com_1: np.ndarray
    z_lo: float  # Z_min
    z_hi: float  # Z_max
    z_snr: float  # largest z1 meeting the SNR-coherence constraint
    b_perp: float
    r2: float
    theta_2: float

    def __post_init__(self):
        cfg = self.cfg
        tan = math.tan(cfg.theta_1)
        self._y2 = (along_track_positions(self.v, cfg.delta_t) - cfg.g_y) ** 2
        self._pb = np.asarray(self.p_com_1) * cfg.beta_c_1
        self._const = (cfg.g_x - cfg.x_t) ** 2 + cfg.g_z ** 2
        self._lin_inc = 2 * tan * max(cfg.g_x - cfg.x_t, 0.0) + 2 * max(-cfg.g_z, 0.0)
        self._lin_dec = 2 * tan * max(cfg.x_t - cfg.g_x, 0.0) + 2 * max(cfg.g_z, 0.0)
        self._quad = tan ** 2 + 1
        self._travel = travelled_distance(self.v, cfg.delta_t)
        self.a1_max = self.a1(cfg.z_max)
        self.t_max = self.a1_max - self.a1(0.0)

    @property
    def empty(self) -> bool:
        return self.z_lo > min(self.z_hi, self.z_snr)

    def k_factor(self, z1):
        return np.expm1((self.consts.a_1 * z1 + self.consts.a_2) * math.log(2.0))

    def a1(self, z1) -> float:
        k = self.k_factor(z1)
        inc = self._quad * z1 ** 2 + self._const + self._lin_inc * z1
        return float(np.max(k * (inc + self._y2) - self._pb))

    def a2(self, z1) -> float:
        return float(self.k_factor(z1) * self._lin_dec * z1)

    def coverage(self, z1: float) -> float:
        cfg = self.cfg
        q1 = master_position(z1, cfg.x_t, cfg.theta_1)
        half = cfg.beamwidth / 2
        near1 = q1.x + q1.z * math.tan(cfg.theta_1 - half)
        far1 = q1.x + q1.z * math.tan(cfg.theta_1 + half)
        q2 = self.q2
        near2 = q2.x + q2.z * math.tan(self.theta_2 - half)
        hi = self.theta_2 + half
        far2 = math.inf if hi >= math.pi / 2 else q2.x + q2.z * math.tan(hi)
        return max(min(far1, far2) - max(near1, near2), 0.0) * self._travel

    def in_normal_set(self, l) -> bool:
        z1, t = l
        if z1 < 0 or t < 0 or t > self.t_max:
            return False
        return z1 <= self.z_hi and z1 <= self.z_snr and self.a1(z1) + t <= self.a1_max

    def in_conormal_set(self, l) -> bool:
        z1, t = l
        return z1 >= self.z_lo and self.a2(z1) + t >= self.a1_max


def _snr_altitude_cap(cfg: ScenarioConfig, consts: DerivedConstants, r2: float, theta_2: float, v) -> float:
    """Largest z1 for which the SNR coherence stays above its threshold in every slot."""
    v_top = float(np.max(v))
    if math.sin(theta_2) == 0:
        inv2 = 1.0
    else:
        inv2 = 1.0 + v_top * r2 ** 3 * math.sin(theta_2) / consts.gamma_r[1]
    room = 1.0 / (cfg.gamma_snr_min ** 2 * inv2) - 1.0
    if room <= 0:
        return 0.0
    r1_max = (consts.gamma_r[0] * room / (v_top * math.sin(cfg.theta_1))) ** (1.0 / 3.0)
    return r1_max * math.cos(cfg.theta_1)


def transform_p1b(cfg: ScenarioConfig, consts: DerivedConstants, q2: AcrossTrackPosition, v, p_com_1) -> MonotonicProblem:
    th1 = cfg.theta_1
    c1, s1 = math.cos(th1), math.sin(th1)
    r2 = float(slant_range(q2, cfg.x_t))
    theta_2 = slave_look_angle(q2, cfg.x_t)
    b_perp = float(perpendicular_baseline(q2, th1, cfg.x_t))

    lower = [cfg.z_min / c1, r2, b_perp * cfg.h_amb_min / (cfg.wavelength * s1)]
    if cfg.b_min > b_perp:
        lower.append(r2 * math.cos(th1 - theta_2) + math.sqrt(cfg.b_min ** 2 - b_perp ** 2))
    dphi = insar_metrics.delta_phi_90(cfg.gamma_worst, cfg.n_looks)
    upper = [cfg.z_max / c1, 2 * math.pi * b_perp * cfg.delta_h_max / (cfg.wavelength * s1 * dphi)]

    return MonotonicProblem(
        cfg=cfg, consts=consts, q2=q2, v=np.asarray(v, dtype=float), p_com_1=np.asarray(p_com_1, dtype=float),
        z_lo=c1 * max(lower), z_hi=c1 * min(upper),
        z_snr=_snr_altitude_cap(cfg, consts, r2, theta_2, v),
        b_perp=b_perp, r2=r2, theta_2=theta_2,
    )


@dataclass(frozen=True)
class Projection:
    point: tuple[float, float]
    lam: float
    iterations: int


def bisection_iterations(eps: float) -> int:
    return math.ceil(math.log2(1.0 / eps))


def project_onto_boundary(l, problem: MonotonicProblem, eps: float | None = None) -> Projection:
    """Scale l towards the origin onto the upper boundary of the normal set.

    Returns the feasible end of the final bracket; a vertex already inside
    the normal set is returned unchanged.
    """
    eps = problem.cfg.eps_2 if eps is None else eps
    l = (float(l[0]), float(l[1]))
    if problem.in_normal_set(l):
        return Projection(l, 1.0, 0)
    if not problem.in_normal_set((0.0, 0.0)):
        raise ValueError("normal set is empty: the origin is infeasible")
    lo, hi, it = 0.0, 1.0, 0
    while hi - lo > eps:
        lam = 0.5 * (lo + hi)
        if problem.in_normal_set((lam * l[0], lam * l[1])):
            lo = lam
        else:
            hi = lam
        it += 1
    return Projection((lo * l[0], lo * l[1]), lo, it)


@dataclass
class MonotonicResult:
    q1: AcrossTrackPosition | None
    z1: float
    t: float
    coverage: float
    feasible: bool
    iterations: int
    status: str
    cbv_history: list = field(default_factory=list)


def polyblock_solve(problem: MonotonicProblem, eps: float | None = None, max_iter: int | None = None) -> MonotonicResult:
    """epsilon-optimal master altitude by polyblock outer approximation."""
    cfg = problem.cfg
    eps = cfg.eps_1 if eps is None else eps
    max_iter = max_iter or cfg.polyblock_max_iter
    # z-only normal constraints bound every feasible point, so vertex boxes can
    # be trimmed to this altitude without losing feasible points
    z_cap = min(problem.z_hi, problem.z_snr)

    def trim(l):
        return (min(l[0], z_cap), l[1])

    vertices = [v for v in [(cfg.z_max, problem.t_max)] if problem.in_conormal_set(v)]
    cbv, best = -math.inf, None
    history: list[float] = []
    it = 0
    status = "converged"
    if problem.empty:
        vertices = []
    while vertices:
        if it >= max_iter:
            status = "iteration cap"
            log.warning("polyblock hit the iteration cap (%d) with %d live vertices", max_iter, len(vertices))
            break
        idx = max(range(len(vertices)), key=lambda i: (problem.coverage(vertices[i][0]), vertices[i][1]))
        l = vertices.pop(idx)
        c_l = problem.coverage(l[0])
        if best is not None and abs(c_l - cbv) <= eps * abs(cbv):
            vertices.append(l)
            break
        phi = project_onto_boundary(l, problem).point
        if problem.in_conormal_set(phi):
            c_phi = problem.coverage(phi[0])
            if c_phi > cbv or best is None:
                cbv, best = c_phi, phi
        children = {trim((phi[0], l[1])), trim((l[0], phi[1]))}
        for ch in children:
            if ch != l and problem.in_conormal_set(ch) and (best is None or problem.coverage(ch[0]) > cbv):
                vertices.append(ch)
        history.append(cbv)
        it += 1

    if best is None:
        return MonotonicResult(None, math.nan, math.nan, 0.0, False, it, "infeasible", history)
    q1 = master_position(best[0], cfg.x_t, cfg.theta_1)
    return MonotonicResult(q1, best[0], best[1], cbv, True, it, status, history)


def solve_master(cfg: ScenarioConfig, consts: DerivedConstants, q2: AcrossTrackPosition, v, p_com_1) -> MonotonicResult:
    return polyblock_solve(transform_p1b(cfg, consts, q2, v, p_com_1))
