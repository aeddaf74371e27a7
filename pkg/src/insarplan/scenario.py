"""Scenario parameters for the two-UAV InSAR mission.

All values are kept in SI units internally (m, s, W, J, Hz, rad). Scenario
files are flat ``key = value [unit]`` text; unit conversions happen once, at
load time.
"""

from __future__ import annotations

import dataclasses
import math
import os
import re
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

ENV_PREFIX = "INSARPLAN_"


class ScenarioError(ValueError):
    """Raised for malformed scenario files."""


class UnitError(ScenarioError):
    """Raised when a value has an incompatible unit or violates its range."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


# unit -> (quantity kind, converter to SI)
_UNITS = {
    "m": ("length", lambda x: x),
    "km": ("length", lambda x: x * 1e3),
    "cm": ("length", lambda x: x * 1e-2),
    "s": ("time", lambda x: x),
    "ms": ("time", lambda x: x * 1e-3),
    "us": ("time", lambda x: x * 1e-6),
    "rad": ("angle", lambda x: x),
    "deg": ("angle", math.radians),
    "°": ("angle", math.radians),
    "m/s": ("velocity", lambda x: x),
    "km/h": ("velocity", lambda x: x / 3.6),
    "Hz": ("frequency", lambda x: x),
    "kHz": ("frequency", lambda x: x * 1e3),
    "MHz": ("frequency", lambda x: x * 1e6),
    "GHz": ("frequency", lambda x: x * 1e9),
    "W": ("power", lambda x: x),
    "mW": ("power", lambda x: x * 1e-3),
    "dBW": ("power", db_to_linear),
    "dBm": ("power", lambda x: db_to_linear(x) * 1e-3),
    "J": ("energy", lambda x: x),
    "kJ": ("energy", lambda x: x * 1e3),
    "Wh": ("energy", lambda x: x * 3600.0),
    "K": ("temperature", lambda x: x),
    "kg/m^3": ("density", lambda x: x),
    "N": ("force", lambda x: x),
    "rad/s": ("angular_velocity", lambda x: x),
    "m^2": ("area", lambda x: x),
    "J/K": ("boltzmann", lambda x: x),
}

# Units valid for dimensionless linear ratios (gains, losses, SNR-like).
_RATIO_UNITS = {"": lambda x: x, "dB": db_to_linear, "dBi": db_to_linear}

# Canonical SI unit written by dump_scenario, per kind.
_CANONICAL_UNIT = {
    "length": "m", "time": "s", "angle": "rad", "velocity": "m/s",
    "frequency": "Hz", "power": "W", "energy": "J", "temperature": "K",
    "density": "kg/m^3", "force": "N", "angular_velocity": "rad/s",
    "area": "m^2", "boltzmann": "J/K", "ratio": "", "count": "",
    "signed_length": "m",
}


def _meta(kind: str, doc: str = "") -> dict:
    return {"kind": kind, "doc": doc}


@dataclass(frozen=True)
class ScenarioConfig:
    """Every scenario parameter, in canonical SI units.

    Defaults reproduce the published system-parameter table.
    """

    # mission / geometry
    n_slots: int = dataclasses.field(default=80, metadata=_meta("count", "number of time slots N"))
    delta_t: float = dataclasses.field(default=1.0, metadata=_meta("time", "slot duration"))
    x_t: float = dataclasses.field(default=20.0, metadata=_meta("signed_length", "reference target x"))
    theta_1: float = dataclasses.field(default=math.pi / 4, metadata=_meta("angle", "master look angle"))
    theta_min: float = dataclasses.field(default=math.radians(15.0), metadata=_meta("angle"))
    theta_max: float = dataclasses.field(default=math.radians(75.0), metadata=_meta("angle"))
    beamwidth: float = dataclasses.field(default=math.pi / 6, metadata=_meta("angle", "-3 dB elevation beamwidth"))
    z_min: float = dataclasses.field(default=1.0, metadata=_meta("length"))
    z_max: float = dataclasses.field(default=100.0, metadata=_meta("length"))
    v_min: float = dataclasses.field(default=0.1, metadata=_meta("velocity"))
    v_max: float = dataclasses.field(default=10.0, metadata=_meta("velocity"))
    b_min: float = dataclasses.field(default=2.0, metadata=_meta("length", "minimum baseline"))
    e_max_1: float = dataclasses.field(default=12.22 * 3600.0, metadata=_meta("energy", "master battery"))
    e_max_2: float = dataclasses.field(default=12.22 * 3600.0, metadata=_meta("energy", "slave battery"))

    # radar
    p_t_1: float = dataclasses.field(default=1e-2, metadata=_meta("power", "master radar power"))
    p_t_2: float = dataclasses.field(default=1e-2, metadata=_meta("power", "slave radar power"))
    g_t: float = dataclasses.field(default=db_to_linear(6.0), metadata=_meta("ratio"))
    g_r: float = dataclasses.field(default=db_to_linear(6.0), metadata=_meta("ratio"))
    wavelength: float = dataclasses.field(default=0.12, metadata=_meta("length"))
    f_0: float = dataclasses.field(default=2.5e9, metadata=_meta("frequency"))
    b_rg: float = dataclasses.field(default=3e9, metadata=_meta("frequency", "radar bandwidth"))
    tau_p: float = dataclasses.field(default=1e-6, metadata=_meta("time"))
    prf: float = dataclasses.field(default=100.0, metadata=_meta("frequency"))
    t_sys: float = dataclasses.field(default=400.0, metadata=_meta("temperature"))
    noise_figure: float = dataclasses.field(default=db_to_linear(5.0), metadata=_meta("ratio"))
    l_atm: float = dataclasses.field(default=1.0, metadata=_meta("ratio"))
    l_sys: float = dataclasses.field(default=db_to_linear(2.0), metadata=_meta("ratio"))
    l_az: float = dataclasses.field(default=db_to_linear(2.0), metadata=_meta("ratio"))
    sigma_0: float = dataclasses.field(default=db_to_linear(-10.0), metadata=_meta("ratio"))
    k_b: float = dataclasses.field(default=1.380649e-23, metadata=_meta("boltzmann"))
    c: float = dataclasses.field(default=299_792_458.0, metadata=_meta("velocity", "speed of light"))
    n_b: int = dataclasses.field(default=4, metadata=_meta("count", "bits per complex sample"))
    n_looks: int = dataclasses.field(default=16, metadata=_meta("count"))

    # interferometric requirements
    gamma_snr_min: float = dataclasses.field(default=0.8, metadata=_meta("threshold"))
    gamma_rg_min: float = dataclasses.field(default=0.8, metadata=_meta("threshold"))
    gamma_other: float = dataclasses.field(default=0.8, metadata=_meta("threshold"))
    h_amb_min: float = dataclasses.field(default=1.0, metadata=_meta("length"))
    delta_h_max: float = dataclasses.field(default=0.224, metadata=_meta("length"))

    # communication
    b_c_1: float = dataclasses.field(default=1e9, metadata=_meta("frequency"))
    b_c_2: float = dataclasses.field(default=1e9, metadata=_meta("frequency"))
    beta_c_1: float = dataclasses.field(default=db_to_linear(18.75), metadata=_meta("ratio"))
    beta_c_2: float = dataclasses.field(default=db_to_linear(18.75), metadata=_meta("ratio"))
    p_com_max: float = dataclasses.field(default=db_to_linear(10.0), metadata=_meta("power"))
    g_x: float = dataclasses.field(default=0.0, metadata=_meta("signed_length", "ground station x"))
    g_y: float = dataclasses.field(default=-270.0, metadata=_meta("signed_length", "ground station y"))
    g_z: float = dataclasses.field(default=5.0, metadata=_meta("signed_length", "ground station z"))

    # rotary-wing propulsion
    delta_u: float = dataclasses.field(default=0.0012, metadata=_meta("ratio", "profile drag coefficient"))
    rho: float = dataclasses.field(default=1.225, metadata=_meta("density"))
    solidity: float = dataclasses.field(default=0.05, metadata=_meta("ratio"))
    a_e: float = dataclasses.field(default=0.503, metadata=_meta("area", "rotor disc area"))
    omega: float = dataclasses.field(default=300.0, metadata=_meta("angular_velocity"))
    r_rotor: float = dataclasses.field(default=0.4, metadata=_meta("length"))
    k_u: float = dataclasses.field(default=0.1, metadata=_meta("ratio", "induced power correction"))
    w_u: float = dataclasses.field(default=60.0, metadata=_meta("force", "aircraft weight"))
    u_tip: float = dataclasses.field(default=120.0, metadata=_meta("velocity"))
    d_0: float = dataclasses.field(default=0.6, metadata=_meta("ratio", "fuselage drag ratio"))

    # algorithm
    pso_particles: int = dataclasses.field(default=2000, metadata=_meta("count"))
    pso_iters: int = dataclasses.field(default=200, metadata=_meta("count"))
    pso_patience: int = dataclasses.field(default=20, metadata=_meta("count"))
    c_1: float = dataclasses.field(default=0.1, metadata=_meta("ratio", "cognitive factor"))
    c_2: float = dataclasses.field(default=0.2, metadata=_meta("ratio", "social factor"))
    v_pso_max: float = dataclasses.field(default=20.0, metadata=_meta("velocity"))
    pso_box_width: float = dataclasses.field(default=500.0, metadata=_meta("length", "constant O"))
    psi: float = dataclasses.field(default=0.43, metadata=_meta("unit_interval", "AO velocity step"))
    eps_1: float = dataclasses.field(default=1e-4, metadata=_meta("tolerance"))
    eps_2: float = dataclasses.field(default=1e-4, metadata=_meta("tolerance"))
    eps_3: float = dataclasses.field(default=1e-4, metadata=_meta("tolerance"))
    eps_4: float = dataclasses.field(default=1e-4, metadata=_meta("tolerance"))
    eps_5: float = dataclasses.field(default=1e-2, metadata=_meta("tolerance"))
    realizations: int = dataclasses.field(default=1000, metadata=_meta("count"))
    polyblock_max_iter: int = dataclasses.field(default=500, metadata=_meta("count"))
    sca_max_iter: int = dataclasses.field(default=100, metadata=_meta("count"))
    ao_max_iter: int = dataclasses.field(default=50, metadata=_meta("count"))

    def validate(self) -> "ScenarioConfig":
        problems = []
        for f in fields(self):
            kind = f.metadata["kind"]
            val = getattr(self, f.name)
            if kind == "signed_length":
                if not math.isfinite(val):
                    problems.append(f"{f.name} must be finite")
            elif kind in ("threshold", "tolerance"):
                if not 0.0 < val <= 1.0:
                    problems.append(f"{f.name}={val} must lie in (0, 1]")
            elif kind == "unit_interval":
                if not 0.0 <= val <= 1.0:
                    problems.append(f"{f.name}={val} must lie in [0, 1]")
            elif not (val > 0 and math.isfinite(val)):
                problems.append(f"{f.name}={val} must be strictly positive")
        if not self.theta_min < self.theta_1 < self.theta_max:
            problems.append("need theta_min < theta_1 < theta_max")
        if not self.z_min < self.z_max:
            problems.append("need z_min < z_max")
        if not self.v_min < self.v_max:
            problems.append("need v_min < v_max")
        if self.theta_1 + self.beamwidth / 2 >= math.pi / 2:
            problems.append("master beam reaches the horizon (theta_1 + beamwidth/2 >= 90 deg)")
        if problems:
            raise UnitError("; ".join(problems))
        return self

    @property
    def e_max(self) -> tuple[float, float]:
        return (self.e_max_1, self.e_max_2)

    @property
    def p_t(self) -> tuple[float, float]:
        return (self.p_t_1, self.p_t_2)

    @property
    def gs(self) -> tuple[float, float, float]:
        return (self.g_x, self.g_y, self.g_z)

    @property
    def gamma_worst(self) -> float:
        """Worst-case total coherence used by the height-error constraint."""
        return self.gamma_snr_min * self.gamma_rg_min * self.gamma_other

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ScenarioConfig)}


@dataclass(frozen=True)
class DerivedConstants:
    gamma_r: tuple[float, float]  # radar SNR constant per UAV
    p_0: float  # blade profile power, W
    p_i: float  # induced power in hover, W
    v_0: float  # mean rotor induced velocity in hover, m/s
    b_p: float  # fractional bandwidth
    a_1: float  # data-rate slope in z1 (per metre), master link
    a_2: float  # data-rate offset, master link


def radar_snr_constant(cfg: ScenarioConfig, p_t: float) -> float:
    num = cfg.sigma_0 * p_t * cfg.g_t * cfg.g_r * cfg.wavelength ** 3 * cfg.c * cfg.tau_p * cfg.prf
    den = (4.0 ** 4 * math.pi ** 3 * cfg.k_b * cfg.t_sys * cfg.b_rg * cfg.noise_figure
           * cfg.l_atm * cfg.l_sys * cfg.l_az)
    return num / den


def derive_constants(cfg: ScenarioConfig) -> DerivedConstants:
    p_0 = cfg.delta_u / 8.0 * cfg.rho * cfg.solidity * cfg.a_e * cfg.omega ** 3 * cfg.r_rotor ** 3
    p_i = (1.0 + cfg.k_u) * cfg.w_u ** 1.5 / math.sqrt(2.0 * cfg.rho * cfg.a_e)
    v_0 = math.sqrt(cfg.w_u / (2.0 * cfg.rho * cfg.a_e))
    half = cfg.beamwidth / 2
    window = 1.0 / math.cos(cfg.theta_1 + half) - 1.0 / math.cos(cfg.theta_1 - half)
    rate = cfg.n_b * cfg.b_rg * cfg.prf / cfg.b_c_1
    return DerivedConstants(
        gamma_r=(radar_snr_constant(cfg, cfg.p_t_1), radar_snr_constant(cfg, cfg.p_t_2)),
        p_0=p_0,
        p_i=p_i,
        v_0=v_0,
        b_p=cfg.b_rg / cfg.f_0,
        a_1=rate * window / cfg.c,
        a_2=rate * cfg.tau_p,
    )


# ----------------------------------------------------------------------------
# file format

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)\s*(.*?)\s*$")


def _convert(key: str, raw: str, unit: str) -> float | int:
    f = _FIELDS[key]
    kind = f.metadata["kind"]
    try:
        value = float(raw)
    except ValueError as exc:
        raise ScenarioError(f"{key}: cannot parse number {raw!r}") from exc

    if f.type in ("int", int):
        if unit:
            raise UnitError(f"{key}: integer parameter takes no unit, got {unit!r}")
        if not value.is_integer():
            raise UnitError(f"{key}: expected an integer, got {raw!r}")
        return int(value)

    if kind in ("ratio", "threshold", "tolerance", "unit_interval"):
        if unit not in _RATIO_UNITS:
            raise UnitError(f"{key}: unit {unit!r} not valid for a dimensionless ratio")
        return float(_RATIO_UNITS[unit](value))

    expected = "length" if kind == "signed_length" else kind
    if not unit:
        return value
    if unit not in _UNITS:
        raise UnitError(f"{key}: unknown unit {unit!r}")
    unit_kind, conv = _UNITS[unit]
    if unit_kind != expected:
        raise UnitError(f"{key}: unit {unit!r} is a {unit_kind}, expected {expected}")
    return float(conv(value))


def _power_db_alias(unit: str, key: str) -> str:
    # bare "dB" on a power is read as dB relative to 1 W
    if unit == "dB" and _FIELDS[key].metadata["kind"] == "power":
        return "dBW"
    return unit


def parse_scenario(text: str, *, source: str = "<string>") -> ScenarioConfig:
    """Parse scenario text; missing keys keep their default values."""
    values: dict[str, float | int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if m is None:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value [unit]', got {line!r}")
        key, raw, unit = m.groups()
        if key not in _FIELDS:
            warnings.warn(f"{source}:{lineno}: unknown scenario key {key!r} ignored", stacklevel=2)
            continue
        values[key] = _convert(key, raw, _power_db_alias(unit, key))
    return ScenarioConfig(**values).validate()


def load_scenario(path: str | os.PathLike | None = None, *,
                  env: Mapping[str, str] | None = None) -> ScenarioConfig:
    """Load a scenario file. ``path=None`` gives the default scenario.

    If ``env`` is given, variables named ``INSARPLAN_<KEY>`` override file
    values (same ``value [unit]`` syntax as the file).
    """
    text = "" if path is None else Path(path).read_text(encoding="utf-8")
    if env:
        overrides = []
        for name, val in env.items():
            if name.startswith(ENV_PREFIX):
                key = name[len(ENV_PREFIX):].lower()
                overrides.append(f"{key} = {val}")
        text = text + "\n" + "\n".join(overrides)
    return parse_scenario(text, source=str(path) if path else "<defaults>")


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Serialize in canonical SI units; ``parse_scenario`` inverts it exactly."""
    lines = ["# insarplan scenario (canonical SI units)"]
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        unit = _CANONICAL_UNIT.get(f.metadata["kind"], "")
        text = str(val) if isinstance(val, int) else repr(float(val))
        lines.append(f"{f.name} = {text} {unit}".rstrip())
    return "\n".join(lines) + "\n"


def scenario_keys() -> dict[str, str]:
    """Canonical key -> quantity kind, for documentation and the API."""
    return {name: f.metadata["kind"] for name, f in _FIELDS.items()}
