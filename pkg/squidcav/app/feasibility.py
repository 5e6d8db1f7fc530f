"""
Feasibility arithmetic: operation time against the effective decay times of level |a>
and of the cavity, evaluated for both g_eff readings.

    T_sc      = pi / (2 gamma)
    T_1       = (R / 60 MOhm) us        (when only the damping resistance is known)
    T_c       = Q_c / omega_c
    margins   = (T_1/P_a) / T_sc  and  (T_c/P_c) / T_sc
    pass if   T_sc < 0.01 T_1/P_a  and  T_sc < 0.1 T_c/P_c
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

from cavity_model import EffectiveParams
from errors import MissingInputError

logger = logging.getLogger(__name__)

RESISTANCE_SCALE_OHM = 6e7
A_MARGIN_FRACTION = 0.01
CAVITY_MARGIN_FRACTION = 0.1
STATED_DELTA_OVER_G_EFF = 10.0


def t1_from_resistance(resistance: float) -> float:
    """T1 = (R / 6e7 Ohm) x 1e-6 s."""
    if not resistance > 0:
        raise ValueError(f"resistance must be positive, got {resistance}")
    return resistance / RESISTANCE_SCALE_OHM * 1e-6


@dataclass(frozen=True)
class FeasibilityInputs:
    """
    Args:
        eff: dispersive parameters of the working point
        omega_c: cavity angular frequency (rad/s)
        quality_factor: Q_c
        resistance: junction damping resistance R (ohm), used when t1 is absent
        t1: direct T1 of level |a> (s)
        p_a / p_c: measured peak |a> population and photon number; perturbative
            estimates are used when absent
    """

    eff: EffectiveParams
    omega_c: float
    quality_factor: Optional[float] = None
    resistance: Optional[float] = None
    t1: Optional[float] = None
    p_a: Optional[float] = None
    p_c: Optional[float] = None

    def __post_init__(self):
        for name in ("omega_c", "quality_factor", "resistance", "t1", "p_a", "p_c"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class FeasibilityReport:
    T1: float
    T1_source: str
    P_a: float
    P_a_source: str
    P_c: float
    P_c_source: str
    P_c_stated_reading: float
    T1_over_Pa: float
    T_c: float
    T_c_over_Pc: float
    g_eff_formula: float
    g_eff_stated: float
    gamma_formula: float
    gamma_stated: float
    T_sc: float
    T_sc_stated: float
    margin_a: float
    margin_c: float
    margin_a_stated: float
    margin_c_stated: float
    pass_a: bool
    pass_c: bool
    pass_a_stated: bool
    pass_c_stated: bool
    Delta_c_over_g: float
    Delta_uw_over_Omega: float
    delta_over_g_eff: float

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def perturbative_populations(eff: EffectiveParams) -> Dict[str, float]:
    """P_a = max((g/Delta_c)^2, (Omega/Delta_uw)^2), P_c = (g_eff/delta)^2."""
    return {
        "P_a": max((eff.g / eff.delta_c) ** 2, (eff.rabi / eff.delta_uw) ** 2),
        "P_c": (eff.g_eff / eff.delta) ** 2,
    }


def feasibility_report(inputs: FeasibilityInputs) -> FeasibilityReport:
    """
    Every derived field is its formula evaluated on the inputs.

    Raises:
        MissingInputError: neither T1 nor R given, or Q_c missing
    """
    eff = inputs.eff
    if not eff.gamma > 0:
        raise ValueError(f"feasibility needs gamma > 0, got {eff.gamma}")
    if inputs.t1 is not None:
        t1, t1_source = inputs.t1, "direct"
    elif inputs.resistance is not None:
        t1, t1_source = t1_from_resistance(inputs.resistance), "resistance"
    else:
        raise MissingInputError("feasibility needs T1 or the damping resistance R")
    if inputs.quality_factor is None:
        raise MissingInputError("feasibility needs the cavity quality factor Q_c")

    estimates = perturbative_populations(eff)
    p_a, p_a_source = (inputs.p_a, "measured") if inputs.p_a is not None else (estimates["P_a"], "perturbative")
    p_c, p_c_source = (inputs.p_c, "measured") if inputs.p_c is not None else (estimates["P_c"], "perturbative")

    delta = abs(eff.delta)
    g_eff_stated = delta / STATED_DELTA_OVER_G_EFF
    gamma_stated = g_eff_stated ** 2 / delta
    p_c_stated = (g_eff_stated / delta) ** 2

    t_sc = math.pi / (2.0 * eff.gamma)
    t_sc_stated = math.pi / (2.0 * gamma_stated)
    t_c = inputs.quality_factor / inputs.omega_c
    a_time = t1 / p_a
    c_time = t_c / p_c

    report = FeasibilityReport(
        T1=t1,
        T1_source=t1_source,
        P_a=p_a,
        P_a_source=p_a_source,
        P_c=p_c,
        P_c_source=p_c_source,
        P_c_stated_reading=p_c_stated,
        T1_over_Pa=a_time,
        T_c=t_c,
        T_c_over_Pc=c_time,
        g_eff_formula=eff.g_eff,
        g_eff_stated=g_eff_stated,
        gamma_formula=eff.gamma,
        gamma_stated=gamma_stated,
        T_sc=t_sc,
        T_sc_stated=t_sc_stated,
        margin_a=a_time / t_sc,
        margin_c=c_time / t_sc,
        margin_a_stated=a_time / t_sc_stated,
        margin_c_stated=c_time / t_sc_stated,
        pass_a=t_sc < A_MARGIN_FRACTION * a_time,
        pass_c=t_sc < CAVITY_MARGIN_FRACTION * c_time,
        pass_a_stated=t_sc_stated < A_MARGIN_FRACTION * a_time,
        pass_c_stated=t_sc_stated < CAVITY_MARGIN_FRACTION * c_time,
        Delta_c_over_g=eff.ratios["Delta_c_over_g"],
        Delta_uw_over_Omega=eff.ratios["Delta_uw_over_Omega"],
        delta_over_g_eff=eff.ratios["delta_over_g_eff"],
    )
    if not (report.pass_a and report.pass_c):
        logger.warning(f"Feasibility margins not met: pass_a={report.pass_a}, pass_c={report.pass_c}")
    return report


def format_table(report: FeasibilityReport) -> List[str]:
    """Aligned `name  value` lines for the console."""
    fields = report.to_dict()
    width = max(len(name) for name in fields)
    lines = []
    for name, value in fields.items():
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        lines.append(f"{name.ljust(width)}  {text}")
    return lines
