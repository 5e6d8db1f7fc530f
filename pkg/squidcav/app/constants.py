"""
Physical constants and unit conversions.

All values are CODATA 2018 as shipped by scipy.constants. Internally everything is SI
(rad/s for frequencies); the human-facing units (GHz, fF, pH, uA) are converted here
and nowhere else.
"""

import math

from scipy import constants as _sc

HBAR = _sc.hbar
PLANCK_H = _sc.h
ELEMENTARY_CHARGE = _sc.e
MU_0 = _sc.mu_0
FLUX_QUANTUM = PLANCK_H / (2.0 * ELEMENTARY_CHARGE)

FEMTO = 1e-15
PICO = 1e-12
MICRO = 1e-6
GIGA = 1e9


def ghz_to_rad_per_s(f_ghz: float) -> float:
    """Ordinary frequency in GHz -> angular frequency in rad/s."""
    return 2.0 * math.pi * f_ghz * GIGA


def rad_per_s_to_ghz(omega: float) -> float:
    return omega / (2.0 * math.pi * GIGA)


def joules_to_ghz(energy: float) -> float:
    """Energy E -> E/h in GHz."""
    return energy / PLANCK_H / GIGA


CONSTANTS_TABLE = {
    "hbar_Js": HBAR,
    "h_Js": PLANCK_H,
    "e_C": ELEMENTARY_CHARGE,
    "mu_0_H_per_m": MU_0,
    "Phi_0_Wb": FLUX_QUANTUM,
}
