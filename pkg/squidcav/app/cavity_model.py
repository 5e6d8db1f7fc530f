"""
Cavity Model
============

Composite Hilbert spaces (SQUID I (x) SQUID II (x) ancilla (x) cavity) and every
Hamiltonian variant used by the protocols:

    FULL_ROTATING   driven three-level SQUIDs + cavity in a static rotating frame
    EFF_SINGLE      single-SQUID dispersive form, e^{+-i delta t} absorbed as a delta offset on |1>
    EFF_TWO_PHOTON  two-SQUID dispersive form, photon-number dependent Stark shifts kept
    EFF_TWO_VACUUM  two-SQUID dispersive form, qubits only (cavity in vacuum)

All Hamiltonians are stored divided by hbar, i.e. in rad/s.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from constants import HBAR, MU_0, ghz_to_rad_per_s
from errors import DegenerateDetuningError, VariantMismatchError
from squid_spectrum import LambdaLevels, SpectrumResult, SquidParams

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12
DISPERSIVE_RATIO = 5.0

LevelSource = Union[LambdaLevels, SpectrumResult]


class Variant(str, Enum):
    FULL_ROTATING = "FULL_ROTATING"
    EFF_SINGLE = "EFF_SINGLE"
    EFF_TWO_PHOTON = "EFF_TWO_PHOTON"
    EFF_TWO_VACUUM = "EFF_TWO_VACUUM"


# ==================== DOMAIN TYPES ====================

@dataclass(frozen=True)
class CavityParams:
    """
    Single cavity mode.

    Args:
        omega_c: mode angular frequency (rad/s)
        g: SQUID-cavity coupling constant (rad/s), real and nonnegative
        n_max: Fock truncation (photon numbers 0..n_max)
        quality_factor: Q_c, only used by decay channels and feasibility
    """

    omega_c: float
    g: float
    n_max: int = 5
    quality_factor: Optional[float] = None

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0 (phase absorbed into level definitions), got {self.g}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.quality_factor is not None and not self.quality_factor > 0:
            raise ValueError(f"quality_factor must be positive, got {self.quality_factor}")

    @property
    def kappa(self) -> float:
        """Photon decay rate omega_c / Q_c (1/s)."""
        if self.quality_factor is None:
            return 0.0
        return self.omega_c / self.quality_factor


@dataclass(frozen=True)
class DriveParams:
    rabi: float
    omega_uw: float

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError(f"Rabi frequency must be >= 0, got {self.rabi}")
        if not self.omega_uw > 0:
            raise ValueError(f"omega_uw must be positive, got {self.omega_uw}")


@dataclass(frozen=True)
class CouplingInputs:
    """Surface integrals of the cavity and microwave magnetic fields over the SQUID loop (T m^2)."""

    cavity_field_integral: float = 0.0
    microwave_field_integral: float = 0.0

    def __post_init__(self):
        for name in ("cavity_field_integral", "microwave_field_integral"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class EffectiveParams:
    """
    Dispersive-regime parameters. Only g, rabi, delta_c, delta_uw are inputs; the rest
    are evaluated from their defining formulas on construction.
    """

    g: float
    rabi: float
    delta_c: float
    delta_uw: float
    delta: float = field(init=False)
    g_eff: float = field(init=False)
    gamma: float = field(init=False)
    gamma_prime: float = field(init=False)
    chi: float = field(init=False)
    flags: Dict[str, bool] = field(init=False, compare=False)

    def __post_init__(self):
        if not self.delta_c > 0:
            raise ValueError(f"Delta_c must be positive, got {self.delta_c}")
        if not self.delta_uw > 0:
            raise ValueError(f"Delta_uw must be positive, got {self.delta_uw}")
        delta = self.delta_c - self.delta_uw
        if delta == 0:
            raise DegenerateDetuningError("delta = Delta_c - Delta_uw = 0; gamma is undefined")
        g_eff = 0.5 * self.rabi * self.g * (1.0 / self.delta_c + 1.0 / self.delta_uw)
        gamma = g_eff ** 2 / delta
        gamma_prime = gamma - self.rabi ** 2 / self.delta_uw
        chi = gamma_prime / gamma if gamma != 0 else float("nan")
        flags = {
            "Delta_c_below_5g": self.delta_c < DISPERSIVE_RATIO * self.g,
            "Delta_uw_below_5Omega": self.delta_uw < DISPERSIVE_RATIO * self.rabi,
            "delta_below_5g_eff": abs(delta) < DISPERSIVE_RATIO * g_eff,
            "chi_undefined": gamma == 0,
        }
        for name, value in (("delta", delta), ("g_eff", g_eff), ("gamma", gamma),
                            ("gamma_prime", gamma_prime), ("chi", chi), ("flags", flags)):
            object.__setattr__(self, name, value)
        if any(v for k, v in flags.items() if k != "chi_undefined"):
            logger.warning(f"Dispersive approximation questionable: {flags}")

    @property
    def ratios(self) -> Dict[str, float]:
        def _ratio(a: float, b: float) -> float:
            return a / b if b else float("inf")
        return {
            "Delta_c_over_g": _ratio(self.delta_c, self.g),
            "Delta_uw_over_Omega": _ratio(self.delta_uw, self.rabi),
            "delta_over_g_eff": _ratio(abs(self.delta), self.g_eff),
        }

    @property
    def stark_shift_1(self) -> float:
        """Omega^2 / Delta_uw, the microwave Stark shift of |1> (rad/s)."""
        return self.rabi ** 2 / self.delta_uw

    def to_dict(self) -> Dict[str, object]:
        return {
            "g": self.g, "Omega": self.rabi, "Delta_c": self.delta_c, "Delta_uw": self.delta_uw,
            "delta": self.delta, "g_eff": self.g_eff, "gamma": self.gamma,
            "gamma_prime": self.gamma_prime, "chi": self.chi,
            "ratios": self.ratios, "flags": dict(self.flags),
        }


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    Immutable description of one composite system.

    `hamiltonian` is H/hbar in rad/s over the basis SQUID I (x) SQUID II (x) ... (x) cavity,
    each SQUID ordered (|0>, |1>[, |a>]). `interaction_offsets` is the diagonal D with
    psi_interaction(t) = exp(+i D t) psi_model(t); `lab_phases` (FULL_ROTATING only) is the
    diagonal H0 with psi_lab(t) = exp(-i H0 t) psi_model(t), energies referenced to E_0.
    """

    variant: Variant
    n_squids: int
    levels_per_squid: int
    n_max: Optional[int]
    hamiltonian: np.ndarray
    interaction_offsets: np.ndarray
    lab_phases: Optional[np.ndarray] = None
    active: Tuple[int, ...] = ()

    def __post_init__(self):
        dim = self.dimension
        if self.hamiltonian.shape != (dim, dim):
            raise VariantMismatchError(
                f"Hamiltonian shape {self.hamiltonian.shape} does not match dims {self.dims}")
        scale = max(np.max(np.abs(self.hamiltonian)), 1.0)
        if np.max(np.abs(self.hamiltonian - self.hamiltonian.conj().T)) > HERMITIAN_TOLERANCE * scale:
            raise VariantMismatchError("Hamiltonian is not Hermitian")
        self.hamiltonian.setflags(write=False)

    @property
    def has_cavity(self) -> bool:
        return self.n_max is not None

    @property
    def dims(self) -> Tuple[int, ...]:
        dims = (self.levels_per_squid,) * self.n_squids
        if self.has_cavity:
            dims += (self.n_max + 1,)
        return dims

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def basis_labels(self) -> List[str]:
        names = ["0", "1", "a"][: self.levels_per_squid]
        labels = []
        for index in np.ndindex(*self.dims):
            squids = "".join(names[k] for k in index[: self.n_squids])
            labels.append(f"{squids},n={index[-1]}" if self.has_cavity else squids)
        return labels

    # -------- operator library --------

    def sigma(self, squid: int, row: int, col: int) -> np.ndarray:
        """|row><col| on one SQUID, identity elsewhere (levels indexed 0, 1, 2=a)."""
        op = np.zeros((self.levels_per_squid, self.levels_per_squid), dtype=complex)
        op[row, col] = 1.0
        return embed(op, squid, self.dims)

    def annihilation(self) -> np.ndarray:
        if not self.has_cavity:
            raise VariantMismatchError(f"{self.variant.value} model has no cavity operators")
        return embed(annihilation_operator(self.n_max), len(self.dims) - 1, self.dims)

    def photon_number(self) -> np.ndarray:
        a = self.annihilation()
        return a.conj().T @ a

    def excitation_number(self) -> np.ndarray:
        """c^dag c + sum_i (sigma_11 + sigma_aa), the quantity each variant conserves."""
        total = np.zeros((self.dimension, self.dimension), dtype=complex)
        if self.has_cavity:
            total += self.photon_number()
        for squid in range(self.n_squids):
            for level in range(1, self.levels_per_squid):
                total += self.sigma(squid, level, level)
        return total

    def level_populations_operator(self, level: int) -> np.ndarray:
        """Sum over SQUIDs of the projector onto `level`."""
        return sum(self.sigma(s, level, level) for s in range(self.n_squids))

    def qubit_index(self, bits: Sequence[int], photons: int = 0) -> int:
        index = tuple(bits) + ((photons,) if self.has_cavity else ())
        return int(np.ravel_multi_index(index, self.dims))

    def qubit_subspace(self) -> List[int]:
        """Indices of the computational states |b_1 ... b_n> (vacuum if a cavity is present)."""
        return [self.qubit_index(bits) for bits in np.ndindex(*(2,) * self.n_squids)]


# ==================== OPERATOR HELPERS ====================

def annihilation_operator(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def embed(op: np.ndarray, site: int, dims: Sequence[int]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == site else np.eye(d))
    return out


def levels_of(source: LevelSource) -> LambdaLevels:
    return source.levels if isinstance(source, SpectrumResult) else source


def per_squid(values, n_squids: int, name: str) -> list:
    values = list(values) if isinstance(values, (list, tuple)) else [values]
    if len(values) == 1:
        values = values * n_squids
    if len(values) != n_squids:
        raise VariantMismatchError(f"expected {n_squids} {name}, got {len(values)}")
    return values


# ==================== COUPLINGS ====================

def coupling_g(spectrum: SpectrumResult, inputs: CouplingInputs, cavity: CavityParams,
               squid: SquidParams) -> float:
    """g = (1/L) sqrt(omega_c / (2 mu_0 hbar)) <0|Phi|a> int B_c.dS (rad/s)."""
    me = abs(spectrum.flux_me("0", "a"))
    return (1.0 / squid.inductance) * math.sqrt(cavity.omega_c / (2.0 * MU_0 * HBAR)) \
        * me * inputs.cavity_field_integral


def rabi_omega(spectrum: SpectrumResult, inputs: CouplingInputs, squid: SquidParams) -> float:
    """Omega = (1 / 2 L hbar) <1|Phi|a> int B_uw.dS (rad/s)."""
    me = abs(spectrum.flux_me("1", "a"))
    return me * inputs.microwave_field_integral / (2.0 * squid.inductance * HBAR)


def calibrate_cavity_field(target_g: float, spectrum: SpectrumResult, cavity: CavityParams,
                           squid: SquidParams) -> float:
    """Field integral that makes coupling_g return target_g."""
    unit = coupling_g(spectrum, CouplingInputs(1.0, 0.0), cavity, squid)
    return target_g / unit


def calibrate_microwave_field(target_rabi: float, spectrum: SpectrumResult,
                              squid: SquidParams) -> float:
    unit = rabi_omega(spectrum, CouplingInputs(0.0, 1.0), squid)
    return target_rabi / unit


def calibrate_field_integral(target: float, kind: str, spectrum: SpectrumResult,
                             squid: SquidParams, cavity: Optional[CavityParams] = None) -> float:
    """
    Inverse of coupling_g / rabi_omega.

    Args:
        target: desired g (kind="cavity") or Omega (kind="microwave") in rad/s
        kind: "cavity" or "microwave"
        cavity: required for kind="cavity" (g depends on omega_c)
    """
    if kind == "cavity":
        if cavity is None:
            raise ValueError("cavity calibration needs CavityParams")
        return calibrate_cavity_field(target, spectrum, cavity, squid)
    if kind == "microwave":
        return calibrate_microwave_field(target, spectrum, squid)
    raise ValueError(f"kind must be 'cavity' or 'microwave', got {kind!r}")


def effective_params(levels: LevelSource, cavity: CavityParams,
                     drive: DriveParams) -> EffectiveParams:
    lv = levels_of(levels)
    return EffectiveParams(
        g=cavity.g,
        rabi=drive.rabi,
        delta_c=lv.omega_a0 - cavity.omega_c,
        delta_uw=lv.omega_a1 - drive.omega_uw,
    )


def match_drive_frequency(levels_I: LevelSource, levels_II: LevelSource, omega_c: float,
                          omega_uw_I: float) -> float:
    """omega_uw of SQUID II giving delta_II = delta_I for non-identical SQUIDs."""
    lv1, lv2 = levels_of(levels_I), levels_of(levels_II)
    delta_I = lv1.omega_10 - omega_c + omega_uw_I
    return delta_I - lv2.omega_10 + omega_c


@dataclass(frozen=True)
class DriveInput:
    """Per-SQUID drive settings; None fields fall back to the working-point ratios."""

    rabi: Optional[float] = None
    omega_uw: Optional[float] = None
    delta_uw: Optional[float] = None


@dataclass(frozen=True)
class WorkingPoint:
    """
    SQUID I's levels, drive and effective parameters (the protocol reference) plus the
    per-SQUID inputs of every configured SQUID.
    """

    levels: LambdaLevels
    cavity: CavityParams
    drive: DriveParams
    eff: EffectiveParams
    squid_levels: Tuple[LambdaLevels, ...] = ()
    drives: Tuple[DriveParams, ...] = ()
    couplings: Tuple[float, ...] = ()

    @property
    def n_configured(self) -> int:
        return max(len(self.squid_levels), 1)

    def _inputs(self) -> Tuple[list, list, list]:
        return (list(self.squid_levels or (self.levels,)), list(self.drives or (self.drive,)),
                list(self.couplings or (self.cavity.g,)))

    def per_squid_effective(self) -> List[EffectiveParams]:
        levels, drives, couplings = self._inputs()
        return [effective_params(lv, replace(self.cavity, g=g), d)
                for lv, d, g in zip(levels, drives, couplings)]

    def full_model(self, n_squids: int = 2) -> SystemModel:
        """FULL_ROTATING model of the first n_squids SQUIDs (a single SQUID is replicated)."""
        levels, drives, couplings = self._inputs()
        if 1 < len(levels) < n_squids:
            raise VariantMismatchError(
                f"{n_squids}-SQUID model needs {n_squids} configured SQUIDs, got {len(levels)}")
        if len(levels) > n_squids:
            logger.info(f"Using the first {n_squids} of {len(levels)} configured SQUIDs")
            levels, drives, couplings = levels[:n_squids], drives[:n_squids], couplings[:n_squids]
        return build_full_rotating(levels, self.cavity, drives, n_squids=n_squids, couplings=couplings)


def working_point(
    g: float = 1.8e8,
    g_over_Omega: float = 1.2,
    Delta_c_over_g: float = 10.0,
    Delta_uw_over_Omega: float = 10.0,
    omega_c: float = ghz_to_rad_per_s(29.7),
    omega_10: float = ghz_to_rad_per_s(5.0),
    n_max: int = 5,
    quality_factor: Optional[float] = 2e4,
    levels: Optional[Union[LevelSource, Sequence[LevelSource]]] = None,
    drives: Optional[Sequence[DriveInput]] = None,
    couplings: Optional[Sequence[float]] = None,
    rabis: Optional[Sequence[float]] = None,
) -> WorkingPoint:
    """
    Protocol operating point parameterized by coupling ratios.

    Without `levels` a synthetic Lambda scheme is placed at omega_a0 = omega_c + Delta_c
    (only detunings enter the rotating-frame model). With `levels` (a solved spectrum, or
    one per SQUID) the cavity follows SQUID I as omega_c = omega_a0 - Delta_c, unless
    `couplings` gives g per SQUID: those were derived at omega_c, so the cavity stays there.

    Omega of SQUID i comes from drives[i], else rabis[i], else g_i / g_over_Omega. SQUID I
    is driven at drives[0].omega_uw or omega_a1 - Delta_uw (explicit or by ratio); later
    SQUIDs without an explicit frequency get match_drive_frequency, so all share one delta.
    """
    if levels is None:
        level_list: list = []
    elif isinstance(levels, (LambdaLevels, SpectrumResult)):
        level_list = [levels]
    else:
        level_list = list(levels)
    drive_list = list(drives or [])
    n = max(len(level_list), len(drive_list), len(couplings or []), len(rabis or []), 1)
    g_list = per_squid(list(couplings) if couplings else g, n, "couplings")
    rabi_list = (per_squid(list(rabis), n, "Rabi frequencies") if rabis
                 else [g_i / g_over_Omega for g_i in g_list])
    delta_c = Delta_c_over_g * g_list[0]
    if level_list:
        lvs = [levels_of(lv) for lv in per_squid(level_list, n, "level schemes")]
        if not couplings:
            omega_c = lvs[0].omega_a0 - delta_c
    else:
        omega_a0 = omega_c + delta_c
        lvs = [LambdaLevels.from_frequencies(omega_a0, omega_a0 - omega_10)] * n
    drive_list += [DriveInput()] * (n - len(drive_list))

    drive_params: List[DriveParams] = []
    for i, (lv, d) in enumerate(zip(lvs, drive_list)):
        rabi = d.rabi if d.rabi is not None else rabi_list[i]
        if d.omega_uw is not None:
            omega_uw = d.omega_uw
        elif d.delta_uw is not None:
            omega_uw = lv.omega_a1 - d.delta_uw
        elif i == 0:
            omega_uw = lv.omega_a1 - Delta_uw_over_Omega * rabi
        else:
            omega_uw = match_drive_frequency(lvs[0], lv, omega_c, drive_params[0].omega_uw)
        drive_params.append(DriveParams(rabi=rabi, omega_uw=omega_uw))

    cavity = CavityParams(omega_c=omega_c, g=g_list[0], n_max=n_max, quality_factor=quality_factor)
    return WorkingPoint(lvs[0], cavity, drive_params[0],
                        effective_params(lvs[0], cavity, drive_params[0]),
                        squid_levels=tuple(lvs), drives=tuple(drive_params), couplings=tuple(g_list))


# ==================== HAMILTONIANS ====================

def build_full_rotating(
    levels: Union[LevelSource, Sequence[LevelSource]],
    cavity: CavityParams,
    drives: Union[DriveParams, Sequence[DriveParams]],
    n_squids: int = 2,
    couplings: Optional[Sequence[float]] = None,
) -> SystemModel:
    """
    Time-independent rotating-frame form of the driven Lambda Hamiltonian (any number of SQUIDs):

        H/hbar = sum_i [Delta_c,i s_aa,i + delta_i s_11,i + g_i (c^dag s_0a,i + h.c.)
                        + Omega_i (s_a1,i + h.c.)]

    Frame: per-SQUID level phases (0, omega_c - omega_uw,i, omega_c), cavity phase omega_c.
    """
    if n_squids not in (1, 2, 3):
        raise VariantMismatchError(f"n_squids must be 1, 2 or 3, got {n_squids}")
    if cavity.n_max < 3:
        logger.warning(f"Fock truncation n_max={cavity.n_max} < 3; photon dynamics may be truncated")
    level_list = [levels_of(lv) for lv in per_squid(levels, n_squids, "level schemes")]
    drive_list = per_squid(drives, n_squids, "drives")
    g_list = per_squid(list(couplings) if couplings is not None else cavity.g, n_squids, "couplings")

    dims = (3,) * n_squids + (cavity.n_max + 1,)
    dim = int(np.prod(dims))
    c = embed(annihilation_operator(cavity.n_max), n_squids, dims)
    c_dag = c.conj().T

    def sig(squid: int, row: int, col: int) -> np.ndarray:
        op = np.zeros((3, 3), dtype=complex)
        op[row, col] = 1.0
        return embed(op, squid, dims)

    H = np.zeros((dim, dim), dtype=complex)
    offsets = np.zeros(dim)
    lab = np.real(np.diag(c_dag @ c)) * cavity.omega_c
    for i, (lv, drive, g) in enumerate(zip(level_list, drive_list, g_list)):
        delta_c = lv.omega_a0 - cavity.omega_c
        delta_uw = lv.omega_a1 - drive.omega_uw
        delta = delta_c - delta_uw
        s_aa, s_11 = sig(i, 2, 2), sig(i, 1, 1)
        H += delta_c * s_aa + delta * s_11
        coupling = g * (c_dag @ sig(i, 0, 2))
        H += coupling + coupling.conj().T
        drive_term = drive.rabi * sig(i, 2, 1)
        H += drive_term + drive_term.conj().T
        offsets += np.real(np.diag(delta_c * s_aa + delta * s_11))
        lab += np.real(np.diag((cavity.omega_c - drive.omega_uw) * s_11 + cavity.omega_c * s_aa))

    return SystemModel(
        variant=Variant.FULL_ROTATING,
        n_squids=n_squids,
        levels_per_squid=3,
        n_max=cavity.n_max,
        hamiltonian=H,
        interaction_offsets=offsets,
        lab_phases=lab,
        active=tuple(range(n_squids)),
    )


def build_effective(
    variant: Union[Variant, str],
    eff: EffectiveParams,
    n_max: Optional[int] = None,
    n_squids: Optional[int] = None,
    active: Optional[Sequence[int]] = None,
) -> SystemModel:
    """
    Effective (|a>-eliminated) Hamiltonians.

    EFF_SINGLE: one SQUID + cavity with the delta offset on |1>.
    EFF_TWO_PHOTON: two SQUIDs + cavity, Stark shifts per photon number.
    EFF_TWO_VACUUM: qubits only, cavity in vacuum; with n_squids=3 only the `active` pair is driven
    (idle SQUIDs have Omega = 0, hence no Stark shift and no Raman coupling).
    """
    variant = Variant(variant)
    if variant is Variant.FULL_ROTATING:
        raise VariantMismatchError("use build_full_rotating for FULL_ROTATING")
    if variant is Variant.EFF_SINGLE:
        return _build_eff_single(eff, n_max, n_squids)
    if variant is Variant.EFF_TWO_PHOTON:
        return _build_eff_two_photon(eff, n_max, n_squids)
    return _build_eff_vacuum(eff, n_max, n_squids, active)


def _qubit(row: int, col: int) -> np.ndarray:
    op = np.zeros((2, 2), dtype=complex)
    op[row, col] = 1.0
    return op


def _build_eff_single(eff: EffectiveParams, n_max: Optional[int],
                      n_squids: Optional[int]) -> SystemModel:
    if n_max is None or (n_squids not in (None, 1)):
        raise VariantMismatchError("EFF_SINGLE needs exactly one SQUID and a cavity (n_max)")
    dims = (2, n_max + 1)
    c = embed(annihilation_operator(n_max), 1, dims)
    n = c.conj().T @ c
    s00, s11 = embed(_qubit(0, 0), 0, dims), embed(_qubit(1, 1), 0, dims)
    s10 = embed(_qubit(1, 0), 0, dims)
    H = (-(eff.g ** 2 / eff.delta_c) * (n @ s00)
         + (eff.delta - eff.stark_shift_1) * s11
         - eff.g_eff * (c @ s10 + (c @ s10).conj().T))
    return SystemModel(Variant.EFF_SINGLE, 1, 2, n_max, H,
                       interaction_offsets=np.real(np.diag(eff.delta * s11)), active=(0,))


def _build_eff_two_photon(eff: EffectiveParams, n_max: Optional[int],
                          n_squids: Optional[int]) -> SystemModel:
    if n_max is None or (n_squids not in (None, 2)):
        raise VariantMismatchError("EFF_TWO_PHOTON needs exactly two SQUIDs and a cavity (n_max)")
    dims = (2, 2, n_max + 1)
    dim = int(np.prod(dims))
    c = embed(annihilation_operator(n_max), 2, dims)
    n = c.conj().T @ c
    n_plus_one = n + np.eye(dim)
    H = np.zeros((dim, dim), dtype=complex)
    for i in range(2):
        s00, s11 = embed(_qubit(0, 0), i, dims), embed(_qubit(1, 1), i, dims)
        H += -(eff.g ** 2 / eff.delta_c) * (n @ s00) - eff.stark_shift_1 * s11
        H += eff.gamma * (-(n @ s00) + n_plus_one @ s11)
    flip = embed(_qubit(1, 0), 0, dims) @ embed(_qubit(0, 1), 1, dims)
    H += eff.gamma * (flip + flip.conj().T)
    return SystemModel(Variant.EFF_TWO_PHOTON, 2, 2, n_max, H,
                       interaction_offsets=np.zeros(dim), active=(0, 1))


def _build_eff_vacuum(eff: EffectiveParams, n_max: Optional[int], n_squids: Optional[int],
                      active: Optional[Sequence[int]]) -> SystemModel:
    if n_max is not None:
        raise VariantMismatchError("EFF_TWO_VACUUM has no cavity operators; do not pass n_max")
    n_squids = 2 if n_squids is None else n_squids
    if n_squids not in (2, 3):
        raise VariantMismatchError(f"EFF_TWO_VACUUM supports 2 or 3 SQUIDs, got {n_squids}")
    active = tuple(range(n_squids)) if active is None and n_squids == 2 else tuple(active or (0, 1))
    if len(set(active)) != len(active) or any(not 0 <= k < n_squids for k in active):
        raise VariantMismatchError(f"invalid active SQUIDs {active} for {n_squids} SQUIDs")
    dims = (2,) * n_squids
    dim = 2 ** n_squids
    H = np.zeros((dim, dim), dtype=complex)
    for i in active:
        H += eff.gamma_prime * embed(_qubit(1, 1), i, dims)
    for k, i in enumerate(active):
        for j in active[k + 1:]:
            flip = embed(_qubit(1, 0), i, dims) @ embed(_qubit(0, 1), j, dims)
            H += eff.gamma * (flip + flip.conj().T)
    return SystemModel(Variant.EFF_TWO_VACUUM, n_squids, 2, None, H,
                       interaction_offsets=np.zeros(dim), active=active)
