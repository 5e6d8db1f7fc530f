"""
rf-SQUID Spectrum Solver
========================

Solves the stationary 1D problem for the rf-SQUID flux Hamiltonian

    H_s = -(hbar^2 / 2C) d^2/dPhi^2 + (Phi - Phi_x)^2 / 2L - E_J cos(2 pi Phi / Phi_0)

on a uniform flux grid with the Fourier-grid (sinc DVR) kinetic operator, and extracts
the Lambda-type levels |0>, |1>, |a> together with the flux matrix elements that set
the cavity and microwave couplings.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.signal import argrelmin

from constants import FEMTO, FLUX_QUANTUM, HBAR, MICRO, PICO
from errors import BoundaryLeakError, ConvergenceError, LevelAssignmentError

logger = logging.getLogger(__name__)

LEVEL_LABELS = ("0", "1", "a")
MIN_LEVELS = 6
DEFAULT_LEVEL_A_INDEX = 3
BOUNDARY_THRESHOLD = 1e-8
CONVERGENCE_THRESHOLD = 1e-6
LAMBDA_COUPLING_FRACTION = 0.01


# ==================== DOMAIN TYPES ====================

@dataclass(frozen=True)
class SquidParams:
    """
    Device constants of one rf SQUID.

    Args:
        capacitance: junction capacitance C in farads
        inductance: loop inductance L in henries
        critical_current: junction critical current I_c in amperes
        flux_bias: external flux Phi_x in units of Phi_0
    """

    capacitance: float
    inductance: float
    critical_current: float
    flux_bias: float

    def __post_init__(self):
        if not self.capacitance > 0:
            raise ValueError(f"capacitance must be positive, got {self.capacitance}")
        if not self.inductance > 0:
            raise ValueError(f"inductance must be positive, got {self.inductance}")
        if self.critical_current < 0:
            raise ValueError(f"critical_current must be >= 0, got {self.critical_current}")
        if not 0.0 <= self.flux_bias < 1.0:
            raise ValueError(f"flux_bias must lie in [0, 1), got {self.flux_bias}")

    @classmethod
    def from_device_units(cls, C_fF: float, L_pH: float, Ic_uA: float,
                          Phix_Phi0: float) -> "SquidParams":
        return cls(C_fF * FEMTO, L_pH * PICO, Ic_uA * MICRO, Phix_Phi0)

    @property
    def josephson_energy(self) -> float:
        """E_J = I_c Phi_0 / 2 pi in joules."""
        return self.critical_current * FLUX_QUANTUM / (2.0 * np.pi)

    @property
    def external_flux(self) -> float:
        return self.flux_bias * FLUX_QUANTUM

    @property
    def impedance(self) -> float:
        return float(np.sqrt(self.inductance / self.capacitance))

    def potential(self, flux: np.ndarray) -> np.ndarray:
        flux = np.asarray(flux, dtype=float)
        return ((flux - self.external_flux) ** 2 / (2.0 * self.inductance)
                - self.josephson_energy * np.cos(2.0 * np.pi * flux / FLUX_QUANTUM))


@dataclass(frozen=True)
class GridConfig:
    num_points: int = 512
    domain_halfwidth: float = 0.5
    scheme: str = "fourier"

    def __post_init__(self):
        if self.num_points < 64:
            raise ValueError(f"num_points must be >= 64, got {self.num_points}")
        if self.num_points & (self.num_points - 1):
            raise ValueError(f"num_points must be a power of two, got {self.num_points}")
        if not self.domain_halfwidth > 0:
            raise ValueError(f"domain_halfwidth must be positive, got {self.domain_halfwidth}")
        if self.scheme != "fourier":
            raise ValueError(f"unknown discretization scheme '{self.scheme}'")

    def flux_grid(self, center: float) -> np.ndarray:
        """Uniform grid in webers over center +/- halfwidth * Phi_0."""
        half = self.domain_halfwidth * FLUX_QUANTUM
        return np.linspace(center - half, center + half, self.num_points)

    def doubled(self) -> "GridConfig":
        return GridConfig(2 * self.num_points, self.domain_halfwidth, self.scheme)


@dataclass(frozen=True)
class LambdaLevels:
    """Energies of the Lambda triple; frequencies derive from them (rad/s)."""

    E_0: float
    E_1: float
    E_a: float

    @classmethod
    def from_frequencies(cls, omega_a0: float, omega_a1: float) -> "LambdaLevels":
        return cls(0.0, HBAR * (omega_a0 - omega_a1), HBAR * omega_a0)

    @property
    def omega_a1(self) -> float:
        return (self.E_a - self.E_1) / HBAR

    @property
    def omega_10(self) -> float:
        return (self.E_1 - self.E_0) / HBAR

    @property
    def omega_a0(self) -> float:
        # sum of the two legs, so omega_a0 == omega_a1 + omega_10 holds exactly
        return self.omega_a1 + self.omega_10


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    energies: np.ndarray
    flux: np.ndarray
    eigenvectors: np.ndarray
    flux_matrix: np.ndarray
    level_map: Dict[str, int]
    num_points: int
    relative_error: float
    orthonormality_error: float
    max_residual: float
    lambda_valid: bool
    lambda_candidates: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def levels(self) -> LambdaLevels:
        m = self.level_map
        return LambdaLevels(float(self.energies[m["0"]]), float(self.energies[m["1"]]),
                            float(self.energies[m["a"]]))

    @property
    def omega_a0(self) -> float:
        return self.levels.omega_a0

    @property
    def omega_a1(self) -> float:
        return self.levels.omega_a1

    @property
    def omega_10(self) -> float:
        return self.levels.omega_10

    def flux_me(self, i: str, j: str) -> float:
        """<i|Phi|j> in webers for labels in {'0', '1', 'a'}."""
        return float(self.flux_matrix[self.level_map[i], self.level_map[j]])

    @property
    def mean_flux(self) -> Dict[str, float]:
        return {label: self.flux_me(label, label) for label in LEVEL_LABELS}


# ==================== SOLVER ====================

def beta_L(params: SquidParams) -> float:
    """Screening parameter 2 pi L I_c / Phi_0; above 1 the potential is a double well."""
    return 2.0 * np.pi * params.inductance * params.critical_current / FLUX_QUANTUM


def _fourier_grid_hamiltonian(flux: np.ndarray, potential: np.ndarray,
                              capacitance: float) -> np.ndarray:
    n = len(flux)
    dx = flux[1] - flux[0]
    idx = np.arange(n)
    d = (idx[:, None] - idx[None, :]).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        off_diag = 2.0 * np.power(-1.0, d) / (dx ** 2 * d ** 2)
    kinetic = np.where(d == 0, np.pi ** 2 / (3.0 * dx ** 2), off_diag)
    kinetic *= HBAR ** 2 / (2.0 * capacitance)
    return kinetic + np.diag(potential)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    peaks = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[peaks, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _diagonalize(params: SquidParams, grid: GridConfig,
                 n_levels: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    flux = grid.flux_grid(params.external_flux)
    hamiltonian = _fourier_grid_hamiltonian(flux, params.potential(flux), params.capacitance)
    energies, vectors = linalg.eigh(hamiltonian, subset_by_index=[0, n_levels - 1])
    return flux, hamiltonian, energies, _fix_signs(vectors)


def lambda_candidates(flux_matrix: np.ndarray, first: int = 2,
                      last: int = 5) -> List[Tuple[int, float]]:
    """Indices first..last ranked by min(|<0|Phi|k>|, |<1|Phi|k>|), strongest first."""
    last = min(last, flux_matrix.shape[0] - 1)
    ranked = [(k, float(min(abs(flux_matrix[0, k]), abs(flux_matrix[1, k]))))
              for k in range(first, last + 1)]
    return sorted(ranked, key=lambda item: item[1], reverse=True)


def solve_squid_spectrum(
    params: SquidParams,
    grid: Optional[GridConfig] = None,
    level_a_index: Optional[int] = None,
    n_levels: int = MIN_LEVELS,
    check_convergence: bool = True,
    require_lambda: bool = False,
) -> SpectrumResult:
    """
    Solve the rf-SQUID eigenproblem and assign the Lambda levels.

    Args:
        params: device constants
        grid: flux grid (defaults to 512 points over Phi_x +/- 0.5 Phi_0)
        level_a_index: eigenstate index used as |a> (default 3, near 30 GHz at
            the default device; index 2 sits near 24 GHz)
        n_levels: number of eigenpairs returned (at least 6)
        check_convergence: re-solve on a doubled grid and compare E_a - E_0
        require_lambda: raise instead of warning when the Lambda check fails

    Returns:
        SpectrumResult with energies in joules and flux matrix elements in webers
    """
    grid = grid or GridConfig()
    a_index = DEFAULT_LEVEL_A_INDEX if level_a_index is None else int(level_a_index)
    if a_index < 2:
        raise ValueError(f"level_a_index must be >= 2, got {a_index}")
    n_levels = max(n_levels, MIN_LEVELS, a_index + 1)

    flux, hamiltonian, energies, vectors = _diagonalize(params, grid, n_levels)

    if np.any(np.diff(energies) <= 0):
        raise ConvergenceError("eigenenergies are not strictly increasing",
                               {"energies_J": energies.tolist()})

    peak = np.max(np.abs(vectors), axis=0)
    edge = np.maximum(np.abs(vectors[0]), np.abs(vectors[-1]))
    leak = edge / peak
    if np.any(leak > BOUNDARY_THRESHOLD):
        raise BoundaryLeakError(
            "eigenfunction tails reach the grid boundary; widen grid.domain_halfwidth",
            {"worst_level": int(np.argmax(leak)), "tail_ratio": float(np.max(leak))},
        )

    overlap = vectors.T @ vectors
    orthonormality_error = float(np.max(np.abs(overlap - np.eye(n_levels))))

    scale = max(energies[-1] - energies[0], np.finfo(float).tiny)
    residuals = []
    for k in range(MIN_LEVELS):
        residual = hamiltonian @ vectors[:, k] - energies[k] * vectors[:, k]
        residuals.append(np.linalg.norm(residual) / max(abs(energies[k]), scale))
    max_residual = float(max(residuals))

    flux_matrix = vectors.T @ (flux[:, None] * vectors)
    flux_matrix = 0.5 * (flux_matrix + flux_matrix.T)

    relative_error = 0.0
    if check_convergence:
        _, _, fine_energies, _ = _diagonalize(params, grid.doubled(), n_levels)
        gap = energies[a_index] - energies[0]
        fine_gap = fine_energies[a_index] - fine_energies[0]
        relative_error = float(abs(fine_gap - gap) / abs(fine_gap))
        if relative_error > CONVERGENCE_THRESHOLD:
            raise ConvergenceError(
                f"E_a - E_0 moved by {relative_error:.2e} (relative) on the doubled grid",
                {"num_points": grid.num_points, "relative_error": relative_error},
            )

    candidates = lambda_candidates(flux_matrix)
    reference = abs(flux_matrix[0, 1])
    lambda_valid = bool(
        abs(flux_matrix[0, a_index]) > LAMBDA_COUPLING_FRACTION * reference
        and abs(flux_matrix[1, a_index]) > LAMBDA_COUPLING_FRACTION * reference
    )
    if not lambda_valid:
        message = (f"level index {a_index} is not a Lambda partner of |0>,|1>; "
                   f"candidates (index, coupling Wb): {candidates}")
        if require_lambda:
            raise LevelAssignmentError(message, {"candidates": candidates})
        logger.warning(message)

    result = SpectrumResult(
        energies=energies,
        flux=flux,
        eigenvectors=vectors,
        flux_matrix=flux_matrix,
        level_map={"0": 0, "1": 1, "a": a_index},
        num_points=grid.num_points,
        relative_error=relative_error,
        orthonormality_error=orthonormality_error,
        max_residual=max_residual,
        lambda_valid=lambda_valid,
        lambda_candidates=candidates,
    )
    logger.info(f"Spectrum solved on {grid.num_points} points: "
                f"omega_a0/2pi = {result.omega_a0 / (2 * np.pi) / 1e9:.3f} GHz, "
                f"omega_10/2pi = {result.omega_10 / (2 * np.pi) / 1e9:.3f} GHz")
    return result


def potential_profile(params: SquidParams, samples: int,
                      halfwidth: float = 0.35) -> np.ndarray:
    """Rows of (Phi [Wb], U(Phi) [J]) over Phi_x +/- halfwidth * Phi_0."""
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    half = halfwidth * FLUX_QUANTUM
    flux = params.external_flux + np.linspace(-half, half, samples)
    return np.column_stack([flux, params.potential(flux)])


def potential_minima(params: SquidParams, samples: int = 4001,
                     halfwidth: float = 0.35) -> np.ndarray:
    """Flux positions (Wb) of the interior local minima of U."""
    profile = potential_profile(params, samples, halfwidth)
    (indices,) = argrelmin(profile[:, 1])
    return profile[indices, 0]
