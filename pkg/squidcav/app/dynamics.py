"""
Dynamics
========

Time evolution engines and state metrics:
  - evolve_static: exact propagation under a static Hamiltonian (eigendecomposition)
  - evolve_lab_frame: adaptive Runge-Kutta integration of the explicitly time-dependent
    lab-frame Hamiltonian (independent oracle for the rotating-frame construction)
  - evolve_lindblad: Markovian master equation with level-|a> and cavity decay
  - fidelity, concurrence, peak/average populations, frame conversions, CSV rows
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp, trapezoid

from cavity_model import (
    CavityParams,
    DriveParams,
    LevelSource,
    SystemModel,
    levels_of,
    per_squid,
    annihilation_operator,
    embed,
)
from errors import DimensionMismatchError, NormalizationError, NumericError, PositivityError, StiffnessError

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9
NORM_DRIFT_LIMIT = 1e-8
UNITARITY_LIMIT = 1e-10
TRACE_TOLERANCE = 1e-8
HERMITIAN_TOLERANCE = 1e-10
POSITIVITY_LIMIT = 1e-6
DENSE_SUPEROPERATOR_MAX_DIM = 54


# ==================== STATES ====================

@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    dims: Tuple[int, ...]

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if amps.size != int(np.prod(self.dims)):
            raise DimensionMismatchError(f"{amps.size} amplitudes for dims {self.dims}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise NormalizationError(f"state norm {norm!r} differs from 1 by more than {NORM_TOLERANCE}")

    @property
    def dimension(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    dims: Tuple[int, ...]

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", rho)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        dim = int(np.prod(self.dims))
        if rho.shape != (dim, dim):
            raise DimensionMismatchError(f"density matrix shape {rho.shape} for dims {self.dims}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOLERANCE:
            raise ValueError("density matrix is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > TRACE_TOLERANCE:
            raise NormalizationError(f"density matrix trace {trace!r} differs from 1")
        min_eig = float(np.min(linalg.eigvalsh(rho)))
        if min_eig < -TRACE_TOLERANCE:
            raise PositivityError(f"density matrix has eigenvalue {min_eig:.3e}",
                                  {"min_eigenvalue": min_eig})

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        psi = state.amplitudes
        return cls(np.outer(psi, psi.conj()), state.dims)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def basis_state(model: SystemModel, bits: Sequence[int], photons: int = 0) -> StateVector:
    """Product basis state, e.g. bits=(0, 1) is |0>_I|1>_II (|0> cavity when present)."""
    amps = np.zeros(model.dimension, dtype=complex)
    amps[model.qubit_index(bits, photons)] = 1.0
    return StateVector(amps, model.dims)


def superposition(model: SystemModel, components: Dict[Tuple[int, ...], complex]) -> StateVector:
    amps = np.zeros(model.dimension, dtype=complex)
    for bits, value in components.items():
        amps[model.qubit_index(bits)] += value
    return StateVector(amps, model.dims)


@dataclass(frozen=True)
class CollapseChannel:
    operator: np.ndarray
    rate: float
    label: str = "custom"

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"collapse rate must be >= 0, got {self.rate}")
        if self.label not in ("level_a_decay", "cavity_decay", "custom"):
            raise ValueError(f"unknown channel label {self.label!r}")


def level_a_decay_channels(model: SystemModel, t1: float) -> List[CollapseChannel]:
    """|0><a| on every SQUID at rate 1/T1."""
    if model.levels_per_squid != 3:
        raise DimensionMismatchError("level-|a> decay needs three-level SQUIDs")
    return [CollapseChannel(model.sigma(s, 0, 2), 1.0 / t1, "level_a_decay")
            for s in range(model.n_squids)]


def cavity_decay_channel(model: SystemModel, kappa: float) -> CollapseChannel:
    return CollapseChannel(model.annihilation(), kappa, "cavity_decay")


# ==================== TRAJECTORY ====================

@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Uniformly sampled evolution. `states` has shape (samples, dim) for pure states and
    (samples, dim, dim) for density matrices; `observables` are computed on construction.
    """

    times: np.ndarray
    states: np.ndarray
    dims: Tuple[int, ...]
    n_squids: int
    levels_per_squid: int
    has_cavity: bool
    observables: Dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not self.observables:
            object.__setattr__(self, "observables", _observables(self))

    @property
    def is_density(self) -> bool:
        return self.states.ndim == 3

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def probabilities(self) -> np.ndarray:
        if self.is_density:
            return np.real(np.diagonal(self.states, axis1=1, axis2=2))
        return np.abs(self.states) ** 2

    def with_observable(self, name: str, values: Sequence[float]) -> "Trajectory":
        obs = dict(self.observables)
        obs[name] = np.asarray(values, dtype=float)
        return replace(self, observables=obs)


def _population_columns(n_squids: int) -> List[Tuple[str, Tuple[int, ...]]]:
    return [("pop_" + "".join(str(b) for b in bits), bits) for bits in np.ndindex(*(2,) * n_squids)]


def _observables(traj: Trajectory) -> Dict[str, np.ndarray]:
    probs = traj.probabilities().reshape((len(traj.times),) + traj.dims)
    obs: Dict[str, np.ndarray] = {}
    if traj.has_cavity:
        qubit_probs = probs.sum(axis=-1)
        photons = np.arange(traj.dims[-1])
        obs["n_photon"] = np.tensordot(probs.sum(axis=tuple(range(1, traj.n_squids + 1))),
                                       photons, axes=([1], [0]))
    else:
        qubit_probs = probs
    for name, bits in _population_columns(traj.n_squids):
        obs[name] = qubit_probs[(slice(None),) + bits]
    if traj.levels_per_squid == 3:
        total = np.zeros(len(traj.times))
        for s in range(traj.n_squids):
            index = [slice(None)] * (traj.n_squids + 1)
            index[s + 1] = 2
            total += qubit_probs[tuple(index)].reshape(len(traj.times), -1).sum(axis=1)
        obs["pop_a_total"] = total
    return obs


def _make_trajectory(model: SystemModel, times: np.ndarray, states: np.ndarray,
                     diagnostics: Dict[str, Any]) -> Trajectory:
    return Trajectory(times=times, states=states, dims=model.dims, n_squids=model.n_squids,
                      levels_per_squid=model.levels_per_squid, has_cavity=model.has_cavity,
                      diagnostics=diagnostics)


def _sample_times(t: float, samples: int) -> np.ndarray:
    if t < 0:
        raise ValueError(f"evolution time must be >= 0, got {t}")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if t == 0 or samples == 1:
        return np.array([float(t)])
    return np.linspace(0.0, t, samples)


def _check_dimension(model: SystemModel, dim: int):
    if dim != model.dimension:
        raise DimensionMismatchError(f"state dimension {dim} does not match model {model.dims}")


# ==================== CLOSED-SYSTEM EVOLUTION ====================

def propagator(model: SystemModel, t: float) -> np.ndarray:
    """exp(-i H t) with H = model.hamiltonian (rad/s); unitarity verified."""
    w, V = linalg.eigh(model.hamiltonian)
    U = (V * np.exp(-1j * w * t)) @ V.conj().T
    deviation = float(np.max(np.abs(U.conj().T @ U - np.eye(len(w)))))
    if deviation > UNITARITY_LIMIT:
        raise NumericError(f"propagator not unitary (deviation {deviation:.3e})",
                           {"unitarity_deviation": deviation, "t": t})
    return U


def evolve_static(model: SystemModel, psi0: StateVector, t: float, samples: int = 2) -> Trajectory:
    """
    psi(t_k) = exp(-i H t_k) psi0 on a uniform grid over [0, t].

    The eigendecomposition is computed once and reused for every sample; psi(0) is psi0
    itself.
    """
    _check_dimension(model, psi0.dimension)
    times = _sample_times(t, samples)
    w, V = linalg.eigh(model.hamiltonian)
    coeffs = V.conj().T @ psi0.amplitudes
    states = (np.exp(-1j * np.outer(times, w)) * coeffs) @ V.T
    if times[0] == 0.0:
        states[0] = psi0.amplitudes
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)))
    if drift > NORM_DRIFT_LIMIT:
        raise NumericError(f"norm drift {drift:.3e} along static evolution", {"norm_drift": drift})
    return _make_trajectory(model, times, states, {"norm_drift": drift, "method": "eigh"})


def evolve_lab_frame(
    levels: Union[LevelSource, Sequence[LevelSource]],
    cavity: CavityParams,
    drives: Union[DriveParams, Sequence[DriveParams]],
    psi0: StateVector,
    t: float,
    tol: float = 1e-10,
    samples: int = 2,
    n_squids: int = 1,
    couplings: Optional[Sequence[float]] = None,
    method: str = "DOP853",
) -> Trajectory:
    """
    Integrate i d/dt psi = H(t) psi with the explicitly time-dependent drive

        H(t) = sum_i [omega_10,i s_11 + omega_a0,i s_aa + g_i (c^dag s_0a + h.c.)
                      + Omega_i (e^{i omega_uw,i t} s_1a + h.c.)] + omega_c c^dag c

    Energies are referenced to E_0 of each SQUID. No renormalization is applied; the
    norm drift is reported in the diagnostics.

    Args:
        tol: rtol and atol of the embedded Runge-Kutta pair, in [1e-12, 1e-6]
        method: any explicit solve_ivp method accepting complex states
    """
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-12, 1e-6], got {tol}")
    level_list = [levels_of(lv) for lv in per_squid(levels, n_squids, "level schemes")]
    drive_list = per_squid(drives, n_squids, "drives")
    g_list = per_squid(list(couplings) if couplings is not None else cavity.g, n_squids, "couplings")
    dims = (3,) * n_squids + (cavity.n_max + 1,)
    dim = int(np.prod(dims))
    if psi0.dimension != dim:
        raise DimensionMismatchError(f"state dimension {psi0.dimension} does not match dims {dims}")

    c = embed(annihilation_operator(cavity.n_max), n_squids, dims)
    static = cavity.omega_c * (c.conj().T @ c)
    raising = []
    for i, (lv, drive, g) in enumerate(zip(level_list, drive_list, g_list)):
        def sig(row: int, col: int, site: int = i) -> np.ndarray:
            op = np.zeros((3, 3), dtype=complex)
            op[row, col] = 1.0
            return embed(op, site, dims)
        static = static + lv.omega_10 * sig(1, 1) + lv.omega_a0 * sig(2, 2)
        coupling = g * (c.conj().T @ sig(0, 2))
        static = static + coupling + coupling.conj().T
        raising.append((drive.omega_uw, drive.rabi * sig(1, 2)))

    def rhs(time: float, psi: np.ndarray) -> np.ndarray:
        H = static.copy()
        for omega_uw, op in raising:
            term = np.exp(1j * omega_uw * time) * op
            H += term + term.conj().T
        return -1j * (H @ psi)

    times = _sample_times(t, samples)
    if times[-1] == 0.0:
        states = psi0.amplitudes[np.newaxis, :].copy()
        diagnostics = {"norm_drift": 0.0, "method": method, "nfev": 0}
    else:
        sol = solve_ivp(rhs, (0.0, times[-1]), psi0.amplitudes, method=method,
                        t_eval=times, rtol=tol, atol=tol)
        if sol.status != 0:
            raise StiffnessError(f"lab-frame integration failed: {sol.message}",
                                 {"t_reached": float(sol.t[-1]) if sol.t.size else 0.0,
                                  "tol": tol, "method": method})
        states = sol.y.T
        diagnostics = {"norm_drift": float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0))),
                       "method": method, "nfev": int(sol.nfev)}
    return Trajectory(times=times, states=states, dims=dims, n_squids=n_squids,
                      levels_per_squid=3, has_cavity=True, diagnostics=diagnostics)


# ==================== OPEN-SYSTEM EVOLUTION ====================

def _lindblad_superoperator(H: np.ndarray, channels: Sequence[CollapseChannel]) -> np.ndarray:
    # row-major vectorization: vec(A rho B) = (A kron B^T) vec(rho)
    eye = np.eye(H.shape[0])
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for ch in channels:
        op = ch.operator
        op_dag_op = op.conj().T @ op
        L += ch.rate * (np.kron(op, op.conj()) - 0.5 * np.kron(op_dag_op, eye)
                        - 0.5 * np.kron(eye, op_dag_op.T))
    return L


def evolve_lindblad(
    model: SystemModel,
    channels: Sequence[CollapseChannel],
    rho0: DensityMatrix,
    t: float,
    samples: int = 2,
    tol: float = 1e-10,
) -> Trajectory:
    """
    d rho/dt = -i[H, rho] + sum_k r_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho}).

    Small systems use the exponential of the dense superoperator over one sample step;
    larger ones integrate the matrix equation with DOP853.

    Raises:
        PositivityError: a sample has an eigenvalue below -1e-6
    """
    _check_dimension(model, rho0.dimension)
    for ch in channels:
        if ch.operator.shape != model.hamiltonian.shape:
            raise DimensionMismatchError(f"channel {ch.label} operator shape {ch.operator.shape} "
                                         f"does not match model {model.hamiltonian.shape}")
    times = _sample_times(t, samples)
    dim = model.dimension
    H = np.asarray(model.hamiltonian)

    if dim <= DENSE_SUPEROPERATOR_MAX_DIM:
        method = "superoperator-expm"
        vec = rho0.matrix.reshape(-1)
        states = [rho0.matrix.copy()]
        if len(times) > 1:
            step = linalg.expm(_lindblad_superoperator(H, channels) * (times[1] - times[0]))
            for _ in times[1:]:
                vec = step @ vec
                states.append(vec.reshape(dim, dim))
        elif times[0] > 0:
            vec = linalg.expm(_lindblad_superoperator(H, channels) * times[0]) @ vec
            states = [vec.reshape(dim, dim)]
        states = np.array(states)
    else:
        method = "DOP853"
        h_eff = H - 0.5j * sum((ch.rate * ch.operator.conj().T @ ch.operator for ch in channels),
                               np.zeros_like(H))
        jumps = [(ch.rate, ch.operator, ch.operator.conj().T) for ch in channels]

        def rhs(_time: float, y: np.ndarray) -> np.ndarray:
            rho = y.reshape(dim, dim)
            out = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
            for rate, op, op_dag in jumps:
                out += rate * (op @ rho @ op_dag)
            return out.reshape(-1)

        if times[-1] == 0.0:
            states = rho0.matrix[np.newaxis].copy()
        else:
            sol = solve_ivp(rhs, (0.0, times[-1]), rho0.matrix.reshape(-1), method="DOP853",
                            t_eval=times, rtol=tol, atol=tol)
            if sol.status != 0:
                raise StiffnessError(f"Lindblad integration failed: {sol.message}", {"tol": tol})
            states = sol.y.T.reshape(len(times), dim, dim)

    min_eigs = np.array([linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] for rho in states])
    worst = int(np.argmin(min_eigs))
    if min_eigs[worst] < -POSITIVITY_LIMIT:
        raise PositivityError(f"density matrix lost positivity at t={times[worst]:.3e}s",
                              {"min_eigenvalue": float(min_eigs[worst]), "t": float(times[worst]),
                               "method": method})
    trace_drift = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)))
    logger.info(f"Lindblad evolution ({method}, dim={dim}, channels={len(channels)}): "
                f"trace drift {trace_drift:.2e}, min eigenvalue {min_eigs.min():.2e}")
    return _make_trajectory(model, times, states,
                            {"trace_drift": trace_drift, "min_eigenvalue": float(min_eigs.min()),
                             "method": method})


# ==================== METRICS ====================

def _as_array(x: Union[StateVector, DensityMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.amplitudes
    if isinstance(x, DensityMatrix):
        return x.matrix
    return np.asarray(x, dtype=complex)


def fidelity(a: Union[StateVector, DensityMatrix, np.ndarray],
             b: Union[StateVector, DensityMatrix, np.ndarray],
             up_to_global_phase: bool = True) -> float:
    """
    State fidelity in [0, 1].

    Pure states: |<a|b>|^2 with the flag set. With the flag unset the comparison is phase
    sensitive: max(Re<a|b>, 0)^2, which equals |<a|b>|^2 only when the overlap is real and
    positive. A pure/mixed pair gives <psi|rho|psi>; two mixed states give the Uhlmann
    fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
    """
    x, y = _as_array(a), _as_array(b)
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"cannot compare states of dimension {x.shape[0]} and {y.shape[0]}")
    if x.ndim == 1 and y.ndim == 1:
        overlap = np.vdot(x, y)
        value = abs(overlap) ** 2 if up_to_global_phase else max(overlap.real, 0.0) ** 2
    elif x.ndim == 1 or y.ndim == 1:
        psi, rho = (x, y) if x.ndim == 1 else (y, x)
        value = float(np.real(np.vdot(psi, rho @ psi)))
    else:
        root = linalg.sqrtm(x)
        value = float(np.real(np.trace(linalg.sqrtm(root @ y @ root))) ** 2)
    return float(min(max(value, 0.0), 1.0))


def qubit_density(model: SystemModel, state: Union[StateVector, DensityMatrix, np.ndarray]) -> np.ndarray:
    """
    Reduced density matrix on the computational subspace: the cavity is traced out and
    the |a> components are dropped (result is not renormalized).
    """
    x = _as_array(state)
    rho = np.outer(x, x.conj()) if x.ndim == 1 else x
    dims = model.dims
    nq = model.n_squids
    tensor = rho.reshape(dims + dims)
    if model.has_cavity:
        tensor = np.trace(tensor, axis1=nq, axis2=2 * nq + 1)
    keep = (slice(0, 2),) * (2 * nq)
    tensor = tensor[keep]
    size = 2 ** nq
    return tensor.reshape(size, size)


_SIGMA_Y2 = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(state: Union[StateVector, DensityMatrix, np.ndarray]) -> float:
    """Wootters concurrence of a two-qubit pure state (length 4) or density matrix (4x4)."""
    x = _as_array(state)
    if x.shape[0] != 4:
        raise DimensionMismatchError(f"concurrence needs a two-qubit state, got dimension {x.shape[0]}")
    if x.ndim == 1:
        return float(2.0 * abs(x[0] * x[3] - x[1] * x[2]))
    rho = x / np.trace(x).real
    R = rho @ _SIGMA_Y2 @ rho.conj() @ _SIGMA_Y2
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(R).real)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


_WHICH = {"level_a": "pop_a_total", "cavity_photons": "n_photon"}


def _observable_for(traj: Trajectory, which: str) -> np.ndarray:
    if which not in _WHICH:
        raise ValueError(f"which must be one of {sorted(_WHICH)}, got {which!r}")
    return traj.observables.get(_WHICH[which], np.zeros(len(traj.times)))


def peak_populations(traj: Trajectory, which: str) -> float:
    """Maximum over samples of the |a> population (summed over SQUIDs) or photon number."""
    if len(traj.times) < 2:
        raise ValueError("peak populations need a trajectory with at least 2 samples")
    return float(np.max(_observable_for(traj, which)))


def average_population(traj: Trajectory, which: str) -> float:
    """Time average (trapezoid over the sample grid) of the same observables."""
    if len(traj.times) < 2:
        raise ValueError("average populations need a trajectory with at least 2 samples")
    values = _observable_for(traj, which)
    return float(trapezoid(values, traj.times) / (traj.times[-1] - traj.times[0]))


def expectation(traj: Trajectory, operator: np.ndarray) -> np.ndarray:
    """<O>(t_k) for every sample."""
    if traj.is_density:
        return np.real(np.einsum("ij,kji->k", operator, traj.states))
    return np.real(np.einsum("ki,ij,kj->k", traj.states.conj(), operator, traj.states))


# ==================== FRAMES ====================

def to_interaction_frame(model: SystemModel, state: np.ndarray, t: float) -> np.ndarray:
    """psi_int = exp(+i D t) psi with D the model's stored frame offsets."""
    return np.exp(1j * model.interaction_offsets * t) * np.asarray(state)


def to_lab_frame(model: SystemModel, state: np.ndarray, t: float) -> np.ndarray:
    if model.lab_phases is None:
        raise DimensionMismatchError(f"{model.variant.value} model carries no lab frame")
    return np.exp(-1j * model.lab_phases * t) * np.asarray(state)


def trajectory_in_interaction_frame(model: SystemModel, traj: Trajectory) -> np.ndarray:
    return np.exp(1j * np.outer(traj.times, model.interaction_offsets)) * traj.states


# ==================== EXPORT ====================

def trajectory_columns(traj: Trajectory) -> List[str]:
    columns = ["t_s"] + [name for name, _ in _population_columns(traj.n_squids)]
    if "pop_a_total" in traj.observables:
        columns.append("pop_a_total")
    if "n_photon" in traj.observables:
        columns.append("n_photon")
    if "fidelity_vs_target" in traj.observables:
        columns.append("fidelity_vs_target")
    return columns


def trajectory_rows(traj: Trajectory) -> Iterator[List[float]]:
    """Rows matching trajectory_columns (times first)."""
    columns = trajectory_columns(traj)
    for k, t in enumerate(traj.times):
        yield [float(t)] + [float(traj.observables[name][k]) for name in columns[1:]]
