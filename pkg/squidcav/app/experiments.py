"""
Experiment Runner
=================

Binds configuration to the physics modules: builds the working point and model, runs the
named experiment, persists CSV/JSON outputs and runs parameter sweeps.

Experiments: bell, transfer, cnot, swap, stark-sweep, lindblad-bell, spectrum, feasibility.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cavity_model import (
    CavityParams,
    CouplingInputs,
    DriveInput,
    SystemModel,
    Variant,
    WorkingPoint,
    build_effective,
    coupling_g,
    rabi_omega,
    working_point,
)
from config_loader import ExperimentConfig
from constants import CONSTANTS_TABLE, FLUX_QUANTUM, ghz_to_rad_per_s, joules_to_ghz, rad_per_s_to_ghz
from dynamics import (
    DensityMatrix,
    StateVector,
    average_population,
    cavity_decay_channel,
    concurrence,
    evolve_lindblad,
    fidelity,
    level_a_decay_channels,
    peak_populations,
    qubit_density,
    trajectory_columns,
    trajectory_rows,
)
from errors import ConfigError, MissingInputError, NormalizationError, SquidcavError
from feasibility import FeasibilityInputs, feasibility_report, format_table, t1_from_resistance
from protocols import (
    CnotReading,
    ProtocolReport,
    cnot_unitary,
    generate_bell,
    stark_sweep,
    swap_via_ancilla,
    transfer_state,
)
from result_writer import write_csv, write_json
from squid_spectrum import (
    GridConfig,
    SquidParams,
    beta_L,
    potential_minima,
    potential_profile,
    solve_squid_spectrum,
)

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = "1.0.0"
LINDBLAD_TOLERANCE = 1e-8
POTENTIAL_SAMPLES = 801


@dataclass
class ResultRecord:
    config_hash: str
    experiment: str
    payload: Dict[str, Any]
    summary: Dict[str, float] = field(default_factory=dict)
    duration_s: float = 0.0
    version: str = ARTIFACT_VERSION
    swept: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "experiment": self.experiment,
            "version": self.version,
            "duration_s": self.duration_s,
            "swept": self.swept,
            "error": self.error,
            "summary": self.summary,
            "outputs": self.outputs,
            "payload": self.payload,
        }


# ==================== BUILDERS ====================

def squid_params(config: ExperimentConfig) -> List[SquidParams]:
    params = []
    for i, s in enumerate(config.section("squids")):
        try:
            params.append(SquidParams.from_device_units(
                s["C_fF"], s["L_pH"], s["Ic_uA"], s["Phix_Phi0"]))
        except ValueError as e:
            raise ConfigError(str(e), f"/squids/{i}")
    return params


def grid_config(config: ExperimentConfig) -> GridConfig:
    grid = config.section("grid")
    try:
        return GridConfig(num_points=grid["num_points"], domain_halfwidth=grid["domain_halfwidth"])
    except ValueError as e:
        raise ConfigError(str(e), "/grid")


def solve_spectrum(config: ExperimentConfig, params: SquidParams):
    grid = config.section("grid")
    return solve_squid_spectrum(
        params,
        grid_config(config),
        level_a_index=grid["level_a_index"],
        n_levels=grid["n_levels"],
        check_convergence=grid["check_convergence"],
        require_lambda=grid["require_lambda"],
    )


def drive_inputs(config: ExperimentConfig) -> List[DriveInput]:
    return [
        DriveInput(
            rabi=d["Omega_per_s"],
            omega_uw=None if d["omega_uw_GHz"] is None else ghz_to_rad_per_s(d["omega_uw_GHz"]),
            delta_uw=d["Delta_uw_per_s"],
        )
        for d in config.section("drive")
    ]


def build_working_point(config: ExperimentConfig) -> WorkingPoint:
    """
    Working point from the ratios, the per-SQUID drive entries and, when requested, the
    solved spectrum of every configured SQUID.

    A cavity field integral (coupling.Bc_integral_Tm2) sets g per SQUID through coupling_g
    at the configured omega_c, and the cavity stays at omega_c instead of following
    Delta_c_over_g. A microwave field integral sets Omega per SQUID through rabi_omega.
    Either integral needs the spectra, so it implies working_point.use_spectrum.
    """
    wp = config.section("working_point")
    cavity = config.section("cavity")
    coupling = config.section("coupling")
    delta_c_ratio, delta_uw_ratio = wp["Delta_c_over_g"], wp["Delta_uw_over_Omega"]
    if wp["dispersive_ratio"] is not None:
        delta_c_ratio = delta_uw_ratio = wp["dispersive_ratio"]
    omega_c = ghz_to_rad_per_s(cavity["omega_c_GHz"])
    bc, bmw = coupling["Bc_integral_Tm2"], coupling["Bmw_integral_Tm2"]

    spectra, couplings, rabis = None, None, None
    if wp["use_spectrum"] or bc is not None or bmw is not None:
        params = squid_params(config)
        spectra = [solve_spectrum(config, p) for p in params]
        inputs = CouplingInputs(bc or 0.0, bmw or 0.0)
        if bc is not None:
            at_omega_c = CavityParams(omega_c=omega_c, g=0.0, n_max=cavity["n_max"])
            couplings = [coupling_g(s, inputs, at_omega_c, p) for s, p in zip(spectra, params)]
            logger.info(f"g from the cavity field integral: {couplings}")
        if bmw is not None:
            rabis = [rabi_omega(s, inputs, p) for s, p in zip(spectra, params)]
            logger.info(f"Omega from the microwave field integral: {rabis}")

    try:
        point = working_point(
            g=cavity["g"],
            g_over_Omega=wp["g_over_Omega"],
            Delta_c_over_g=delta_c_ratio,
            Delta_uw_over_Omega=delta_uw_ratio,
            omega_c=omega_c,
            omega_10=ghz_to_rad_per_s(wp["omega_10_GHz"]),
            n_max=cavity["n_max"],
            quality_factor=cavity["quality_factor"],
            levels=spectra,
            drives=drive_inputs(config),
            couplings=couplings,
            rabis=rabis,
        )
        # every SQUID must sit in a valid detuning regime, not just SQUID I
        point.per_squid_effective()
        return point
    except SquidcavError:
        raise
    except ValueError as e:
        raise ConfigError(f"working point is not realizable: {e}", "/working_point")


def build_model(config: ExperimentConfig, wp: WorkingPoint) -> SystemModel:
    if config.model == "full":
        return wp.full_model(n_squids=2)
    if config.model == "effective-photon":
        return build_effective(Variant.EFF_TWO_PHOTON, wp.eff, n_max=wp.cavity.n_max)
    return build_effective(Variant.EFF_TWO_VACUUM, wp.eff)


def _complex(pair: Sequence[float]) -> complex:
    return complex(pair[0], pair[1])


# ==================== EXPERIMENTS ====================

class ExperimentRunner:
    """
    Runs one configuration and writes its outputs.

    Args:
        output_dir: directory for CSV/JSON outputs; nothing is written when None
    """

    def __init__(self, output_dir: Optional[Path] = None):
        self.output_dir = Path(output_dir) if output_dir else None
        self._handlers: Dict[str, Callable[[ExperimentConfig], Tuple[Dict[str, Any], Dict[str, float], Dict[str, Tuple]]]] = {
            "bell": self._bell,
            "transfer": self._transfer,
            "cnot": self._cnot,
            "swap": self._swap,
            "stark-sweep": self._stark_sweep,
            "lindblad-bell": self._lindblad_bell,
            "spectrum": self._spectrum,
            "feasibility": self._feasibility,
        }

    def run(self, config: ExperimentConfig) -> ResultRecord:
        started = time.perf_counter()
        config_hash = config.config_hash()
        logger.info(f"Running {config.experiment} (model={config.model}, hash={config_hash[:12]})")
        try:
            payload, summary, tables = self._handlers[config.experiment](config)
        except SquidcavError as e:
            e.context = {"experiment": config.experiment, "config_hash": config_hash}
            logger.error(f"{config.experiment} failed [{config_hash[:12]}]: {e}")
            raise
        record = ResultRecord(
            config_hash=config_hash,
            experiment=config.experiment,
            payload=payload,
            summary=summary,
            duration_s=time.perf_counter() - started,
        )
        if self.output_dir is not None:
            for name, (header, rows) in tables.items():
                record.outputs[name] = str(write_csv(self.output_dir / name, header, rows))
            result_path = self.output_dir / f"{config.experiment}.json"
            record.outputs["result"] = str(result_path)
            write_json(result_path, record.to_dict())
        return record

    # -------- protocol experiments --------

    def _protocol_result(self, config: ExperimentConfig, wp: WorkingPoint, report: ProtocolReport):
        payload = report.to_dict()
        payload["effective_params"] = wp.eff.to_dict()
        if wp.n_configured > 1:
            payload["squid_effective_params"] = [e.to_dict() for e in wp.per_squid_effective()]
        summary = {"fidelity": report.fidelity}
        for key in ("worst_case_fidelity", "phase_sensitive_fidelity", "concurrence"):
            if key in report.extras:
                summary[key] = report.extras[key]
        if report.distance is not None:
            summary["distance"] = report.distance
        summary.update(report.populations)
        tables = {}
        if report.trajectory is not None and config.section("output")["trajectory_csv"]:
            traj = report.trajectory
            tables[f"{report.name}_trajectory.csv"] = (trajectory_columns(traj), list(trajectory_rows(traj)))
        return payload, summary, tables

    def _bell(self, config: ExperimentConfig):
        wp = build_working_point(config)
        protocols = config.section("protocols")
        report = generate_bell(build_model(config, wp), wp.eff, tuple(protocols["bell_initial"]),
                               samples=protocols["samples"])
        return self._protocol_result(config, wp, report)

    def _transfer(self, config: ExperimentConfig):
        wp = build_working_point(config)
        protocols = config.section("protocols")
        report = transfer_state(build_model(config, wp), wp.eff, _complex(protocols["alpha"]),
                                _complex(protocols["beta"]), samples=protocols["samples"])
        return self._protocol_result(config, wp, report)

    def _cnot(self, config: ExperimentConfig):
        wp = build_working_point(config)
        reading = config.section("protocols")["cnot_reading"]
        report = cnot_unitary(wp.eff, CnotReading.from_dict(reading) if reading else None)
        return self._protocol_result(config, wp, report)

    def _swap(self, config: ExperimentConfig):
        wp = build_working_point(config)
        return self._protocol_result(config, wp, swap_via_ancilla(wp.eff))

    def _stark_sweep(self, config: ExperimentConfig):
        wp = build_working_point(config)
        protocols = config.section("protocols")
        if protocols["stark_amplitudes"] is not None:
            amplitudes = np.array([_complex(p) for p in protocols["stark_amplitudes"]])
            norm = float(np.sum(np.abs(amplitudes) ** 2))
            if abs(norm - 1.0) > 1e-9:
                raise NormalizationError(f"stark_amplitudes have norm^2 {norm!r}, expected 1")
        else:
            rng = np.random.default_rng(config.seed)
            amplitudes = rng.normal(size=4) + 1j * rng.normal(size=4)
            amplitudes /= np.linalg.norm(amplitudes)
        thetas = np.linspace(protocols["stark_theta_min"], protocols["stark_theta_max"],
                             protocols["stark_steps"])
        rows = stark_sweep(amplitudes, thetas, wp.eff)
        max_diff = max(r["abs_diff"] for r in rows)
        payload = {
            "amplitudes": [[a.real, a.imag] for a in amplitudes],
            "steps": len(rows),
            "max_abs_diff": max_diff,
            "Pe_at_theta_max": rows[-1]["Pe_closed_form"],
            "effective_params": wp.eff.to_dict(),
        }
        summary = {"max_abs_diff": max_diff, "Pe_at_theta_max": rows[-1]["Pe_closed_form"],
                   "Pe_oracle_at_theta_max": rows[-1]["Pe_oracle"]}
        header = ["theta", "Pe_closed_form", "Pe_oracle", "abs_diff"]
        tables = {"stark_sweep.csv": (header, [[r[h] for h in header] for r in rows])}
        return payload, summary, tables

    # -------- open system --------

    def _lindblad_bell(self, config: ExperimentConfig):
        """Bell protocol on the full model with level-|a> decay and cavity decay."""
        wp = build_working_point(config)
        model = wp.full_model(n_squids=2)
        deco = config.section("decoherence")
        if deco["t1_s"] is None and deco["resistance_ohm"] is None:
            raise MissingInputError("lindblad-bell needs decoherence.t1_s or decoherence.resistance_ohm")
        t1 = deco["t1_s"] if deco["t1_s"] is not None else t1_from_resistance(deco["resistance_ohm"])
        channels = level_a_decay_channels(model, t1)
        if deco["cavity_decay"] and wp.cavity.kappa > 0:
            channels.append(cavity_decay_channel(model, wp.cavity.kappa))

        initial = tuple(config.section("protocols")["bell_initial"])
        psi0 = np.zeros(model.dimension, dtype=complex)
        psi0[model.qubit_index(initial)] = 1.0
        t = math.pi / (4.0 * wp.eff.gamma)
        traj = evolve_lindblad(model, channels, DensityMatrix.from_state(StateVector(psi0, model.dims)),
                               t, samples=deco["samples"], tol=LINDBLAD_TOLERANCE)

        ideal = generate_bell(build_effective(Variant.EFF_TWO_VACUUM, wp.eff), wp.eff, initial)
        target = np.zeros(model.dimension, dtype=complex)
        target[model.qubit_subspace()] = ideal.target
        phases = np.exp(1j * model.interaction_offsets * t)
        rho_final = phases[:, None] * traj.final * phases.conj()[None, :]
        fid = fidelity(target, rho_final)
        ent = concurrence(qubit_density(model, rho_final))
        populations = {
            "peak_P_a": peak_populations(traj, "level_a"),
            "mean_P_a": average_population(traj, "level_a"),
            "peak_n_photon": peak_populations(traj, "cavity_photons"),
            "mean_n_photon": average_population(traj, "cavity_photons"),
        }
        payload = {
            "fidelity": fid,
            "concurrence": ent,
            "t_s": t,
            "T1_s": t1,
            "kappa_per_s": wp.cavity.kappa if deco["cavity_decay"] else 0.0,
            "channels": [ch.label for ch in channels],
            "populations": populations,
            "diagnostics": traj.diagnostics,
            "effective_params": wp.eff.to_dict(),
        }
        summary = {"fidelity": fid, "concurrence": ent, **populations}
        tables = {}
        if config.section("output")["trajectory_csv"]:
            tables["lindblad_bell_trajectory.csv"] = (trajectory_columns(traj), list(trajectory_rows(traj)))
        return payload, summary, tables

    # -------- device level --------

    def _spectrum(self, config: ExperimentConfig):
        payload: Dict[str, Any] = {"squids": [], "constants": dict(CONSTANTS_TABLE)}
        summary: Dict[str, float] = {}
        tables = {}
        for i, params in enumerate(squid_params(config)):
            spectrum = solve_spectrum(config, params)
            energies_ghz = [joules_to_ghz(e - spectrum.energies[0]) for e in spectrum.energies]
            minima = potential_minima(params)
            payload["squids"].append({
                "beta_L": beta_L(params),
                "energies_GHz": energies_ghz,
                "level_map": spectrum.level_map,
                "omega_a0_over_2pi_GHz": rad_per_s_to_ghz(spectrum.omega_a0),
                "omega_a1_over_2pi_GHz": rad_per_s_to_ghz(spectrum.omega_a1),
                "omega_10_over_2pi_GHz": rad_per_s_to_ghz(spectrum.omega_10),
                "flux_me_0a_Phi0": spectrum.flux_me("0", "a") / FLUX_QUANTUM,
                "flux_me_1a_Phi0": spectrum.flux_me("1", "a") / FLUX_QUANTUM,
                "flux_me_01_Phi0": spectrum.flux_me("0", "1") / FLUX_QUANTUM,
                "mean_flux_Phi0": {k: v / FLUX_QUANTUM for k, v in spectrum.mean_flux.items()},
                "lambda_valid": spectrum.lambda_valid,
                "lambda_candidates": spectrum.lambda_candidates,
                "relative_error": spectrum.relative_error,
                "orthonormality_error": spectrum.orthonormality_error,
                "max_residual": spectrum.max_residual,
                "potential_minima_Phi0": (minima / FLUX_QUANTUM).tolist(),
            })
            summary[f"omega_a0_GHz_{i}"] = rad_per_s_to_ghz(spectrum.omega_a0)
            labels = {index: label for label, index in spectrum.level_map.items()}
            tables[f"spectrum_{i}.csv"] = (
                ["level", "index", "E_over_h_GHz"],
                [[labels.get(k, ""), k, e] for k, e in enumerate(energies_ghz)],
            )
            tables[f"flux_elements_{i}.csv"] = (
                ["i", "j", "flux_me_Wb"],
                [[r, c, float(spectrum.flux_matrix[r, c])]
                 for r in range(len(energies_ghz)) for c in range(len(energies_ghz))],
            )
            profile = potential_profile(params, POTENTIAL_SAMPLES)
            tables[f"potential_{i}.csv"] = (["flux_Phi0", "U_GHz"],
                                            [[phi / FLUX_QUANTUM, joules_to_ghz(u)] for phi, u in profile])
        return payload, summary, tables

    def _feasibility(self, config: ExperimentConfig):
        wp = build_working_point(config)
        section = config.section("feasibility")
        p_a, p_c = section["P_a"], section["P_c"]
        measured: Dict[str, float] = {}
        if section["measure_populations"]:
            model = wp.full_model(n_squids=2)
            bell = generate_bell(model, wp.eff, samples=config.section("protocols")["samples"])
            measured = {"P_a": bell.populations["peak_P_a"], "P_c": bell.populations["peak_n_photon"]}
            p_a = p_a if p_a is not None else measured["P_a"]
            p_c = p_c if p_c is not None else measured["P_c"]
        report = feasibility_report(FeasibilityInputs(
            eff=wp.eff,
            omega_c=wp.cavity.omega_c,
            quality_factor=wp.cavity.quality_factor,
            resistance=section["resistance_ohm"],
            t1=section["t1_s"],
            p_a=p_a,
            p_c=p_c,
        ))
        payload = report.to_dict()
        payload["measured_populations"] = measured
        payload["table"] = format_table(report)
        summary = {k: float(v) for k, v in report.to_dict().items() if isinstance(v, (int, float))}
        return payload, summary, {}


def run_experiment(config: ExperimentConfig, output_dir: Optional[Path] = None) -> ResultRecord:
    return ExperimentRunner(output_dir).run(config)


# ==================== SWEEPS ====================

def _run_point(overrides: Dict[str, Any], path: str, value: float) -> ResultRecord:
    swept = {"path": path, "value": value}
    try:
        config = ExperimentConfig(overrides).with_value(path, value)
        record = ExperimentRunner(None).run(config)
        record.swept = swept
        return record
    except Exception as e:
        logger.error(f"Sweep point {path}={value} failed: {e}")
        return ResultRecord(config_hash="", experiment=overrides.get("experiment", "?"),
                            payload={}, swept=swept, error=f"{type(e).__name__}: {e}")


def sweep(config: ExperimentConfig, path: str, values: Sequence[float], workers: int = 1,
          output_dir: Optional[Path] = None) -> List[ResultRecord]:
    """
    One record per value, in input order. Points run independently (in worker processes
    when workers > 1) and a failing point yields a record carrying the error. Outputs are
    written once after all points finish.

    Raises:
        SweepPathError: path does not resolve to a numeric field
    """
    config.check_numeric_path(path)
    if not values:
        return []
    values = [float(v) for v in values]
    overrides = config.overrides
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_point, [overrides] * len(values), [path] * len(values), values))
    else:
        records = [_run_point(overrides, path, v) for v in values]
    failed = sum(not r.ok for r in records)
    logger.info(f"Sweep {path}: {len(records) - failed}/{len(records)} points succeeded")

    if output_dir is not None:
        keys = sorted({k for r in records for k in r.summary})
        header = [path] + keys + ["error"]
        rows = [[r.swept["value"]] + [r.summary.get(k, "") for k in keys] + [r.error or ""] for r in records]
        write_csv(Path(output_dir) / "sweep.csv", header, rows)
        write_json(Path(output_dir) / "sweep.json", {
            "config_hash": config.config_hash(),
            "path": path,
            "records": [r.to_dict() for r in records],
        })
    return records
