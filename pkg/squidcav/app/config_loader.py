"""
Experiment Configuration
========================

A single JSON document merged over built-in defaults (the protocol working point) and
validated before any computation. Unknown keys and bad values are reported with JSON
pointers, e.g. `/cavity/n_max: must be an integer >= 1`.
"""

import copy
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from errors import ConfigError, SweepPathError, UnknownExperimentError

logger = logging.getLogger(__name__)

EXPERIMENTS = ("bell", "transfer", "cnot", "swap", "stark-sweep", "lindblad-bell",
               "spectrum", "feasibility")
MODELS = ("effective", "full", "effective-photon")
# model.variant spelling of the model choice
VARIANT_MODELS = {
    "EFF_TWO_VACUUM": "effective",
    "FULL_ROTATING": "full",
    "EFF_TWO_PHOTON": "effective-photon",
}
CNOT_SLOTS = ("H", "H_inv", "Hbar", "Hbar_inv")

DEFAULT_SQUID = {"C_fF": 90.0, "L_pH": 100.0, "Ic_uA": 3.75, "Phix_Phi0": 0.4995}
DEFAULT_DRIVE = {"Omega_per_s": None, "omega_uw_GHz": None, "Delta_uw_per_s": None}

DEFAULT_CONFIG: Dict[str, Any] = {
    "experiment": "bell",
    "model": "effective",
    "seed": 0,
    "squids": [dict(DEFAULT_SQUID)],
    "grid": {
        "num_points": 512,
        "domain_halfwidth": 0.5,
        "n_levels": 6,
        "level_a_index": 3,
        "check_convergence": True,
        "require_lambda": False,
    },
    "cavity": {"omega_c_GHz": 29.7, "g": 1.8e8, "n_max": 5, "quality_factor": 2e4},
    "drive": [],
    "coupling": {"Bc_integral_Tm2": None, "Bmw_integral_Tm2": None},
    "working_point": {
        "g_over_Omega": 1.2,
        "Delta_c_over_g": 10.0,
        "Delta_uw_over_Omega": 10.0,
        "dispersive_ratio": None,
        "omega_10_GHz": 5.0,
        "use_spectrum": False,
    },
    "protocols": {
        "samples": 2001,
        "bell_initial": [0, 1],
        "alpha": [math.sqrt(0.5), 0.0],
        "beta": [math.sqrt(0.5), 0.0],
        "cnot_reading": None,
        "stark_theta_min": 0.0,
        "stark_theta_max": 4.0 * math.pi,
        "stark_steps": 256,
        "stark_amplitudes": None,
    },
    "decoherence": {
        "t1_s": 15e-6,
        "resistance_ohm": None,
        "cavity_decay": True,
        "samples": 201,
    },
    "feasibility": {
        "resistance_ohm": 1e9,
        "t1_s": None,
        "P_a": None,
        "P_c": None,
        "measure_populations": False,
    },
    "sweep": {"path": None, "values": [], "workers": 1},
    "output": {"dir": None, "trajectory_csv": True},
}

# sections excluded from the reproducibility hash
UNHASHED_SECTIONS = ("output",)

# alternative key spellings, rewritten onto the canonical keys before merging
SECTION_ALIASES: Dict[str, Dict[str, str]] = {
    "grid": {"points": "num_points", "halfwidth_Phi0": "domain_halfwidth"},
    "cavity": {"g_per_s": "g", "Q": "quality_factor"},
}


# ==================== LEAF RULES ====================

Rule = Callable[[Any], Optional[str]]


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def number(minimum: Optional[float] = None, exclusive: bool = True, nullable: bool = False) -> Rule:
    def check(value):
        if value is None and nullable:
            return None
        if not _is_number(value):
            return "must be a finite number" + (" or null" if nullable else "")
        if minimum is not None and (value <= minimum if exclusive else value < minimum):
            return f"must be {'>' if exclusive else '>='} {minimum}"
        return None
    return check


def integer(minimum: int, nullable: bool = False, power_of_two: bool = False) -> Rule:
    def check(value):
        if value is None and nullable:
            return None
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            return f"must be an integer >= {minimum}"
        if power_of_two and value & (value - 1):
            return "must be a power of two"
        return None
    return check


def fraction(value: Any) -> Optional[str]:
    if _is_number(value) and 0.0 <= value < 1.0:
        return None
    return "must be a number in [0, 1)"


def boolean(value: Any) -> Optional[str]:
    return None if isinstance(value, bool) else "must be true or false"


def choice(options: Sequence[str]) -> Rule:
    def check(value):
        return None if value in options else f"must be one of {list(options)}"
    return check


def complex_pair(value: Any) -> Optional[str]:
    if isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value):
        return None
    return "must be [real, imag]"


def bit_pair(value: Any) -> Optional[str]:
    if isinstance(value, list) and len(value) == 2 and all(v in (0, 1) and not isinstance(v, bool) for v in value):
        return None
    return "must be a pair of bits, e.g. [0, 1]"


def optional_string(value: Any) -> Optional[str]:
    return None if value is None or isinstance(value, str) else "must be a string or null"


def number_list(value: Any) -> Optional[str]:
    if isinstance(value, list) and all(_is_number(v) for v in value):
        return None
    return "must be a list of numbers"


def stark_amplitudes(value: Any) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, list) and len(value) == 4 and all(complex_pair(v) is None for v in value):
        return None
    return "must be null or four [real, imag] pairs"


def cnot_reading(value: Any) -> Optional[str]:
    if value is None:
        return None
    if not isinstance(value, dict):
        return "must be null or an object"
    expected = {"out_II", "U_I", "U_II", "in_II_left", "in_I", "in_II_right", "sigma_y_on"}
    if set(value) != expected:
        return f"must have exactly the keys {sorted(expected)}"
    for key in ("U_I", "U_II"):
        if not (isinstance(value[key], list) and len(value[key]) == 2
                and all(v in CNOT_SLOTS for v in value[key])):
            return f"{key} must be two of {list(CNOT_SLOTS)}"
    for key in ("out_II", "in_II_left", "in_I", "in_II_right"):
        if value[key] not in CNOT_SLOTS:
            return f"{key} must be one of {list(CNOT_SLOTS)}"
    if value["sigma_y_on"] not in ("I", "II"):
        return "sigma_y_on must be 'I' or 'II'"
    return None


SQUID_RULES: Dict[str, Rule] = {
    "C_fF": number(0.0),
    "L_pH": number(0.0),
    "Ic_uA": number(0.0, exclusive=False),
    "Phix_Phi0": fraction,
}

DRIVE_RULES: Dict[str, Rule] = {
    "Omega_per_s": number(0.0, exclusive=False, nullable=True),
    "omega_uw_GHz": number(0.0, nullable=True),
    "Delta_uw_per_s": number(0.0, nullable=True),
}

# per-entry rules of the list sections
LIST_RULES: Dict[str, Dict[str, Rule]] = {"squids": SQUID_RULES, "drive": DRIVE_RULES}

LEAF_RULES: Dict[str, Rule] = {
    "/experiment": choice(EXPERIMENTS),
    "/model": choice(MODELS),
    "/seed": integer(0),
    "/grid/num_points": integer(64, power_of_two=True),
    "/grid/domain_halfwidth": number(0.0),
    "/grid/n_levels": integer(6),
    "/grid/level_a_index": integer(2, nullable=True),
    "/grid/check_convergence": boolean,
    "/grid/require_lambda": boolean,
    "/cavity/omega_c_GHz": number(0.0),
    "/cavity/g": number(0.0),
    "/cavity/n_max": integer(1),
    "/cavity/quality_factor": number(0.0, nullable=True),
    "/coupling/Bc_integral_Tm2": number(0.0, nullable=True),
    "/coupling/Bmw_integral_Tm2": number(0.0, nullable=True),
    "/working_point/g_over_Omega": number(0.0),
    "/working_point/Delta_c_over_g": number(0.0),
    "/working_point/Delta_uw_over_Omega": number(0.0),
    "/working_point/dispersive_ratio": number(0.0, nullable=True),
    "/working_point/omega_10_GHz": number(0.0),
    "/working_point/use_spectrum": boolean,
    "/protocols/samples": integer(2),
    "/protocols/bell_initial": bit_pair,
    "/protocols/alpha": complex_pair,
    "/protocols/beta": complex_pair,
    "/protocols/cnot_reading": cnot_reading,
    "/protocols/stark_theta_min": number(),
    "/protocols/stark_theta_max": number(),
    "/protocols/stark_steps": integer(2),
    "/protocols/stark_amplitudes": stark_amplitudes,
    "/decoherence/t1_s": number(0.0, nullable=True),
    "/decoherence/resistance_ohm": number(0.0, nullable=True),
    "/decoherence/cavity_decay": boolean,
    "/decoherence/samples": integer(2),
    "/feasibility/resistance_ohm": number(0.0, nullable=True),
    "/feasibility/t1_s": number(0.0, nullable=True),
    "/feasibility/P_a": number(0.0, nullable=True),
    "/feasibility/P_c": number(0.0, nullable=True),
    "/feasibility/measure_populations": boolean,
    "/sweep/path": optional_string,
    "/sweep/values": number_list,
    "/sweep/workers": integer(1),
    "/output/dir": optional_string,
    "/output/trajectory_csv": boolean,
}


# ==================== MERGE + VALIDATE ====================

# list sections: entry defaults and allowed lengths
LIST_SECTIONS: Dict[str, Tuple[Dict[str, Any], int]] = {
    "/squids": (DEFAULT_SQUID, 1),
    "/drive": (DEFAULT_DRIVE, 0),
}
MAX_SQUIDS = 3


def canonicalize(document: Dict[str, Any]) -> Dict[str, Any]:
    """
    Rewrite the accepted alternative spellings onto canonical keys: `squid` (one object)
    becomes `squids`, `model: {"variant": ...}` becomes the model name and the
    SECTION_ALIASES keys are renamed.
    """
    doc = copy.deepcopy(document)
    if "squid" in doc:
        if "squids" in doc:
            raise ConfigError("give either squid or squids", "/squid")
        doc["squids"] = [doc.pop("squid")]
    if isinstance(doc.get("model"), dict):
        doc["model"] = _model_from_variant(doc["model"])
    for section, aliases in SECTION_ALIASES.items():
        node = doc.get(section)
        if not isinstance(node, dict):
            continue
        for alias, key in aliases.items():
            if alias in node:
                if key in node:
                    raise ConfigError(f"give either {alias} or {key}", f"/{section}/{alias}")
                node[key] = node.pop(alias)
    coupling, cavity = doc.get("coupling"), doc.get("cavity")
    if (isinstance(coupling, dict) and coupling.get("Bc_integral_Tm2") is not None
            and isinstance(cavity, dict) and "g" in cavity):
        raise ConfigError("g follows from the cavity field integral; drop cavity.g",
                          "/coupling/Bc_integral_Tm2")
    return doc


def _model_from_variant(value: Dict[str, Any]) -> str:
    if set(value) != {"variant"}:
        raise ConfigError("must be a model name or {\"variant\": ...}", "/model")
    variant = value["variant"]
    if variant not in VARIANT_MODELS:
        raise ConfigError(f"must be one of {sorted(VARIANT_MODELS)} "
                          "(EFF_SINGLE holds one SQUID)", "/model/variant")
    return VARIANT_MODELS[variant]


def canonical_path(path: str) -> str:
    """Dotted path with aliases resolved, e.g. 'cavity.Q' -> 'cavity.quality_factor'."""
    if path.startswith("squid."):
        return "squids.0." + path[len("squid."):]
    parts = path.split(".")
    if len(parts) == 2 and parts[0] in SECTION_ALIASES:
        parts[1] = SECTION_ALIASES[parts[0]].get(parts[1], parts[1])
    return ".".join(parts)


def deep_merge(base: Dict[str, Any], override: Dict[str, Any], pointer: str = "") -> Dict[str, Any]:
    """Recursive dict merge; unknown keys raise ConfigError, lists replace wholesale."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{pointer}/{key}"
        if key not in base:
            raise ConfigError("unknown key", path)
        if isinstance(base[key], dict) and path != "/protocols/cnot_reading":
            if not isinstance(value, dict):
                raise ConfigError("must be an object", path)
            merged[key] = deep_merge(base[key], value, path)
        elif path in LIST_SECTIONS:
            merged[key] = _merge_list(value, path, *LIST_SECTIONS[path])
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _merge_list(value: Any, pointer: str, entry_default: Dict[str, Any],
                min_length: int) -> List[Dict[str, Any]]:
    if not isinstance(value, list) or not min_length <= len(value) <= MAX_SQUIDS:
        raise ConfigError(f"must be a list of {min_length} to {MAX_SQUIDS} objects", pointer)
    entries = []
    for i, entry in enumerate(value):
        if not isinstance(entry, dict):
            raise ConfigError("must be an object", f"{pointer}/{i}")
        entries.append(deep_merge(entry_default, entry, f"{pointer}/{i}"))
    return entries


def validate(config: Dict[str, Any]):
    for pointer, rule in LEAF_RULES.items():
        value = _resolve_pointer(config, pointer)
        problem = rule(value)
        if problem:
            error = UnknownExperimentError if pointer == "/experiment" else ConfigError
            raise error(problem, pointer)
    for section, rules in LIST_RULES.items():
        for i, entry in enumerate(config[section]):
            for key, rule in rules.items():
                problem = rule(entry[key])
                if problem:
                    raise ConfigError(problem, f"/{section}/{i}/{key}")

    n_squids, n_drives = len(config["squids"]), len(config["drive"])
    if n_squids > 1 and n_drives > n_squids:
        raise ConfigError(f"{n_drives} drive entries for {n_squids} SQUIDs", "/drive")
    for i, drive in enumerate(config["drive"]):
        if drive["omega_uw_GHz"] is not None and drive["Delta_uw_per_s"] is not None:
            raise ConfigError("give either omega_uw_GHz or Delta_uw_per_s",
                              f"/drive/{i}/Delta_uw_per_s")
        if drive["Omega_per_s"] is not None and config["coupling"]["Bmw_integral_Tm2"] is not None:
            raise ConfigError("Omega follows from coupling.Bmw_integral_Tm2; drop one of them",
                              f"/drive/{i}/Omega_per_s")

    if config["protocols"]["stark_theta_max"] < config["protocols"]["stark_theta_min"]:
        raise ConfigError("must be >= stark_theta_min", "/protocols/stark_theta_max")
    alpha, beta = config["protocols"]["alpha"], config["protocols"]["beta"]
    norm = alpha[0] ** 2 + alpha[1] ** 2 + beta[0] ** 2 + beta[1] ** 2
    if abs(norm - 1.0) > 1e-9:
        raise ConfigError(f"|alpha|^2 + |beta|^2 = {norm:.12g}, expected 1", "/protocols/beta")


def _resolve_pointer(config: Dict[str, Any], pointer: str) -> Any:
    node: Any = config
    for part in pointer.strip("/").split("/"):
        node = node[part]
    return node


# ==================== CONFIG OBJECT ====================

class ExperimentConfig:
    """Validated, merged configuration. Treat as immutable; use with_value to vary it."""

    def __init__(self, overrides: Optional[Dict[str, Any]] = None):
        """
        Args:
            overrides: partial document merged over DEFAULT_CONFIG
        """
        if overrides is not None and not isinstance(overrides, dict):
            raise ConfigError("configuration must be a JSON object", "")
        document = canonicalize(overrides or {})
        self._data = deep_merge(DEFAULT_CONFIG, document)
        validate(self._data)
        self._overrides = document

    @property
    def data(self) -> Dict[str, Any]:
        return copy.deepcopy(self._data)

    @property
    def experiment(self) -> str:
        return self._data["experiment"]

    @property
    def model(self) -> str:
        return self._data["model"]

    @property
    def seed(self) -> int:
        return self._data["seed"]

    def section(self, name: str) -> Dict[str, Any]:
        return copy.deepcopy(self._data[name])

    def get(self, path: str) -> Any:
        """Dotted lookup, e.g. get('working_point.Delta_c_over_g') or get('squids.1.C_fF')."""
        path = canonical_path(path)
        node: Any = self._data
        for part in path.split("."):
            if isinstance(node, list) and part.isdigit() and int(part) < len(node):
                node = node[int(part)]
            elif isinstance(node, dict) and part in node:
                node = node[part]
            else:
                raise SweepPathError("path does not resolve", "/" + path.replace(".", "/"))
        return node

    def with_overrides(self, **sections: Any) -> "ExperimentConfig":
        merged = copy.deepcopy(self._overrides)
        for key, value in sections.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
        return ExperimentConfig(merged)

    @property
    def overrides(self) -> Dict[str, Any]:
        return copy.deepcopy(self._overrides)

    def check_numeric_path(self, path: str):
        """Raise SweepPathError unless `path` names a numeric (possibly null) field."""
        path = canonical_path(path)
        pointer = "/" + path.replace(".", "/")
        current = self.get(path)
        parts = path.split(".")
        rule = LEAF_RULES.get(pointer)
        if rule is None and len(parts) == 3 and parts[0] in LIST_RULES:
            rule = LIST_RULES[parts[0]].get(parts[2])
        numeric = _is_number(current) or (current is None and rule is not None and rule(1.0) is None)
        if not numeric or rule is None:
            raise SweepPathError("path does not name a numeric field", pointer)

    def with_value(self, path: str, value: float) -> "ExperimentConfig":
        """Copy with one numeric field replaced."""
        self.check_numeric_path(path)
        parts = canonical_path(path).split(".")
        overrides = copy.deepcopy(self._overrides)
        if parts[0] in LIST_RULES:
            entries = overrides.get(parts[0], copy.deepcopy(self._data[parts[0]]))
            entries[int(parts[1])][parts[2]] = value
            overrides[parts[0]] = entries
        else:
            node = overrides
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        return ExperimentConfig(overrides)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of every semantically meaningful field."""
        semantic = {k: v for k, v in self._data.items() if k not in UNHASHED_SECTIONS}
        canonical = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return self.data


def load_config(path: Union[str, Path], **cli_overrides: Any) -> ExperimentConfig:
    """
    Read a JSON config and apply CLI overrides (model, seed, experiment, output dir).

    Raises:
        ConfigError: unreadable file, invalid JSON or schema violation
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "")
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON ({e.msg} at line {e.lineno})", "")
    if not isinstance(document, dict):
        raise ConfigError("configuration must be a JSON object", "")
    for key, value in cli_overrides.items():
        if value is None:
            continue
        if key == "output_dir":
            document.setdefault("output", {})["dir"] = str(value)
        else:
            document[key] = value
    config = ExperimentConfig(document)
    logger.info(f"Loaded config {path} (hash {config.config_hash()[:12]})")
    return config
