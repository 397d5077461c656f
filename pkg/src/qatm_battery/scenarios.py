"""Scenario catalog, config parsing, sweep orchestration and CSV emission.

A scenario bundles one parameter set, an initial state, a time grid and a
list of observables, optionally swept over a coupling.  Each run writes
one long-format CSV per field variant per observable plus a JSON manifest
with config echo, invariant checks and content digests.  Catalog entries
``fig2`` .. ``fig8`` reproduce the standard diagnostic plots of this
system at the default working point.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import observables as obs
from .dynamics import IntegrationError, Trajectory, default_backend, integrate
from .model import (
    KET_EXCITED,
    KET_GROUND,
    PLUS_STATE,
    ModelParams,
    bose_occupation,
    build_operators,
    composite_initial_state,
    machine_regime,
    verify_conservation_commutators,
    virtual_temperature,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """A scenario document violates the schema or a config invariant."""


#: per-stored-step state invariant tolerances checked on every run
TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-8

INITIAL_STATES = {
    "excited_charger_empty_battery": (KET_EXCITED, KET_GROUND),
    "plus_charger_empty_battery": (PLUS_STATE, KET_GROUND),
}

SWEEPABLE = ("g", "k", "f")


@dataclass(frozen=True)
class ObservableSpec:
    """How one observable is produced for CSV emission.

    ``grid`` is "dense" for quantities defined on every integrator step
    (sampled onto the output grid) or "stored" for quantities that need the
    full states kept every ``stride`` steps.  ``compute(traj, pair, base,
    idx)`` returns the values already on the output grid; expensive
    eigendecompositions run only at the sampled indices, except for the
    trace-distance derivative whose finite differencing needs the dense
    grid.
    """

    grid: str
    needs_pair: bool
    compute: Callable[[Trajectory, Optional[Trajectory], float, np.ndarray], np.ndarray]


def _sigma(sub: str):
    def compute(traj, pair, base, idx):
        return obs.trace_distance_derivative(traj, pair, sub).values[idx]

    return compute


def _delta_e(sub: str):
    def compute(traj, pair, base, idx):
        return obs.internal_energy(traj, sub).values[idx]

    return compute


def _coherence(sub: str):
    def compute(traj, pair, base, idx):
        return obs.coherence_values(traj.marginal(sub)[idx], base)

    return compute


OBSERVABLE_SPECS: dict[str, ObservableSpec] = {
    "sigma_B": ObservableSpec("dense", True, _sigma("B")),
    "sigma_C": ObservableSpec("dense", True, _sigma("C")),
    "sigma_M12": ObservableSpec("dense", True, _sigma("M12")),
    "mi_CB": ObservableSpec(
        "stored", False,
        lambda t, p, b, i: obs.mutual_information_cb_series(t, b).values,
    ),
    "mi_M12CB": ObservableSpec(
        "stored", False,
        lambda t, p, b, i: obs.mutual_information_m12cb_series(t, b).values,
    ),
    "delta_e_C": ObservableSpec("dense", False, _delta_e("C")),
    "delta_e_B": ObservableSpec("dense", False, _delta_e("B")),
    "delta_e_M12": ObservableSpec(
        "dense", False, lambda t, p, b, i: obs.machine_energy(t).values[i]
    ),
    "power_B": ObservableSpec(
        "dense", False,
        lambda t, p, b, i: obs.charging_power(obs.internal_energy(t, "B")).values[i],
    ),
    "coherence_C": ObservableSpec("dense", False, _coherence("C")),
    "coherence_B": ObservableSpec("dense", False, _coherence("B")),
    "ergotropy_B": ObservableSpec(
        "dense", False,
        lambda t, p, b, i: obs.ergotropy_fraction_values(t.marg_b[i]),
    ),
}

DEFAULT_OBSERVABLES = tuple(OBSERVABLE_SPECS)


def observable_units(name: str, base: float) -> str:
    if name.startswith("sigma_") or name == "power_B":
        return "1/time"
    if name.startswith("mi_") or name.startswith("coherence_"):
        return "bits" if base == 2.0 else "nats"
    return "dimensionless"


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    description: str = ""
    params: ModelParams = ModelParams()
    initial_state: str = "excited_charger_empty_battery"
    observables: tuple[str, ...] = DEFAULT_OBSERVABLES
    dt: float = 1e-3
    t_max: float = 100.0
    stride: int = 10
    sweep: Optional[SweepSpec] = None
    f_variants: Optional[tuple[float, ...]] = None
    output_points: Optional[int] = None
    sigma_pair: Optional[bool] = None  # None: inferred from observables

    def __post_init__(self):
        if self.initial_state not in INITIAL_STATES:
            raise ConfigError(
                f"initial_state: unknown value {self.initial_state!r}; "
                f"expected one of {sorted(INITIAL_STATES)}"
            )
        if not self.observables:
            raise ConfigError("observables: must name at least one observable")
        unknown = [o for o in self.observables if o not in OBSERVABLE_SPECS]
        if unknown:
            raise ConfigError(
                f"observables: unknown {unknown}; expected among {sorted(OBSERVABLE_SPECS)}"
            )
        if len(set(self.observables)) != len(self.observables):
            raise ConfigError("observables: duplicate entries")
        if not self.dt > 0:
            raise ConfigError(f"dt: must be > 0, got {self.dt}")
        if self.dt * self.params.omega_m2 > 0.05 * (1 + 1e-12):
            raise ConfigError(
                f"dt: dt * omega_m2 = {self.dt * self.params.omega_m2:.3g} exceeds "
                "the integrator stability guard 0.05"
            )
        if not self.t_max > 0:
            raise ConfigError(f"t_max: must be > 0, got {self.t_max}")
        if self.stride < 1:
            raise ConfigError(f"stride: must be >= 1, got {self.stride}")
        n_steps = int(round(self.t_max / self.dt))
        if self.sweep is not None:
            if self.sweep.parameter not in SWEEPABLE:
                raise ConfigError(
                    f"sweep.parameter: {self.sweep.parameter!r} not sweepable; use {SWEEPABLE}"
                )
            vals = self.sweep.values
            if not vals:
                raise ConfigError("sweep.values: must be non-empty")
            if any(not math.isfinite(v) for v in vals):
                raise ConfigError("sweep.values: all values must be finite")
            if any(v < 0 for v in vals):
                raise ConfigError("sweep.values: couplings must be >= 0")
            if len(set(vals)) != len(vals):
                raise ConfigError("sweep.values: values must be distinct")
            if self.sweep.parameter == "f" and self.f_variants is not None:
                raise ConfigError("sweep: cannot sweep f and list f_variants at once")
        if self.f_variants is not None:
            if not self.f_variants:
                raise ConfigError("f_variants: must be non-empty when given")
            if any(not math.isfinite(v) or v < 0 for v in self.f_variants):
                raise ConfigError("f_variants: entries must be finite and >= 0")
            if len(set(self.f_variants)) != len(self.f_variants):
                raise ConfigError("f_variants: entries must be distinct")
        if self.output_points is not None:
            if self.output_points < 2:
                raise ConfigError(f"output_points: need >= 2, got {self.output_points}")
            if self.output_points > n_steps + 1:
                raise ConfigError(
                    f"output_points: {self.output_points} exceeds grid size {n_steps + 1}"
                )
            stored_only = [o for o in self.observables if OBSERVABLE_SPECS[o].grid == "stored"]
            if stored_only:
                raise ConfigError(
                    f"output_points: {stored_only} live on the stored grid and "
                    "cannot be downsampled; drop output_points or these observables"
                )
        pair_needed = any(OBSERVABLE_SPECS[o].needs_pair for o in self.observables)
        if self.sigma_pair is False and pair_needed:
            raise ConfigError(
                "sigma_pair: trace-distance observables need the battery-flipped twin"
            )

    @property
    def effective_f_variants(self) -> tuple[float, ...]:
        return self.f_variants if self.f_variants is not None else (self.params.f,)

    @property
    def needs_pair(self) -> bool:
        if self.sigma_pair is not None:
            return self.sigma_pair
        return any(OBSERVABLE_SPECS[o].needs_pair for o in self.observables)

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# catalog

FOUR_COUPLINGS = (0.1, 0.3, 0.6, 0.9)
#: 40 evenly spaced couplings in (0, 0.1 * omega_m2]
COUPLING_GRID = tuple(float(x) for x in np.linspace(0.025, 1.0, 40))
DRIVE_VARIANTS = (0.0, 0.8)


def _catalog() -> dict[str, ScenarioConfig]:
    base = ModelParams()
    excited = "excited_charger_empty_battery"
    plus = "plus_charger_empty_battery"
    entries = [
        ScenarioConfig(
            name="fig2",
            description="trace-distance derivative of battery, charger and machine "
            "for four machine-charger couplings, with and without the drive",
            params=base, initial_state=excited,
            observables=("sigma_B", "sigma_C", "sigma_M12"),
            sweep=SweepSpec("g", FOUR_COUPLINGS), f_variants=DRIVE_VARIANTS,
        ),
        ScenarioConfig(
            name="fig3",
            description="charger-battery and machine-(charger+battery) mutual "
            "information for four machine-charger couplings",
            params=base, initial_state=excited,
            observables=("mi_CB", "mi_M12CB"),
            sweep=SweepSpec("g", FOUR_COUPLINGS), f_variants=DRIVE_VARIANTS,
        ),
        ScenarioConfig(
            name="fig4",
            description="normalized internal-energy changes of charger, battery "
            "and machine for four machine-charger couplings",
            params=base, initial_state=plus,
            observables=("delta_e_C", "delta_e_B", "delta_e_M12"),
            sweep=SweepSpec("g", FOUR_COUPLINGS), f_variants=DRIVE_VARIANTS,
        ),
        ScenarioConfig(
            name="fig5",
            description="charging-power density grid over time and machine-charger "
            "coupling",
            params=base, initial_state=plus,
            observables=("power_B",),
            sweep=SweepSpec("g", COUPLING_GRID), f_variants=DRIVE_VARIANTS,
            output_points=400,
        ),
        ScenarioConfig(
            name="fig6",
            description="relative entropy of coherence of charger and battery for "
            "four machine-charger couplings",
            params=base, initial_state=plus,
            observables=("coherence_C", "coherence_B"),
            sweep=SweepSpec("g", FOUR_COUPLINGS), f_variants=DRIVE_VARIANTS,
        ),
        ScenarioConfig(
            name="fig7",
            description="battery ergotropy density grid over time and "
            "machine-charger coupling",
            params=base, initial_state=plus,
            observables=("ergotropy_B",),
            sweep=SweepSpec("g", COUPLING_GRID), f_variants=DRIVE_VARIANTS,
            output_points=400,
        ),
        ScenarioConfig(
            name="fig8",
            description="battery information flow, coherence, charging power and "
            "ergotropy over time and charger-battery coupling, machine coupling "
            "fixed at g = 0.3, no drive",
            params=base, initial_state=plus,
            observables=("sigma_B", "coherence_B", "power_B", "ergotropy_B"),
            sweep=SweepSpec("k", COUPLING_GRID), f_variants=(0.0,),
            output_points=400,
        ),
    ]
    return {e.name: e for e in entries}


CATALOG = _catalog()


# ---------------------------------------------------------------------------
# config documents

_CONFIG_KEYS = {
    "name", "description", "params", "initial_state", "observables", "dt",
    "t_max", "stride", "sweep", "f_variants", "output_points", "sigma_pair",
}
_SWEEP_KEYS = {"parameter", "values"}
_PARAM_KEYS = set(ModelParams.__dataclass_fields__)


def _as_float(value, path: str, allow_inf: bool = False) -> float:
    if isinstance(value, str) and allow_inf and value.strip().lower() == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v) and not allow_inf:
        raise ConfigError(f"{path}: must be finite, got {v}")
    return v


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def load_config(source=None) -> ScenarioConfig:
    """Build a validated :class:`ScenarioConfig` from a JSON document.

    ``source`` may be None or an empty mapping (all defaults), a mapping,
    or a path to a JSON file.  Unknown keys are errors; messages carry the
    offending field path.  ``tau`` and ``t_max`` accept the string "inf".
    """
    if source is None:
        doc = {}
    elif isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")

    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}; allowed: {sorted(_CONFIG_KEYS)}")

    kwargs = {}
    if "name" in doc:
        if not isinstance(doc["name"], str) or not doc["name"]:
            raise ConfigError("name: expected a non-empty string")
        kwargs["name"] = doc["name"]
    if "description" in doc:
        if not isinstance(doc["description"], str):
            raise ConfigError("description: expected a string")
        kwargs["description"] = doc["description"]

    overrides = doc.get("params", {})
    if not isinstance(overrides, dict):
        raise ConfigError("params: expected an object of parameter overrides")
    bad = set(overrides) - _PARAM_KEYS
    if bad:
        raise ConfigError(f"params: unknown parameter(s) {sorted(bad)}")
    parsed = {
        key: _as_float(val, f"params.{key}", allow_inf=(key == "tau"))
        for key, val in overrides.items()
    }
    try:
        kwargs["params"] = ModelParams(**parsed)
    except ValueError as e:
        raise ConfigError(f"params: {e}") from e

    if "initial_state" in doc:
        if not isinstance(doc["initial_state"], str):
            raise ConfigError("initial_state: expected a string")
        kwargs["initial_state"] = doc["initial_state"]
    if "observables" in doc:
        seq = doc["observables"]
        if not isinstance(seq, list) or not all(isinstance(o, str) for o in seq):
            raise ConfigError("observables: expected a list of names")
        kwargs["observables"] = tuple(seq)
    if "dt" in doc:
        kwargs["dt"] = _as_float(doc["dt"], "dt")
    if "t_max" in doc:
        kwargs["t_max"] = _as_float(doc["t_max"], "t_max")
    if "stride" in doc:
        kwargs["stride"] = _as_int(doc["stride"], "stride")
    if "output_points" in doc and doc["output_points"] is not None:
        kwargs["output_points"] = _as_int(doc["output_points"], "output_points")
    if "sigma_pair" in doc and doc["sigma_pair"] is not None:
        if not isinstance(doc["sigma_pair"], bool):
            raise ConfigError("sigma_pair: expected true/false")
        kwargs["sigma_pair"] = doc["sigma_pair"]
    if "f_variants" in doc and doc["f_variants"] is not None:
        seq = doc["f_variants"]
        if not isinstance(seq, list):
            raise ConfigError("f_variants: expected a list of numbers")
        kwargs["f_variants"] = tuple(
            _as_float(v, f"f_variants[{i}]") for i, v in enumerate(seq)
        )
    if "sweep" in doc and doc["sweep"] is not None:
        sw = doc["sweep"]
        if not isinstance(sw, dict):
            raise ConfigError("sweep: expected an object with parameter and values")
        bad = set(sw) - _SWEEP_KEYS
        if bad:
            raise ConfigError(f"sweep: unknown key(s) {sorted(bad)}")
        if "parameter" not in sw or "values" not in sw:
            raise ConfigError("sweep: needs both parameter and values")
        if not isinstance(sw["parameter"], str):
            raise ConfigError("sweep.parameter: expected a string")
        if not isinstance(sw["values"], list):
            raise ConfigError("sweep.values: expected a list of numbers")
        values = tuple(
            _as_float(v, f"sweep.values[{i}]") for i, v in enumerate(sw["values"])
        )
        kwargs["sweep"] = SweepSpec(sw["parameter"], values)

    return ScenarioConfig(**kwargs)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """JSON-safe echo of a config (infinities become the string "inf")."""
    def _num(x):
        return "inf" if math.isinf(x) else x

    out = {
        "name": cfg.name,
        "description": cfg.description,
        "params": {k: _num(getattr(cfg.params, k)) for k in sorted(_PARAM_KEYS)},
        "initial_state": cfg.initial_state,
        "observables": list(cfg.observables),
        "dt": cfg.dt,
        "t_max": cfg.t_max,
        "stride": cfg.stride,
        "sweep": None if cfg.sweep is None else {
            "parameter": cfg.sweep.parameter,
            "values": list(cfg.sweep.values),
        },
        "f_variants": list(cfg.effective_f_variants),
        "output_points": cfg.output_points,
        "sigma_pair": cfg.needs_pair,
    }
    return out


def config_digest(cfg: ScenarioConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# execution

@dataclass
class JobResult:
    f_value: float
    sweep_value: Optional[float]
    series: dict  # observable -> (t, values)
    invariants: dict
    backend: str


def _output_indices(cfg: ScenarioConfig, n_steps: int) -> np.ndarray:
    if cfg.output_points is None:
        return np.arange(0, n_steps + 1, cfg.stride)
    return np.unique(np.round(np.linspace(0, n_steps, cfg.output_points)).astype(np.int64))


def _merge_worst(a: dict, b: dict) -> dict:
    return {
        "trace_deviation": max(a["trace_deviation"], b["trace_deviation"]),
        "hermiticity_defect": max(a["hermiticity_defect"], b["hermiticity_defect"]),
        "min_eigenvalue": min(a["min_eigenvalue"], b["min_eigenvalue"]),
    }


def _run_job(cfg: ScenarioConfig, f_value: float, sweep_value, base: float) -> JobResult:
    overrides = {"f": f_value}
    if cfg.sweep is not None and sweep_value is not None:
        overrides[cfg.sweep.parameter] = sweep_value
    p = cfg.params.replace(**overrides)
    charger, battery = INITIAL_STATES[cfg.initial_state]
    where = f"scenario {cfg.name}, f={f_value:g}" + (
        f", {cfg.sweep.parameter}={sweep_value:g}" if sweep_value is not None else ""
    )
    try:
        traj = integrate(p, composite_initial_state(p, charger, battery),
                         cfg.dt, cfg.t_max, cfg.stride)
        pair = None
        if cfg.needs_pair:
            pair = integrate(p, composite_initial_state(p, charger, KET_EXCITED),
                             cfg.dt, cfg.t_max, cfg.stride)
    except IntegrationError as e:
        raise IntegrationError(f"{where}: {e}") from e

    idx = _output_indices(cfg, traj.n_steps)
    series = {}
    for name in cfg.observables:
        spec = OBSERVABLE_SPECS[name]
        values = spec.compute(traj, pair, base, idx)
        t_out = traj.t[idx] if spec.grid == "dense" else traj.t_stored
        series[name] = (t_out, values)

    inv = traj.invariant_summary()
    if pair is not None:
        inv = _merge_worst(inv, pair.invariant_summary())
    return JobResult(f_value, sweep_value, series, inv, traj.backend)


def _float_tag(x: float) -> str:
    return ("%g" % x).replace(".", "p").replace("-", "m")


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, comments: list[str], header: str, rows) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(header)
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    blob = "\n".join(lines) + "\n"
    path.write_text(blob, encoding="utf-8", newline="\n")
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class RunResult:
    files: list[Path]
    manifest_path: Path
    manifest: dict


def run_scenario(cfg: ScenarioConfig, out_dir, threads: int = 1,
                 log_base: float = 2.0) -> RunResult:
    """Run every (f variant, sweep point) job of a scenario and emit one
    long-format CSV per f variant per observable plus a manifest.

    Jobs run in parallel when ``threads`` > 1; output is independent of
    the thread count.  Integration failures identify the offending job.
    """
    start = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_digest(cfg)

    sweep_values = cfg.sweep.values if cfg.sweep is not None else (None,)
    jobs = [(f, sv) for f in cfg.effective_f_variants for sv in sweep_values]
    logger.info("scenario %s: %d job(s), %d thread(s)", cfg.name, len(jobs), threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _run_job(cfg, job[0], job[1], log_base), jobs))
    else:
        results = [_run_job(cfg, f, sv, log_base) for f, sv in jobs]

    files = []
    digests = []
    for f_value in cfg.effective_f_variants:
        group = [r for r in results if r.f_value == f_value]
        for name in cfg.observables:
            units = observable_units(name, log_base)
            columns = ["t[time]"]
            if cfg.sweep is not None:
                columns.append(f"{cfg.sweep.parameter}[energy]")
            columns.append(f"{name}[{units}]")
            rows = []
            for r in group:
                t, vals = r.series[name]
                if cfg.sweep is not None:
                    rows.extend((ti, r.sweep_value, vi) for ti, vi in zip(t, vals))
                else:
                    rows.extend(zip(t, vals))
            path = out_dir / f"{cfg.name}_f{_float_tag(f_value)}_{name}.csv"
            sha = _write_csv(
                path,
                comments=[
                    f"scenario: {cfg.name}",
                    f"config sha256: {digest}",
                    f"observable: {name}  f: {f_value:g}"
                    + (f"  sweep: {cfg.sweep.parameter}" if cfg.sweep else ""),
                ],
                header=",".join(columns),
                rows=rows,
            )
            files.append(path)
            digests.append({"path": path.name, "sha256": sha})

    worst = results[0].invariants
    for r in results[1:]:
        worst = _merge_worst(worst, r.invariants)
    invariants = {
        "trace_deviation": {
            "worst": worst["trace_deviation"], "tolerance": TRACE_TOL,
            "pass": worst["trace_deviation"] <= TRACE_TOL,
        },
        "hermiticity_defect": {
            "worst": worst["hermiticity_defect"], "tolerance": HERMITICITY_TOL,
            "pass": worst["hermiticity_defect"] <= HERMITICITY_TOL,
        },
        "min_eigenvalue": {
            "worst": worst["min_eigenvalue"], "floor": EIGENVALUE_FLOOR,
            "pass": worst["min_eigenvalue"] >= EIGENVALUE_FLOOR,
        },
    }

    manifest = {
        "scenario": cfg.name,
        "config": config_to_dict(cfg),
        "config_sha256": digest,
        "integrator": {
            "method": "rk4",
            "backend": results[0].backend,
            "dt": cfg.dt,
            "t_max": cfg.t_max,
            "stride": cfg.stride,
        },
        "log_base": "e" if log_base != 2.0 else 2,
        "jobs": len(jobs),
        "threads": threads,
        "renormalization": {"max_step_drift": worst["trace_deviation"]},
        "invariants": invariants,
        "wall_time_s": round(time.perf_counter() - start, 3),
        "files": digests,
    }
    manifest_path = out_dir / f"{cfg.name}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return RunResult(files, manifest_path, manifest)


# ---------------------------------------------------------------------------
# self check

def self_check(verbose: bool = True) -> tuple[bool, dict]:
    """Fast bundled verification at the default working point.

    Checks operator identities, thermal-rate benchmarks, the virtual
    temperature and its regime, a closed-system conservation run, the
    two-qubit exchange oracle, the battery isolation limit and the state
    invariants of a short driven run.  Reports pass/fail per item; never
    raises on failure.
    """
    checks = []
    p = ModelParams()

    rep = verify_conservation_commutators(p.replace(f=0.8), t=0.4)
    checks.append((
        "conserved-commutator norms",
        rep.max_norm() <= 1e-12,
        f"machine-charger {rep.comm_machine_charger:.2e}, charger-battery "
        f"{rep.comm_charger_battery:.2e}, drive residual {rep.drive_residual:.2e}",
    ))

    tv = virtual_temperature(p)
    regime = machine_regime(p)
    checks.append((
        "virtual temperature",
        abs(tv - (-24.0)) <= 1e-9 and regime == "heat pump",
        f"T_v = {tv:.12g} ({tv / p.omega_m2:.6g} in units of omega_m2), regime: {regime}",
    ))

    ok_balance = True
    details = []
    for (label, gamma, temp, omega) in (("M1", p.gamma1, p.t1, p.omega_m1),
                                        ("M2", p.gamma2, p.t2, p.omega_m2)):
        nbar = bose_occupation(temp, omega)
        ratio = (gamma * nbar) / (gamma * (nbar + 1.0))
        err = abs(ratio - math.exp(-omega / temp))
        ok_balance &= err <= 1e-12
        details.append(f"{label}: {err:.1e}")
    checks.append(("detailed balance of jump rates", ok_balance, ", ".join(details)))

    closed = p.replace(gamma1=0.0, gamma2=0.0, f=0.0)
    rho0 = composite_initial_state(closed, KET_EXCITED, KET_GROUND)
    traj = integrate(closed, rho0, dt=1e-3, t_max=50.0)
    h_free = build_operators(closed).h_free
    energy = np.einsum("ij,tji->t", h_free, traj.states).real
    drift = float(np.max(np.abs(energy - energy[0])))
    checks.append((
        "closed-system energy conservation",
        drift <= 1e-7,
        f"max drift {drift:.2e} over t in [0, 50]",
    ))

    rabi = p.replace(g=0.0, f=0.0)
    traj = integrate(rabi, composite_initial_state(rabi, KET_EXCITED, KET_GROUND),
                     dt=1e-3, t_max=20.0)
    target = np.sin(rabi.k * traj.t) ** 2
    err = float(np.max(np.abs(traj.marg_b[:, 1, 1].real - target)))
    checks.append((
        "two-qubit exchange oracle",
        err <= 1e-6,
        f"max |E_B/omega_B - sin^2(kt)| = {err:.2e}",
    ))

    iso = p.replace(k=0.0)
    traj_a = integrate(iso, composite_initial_state(iso, KET_EXCITED, KET_GROUND),
                       dt=1e-3, t_max=10.0)
    traj_b = integrate(iso, composite_initial_state(iso, KET_EXCITED, KET_EXCITED),
                       dt=1e-3, t_max=10.0)
    frozen = float(np.max(np.abs(traj_a.marg_b - traj_a.marg_b[0])))
    sigma_b = obs.trace_distance_derivative(traj_a, traj_b, "B")
    sigma_max = float(np.max(np.abs(sigma_b.values)))
    checks.append((
        "battery isolation at k = 0",
        frozen <= 1e-9 and sigma_max <= 1e-9,
        f"max state change {frozen:.2e}, max |sigma_B| {sigma_max:.2e}",
    ))

    driven = p.replace(f=0.8)
    traj = integrate(driven, composite_initial_state(driven, KET_EXCITED, KET_GROUND),
                     dt=1e-3, t_max=5.0)
    inv = traj.invariant_summary()
    checks.append((
        "state invariants on a short driven run",
        inv["trace_deviation"] <= TRACE_TOL
        and inv["hermiticity_defect"] <= HERMITICITY_TOL
        and inv["min_eigenvalue"] >= EIGENVALUE_FLOOR,
        f"trace {inv['trace_deviation']:.2e}, hermiticity {inv['hermiticity_defect']:.2e}, "
        f"min eigenvalue {inv['min_eigenvalue']:.2e}",
    ))

    all_ok = all(ok for _, ok, _ in checks)
    if verbose:
        for name, ok, detail in checks:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    report = {
        "passed": all_ok,
        "checks": [
            {"name": name, "pass": ok, "detail": detail} for name, ok, detail in checks
        ],
        "backend": default_backend(),
    }
    return all_ok, report
