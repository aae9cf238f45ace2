"""Scenario selection and layered configuration."""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import dotenv_values

from zenoifm.config import DEFAULTS, SCENARIO_DEFAULTS
from zenoifm.errors import ConfigError, ZenoIFMError
from zenoifm.models import DetectionModel, FockCutoff, SpinDynamicsParams
from zenoifm.utils import (
    config_hash,
    parse_grid,
    validate_count,
    validate_flag,
    validate_float,
    validate_fraction,
    validate_probability,
)

logger = logging.getLogger(__name__)


class Scenario(Enum):
    """Scenarios; the value is the key used in SCENARIO_DEFAULTS."""
    GROWTH = "growth"
    ZENO_SWEEP = "zeno-sweep"
    VARIANCE_VS_TIME = "variance-vs-time"
    HISTOGRAM = "histogram"
    RECONSTRUCT = "reconstruct"
    BAYES = "bayes"
    EV_MERIT = "ev-merit"
    CALIBRATE_LOSS = "calibrate-loss"

    @property
    def command(self) -> str:
        """Subcommand name on the command line."""
        return "variance" if self is Scenario.VARIANCE_VS_TIME else self.value

    @classmethod
    def from_command(cls, command: str) -> "Scenario":
        for scenario in cls:
            if scenario.command == command:
                return scenario
        raise ConfigError(f"unknown scenario '{command}'")


@dataclass(frozen=True)
class ScenarioExtras:
    """Scenario-specific settings that are not part of the physics or detection model."""
    gamma_grid: tuple = ()
    delta_grid: tuple = ()
    t_grid_points: int = 11
    fit_n_max: int = 4
    bootstrap_resamples: int = 1000
    prior: float = 0.5
    use_noise: bool = True
    workers: int = 1
    synthetic_gamma: float = 58.6
    decay_noise: float = 0.05
    decay_points: int = 20
    decay_t_max: float = 0.05


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated configuration of one run."""
    scenario: Scenario
    physics: SpinDynamicsParams
    detection: DetectionModel
    shots: int
    seed: int
    output_dir: Path
    cutoff: FockCutoff
    extras: ScenarioExtras = field(default_factory=ScenarioExtras)

    def to_dict(self) -> Dict[str, Any]:
        """Canonical mapping hashed into every output; output_dir is excluded."""
        p, d, e = self.physics, self.detection, self.extras
        return {
            "scenario": self.scenario.value,
            "omega": p.omega,
            "gamma": p.gamma,
            "delta": p.delta,
            "t_final": p.t_final,
            "dt": p.dt,
            "sigma_det_atoms": d.sigma_det_atoms,
            "transfer_fraction": d.transfer_fraction,
            "n_condensate_mean": d.n_condensate_mean,
            "n_condensate_sd": d.n_condensate_sd,
            "shots": self.shots,
            "seed": self.seed,
            "cutoff": self.cutoff.n_max,
            "gamma_grid": list(e.gamma_grid),
            "delta_grid": list(e.delta_grid),
            "t_grid_points": e.t_grid_points,
            "fit_n_max": e.fit_n_max,
            "bootstrap_resamples": e.bootstrap_resamples,
            "prior": e.prior,
            "use_noise": e.use_noise,
            "synthetic_gamma": e.synthetic_gamma,
            "decay_noise": e.decay_noise,
            "decay_points": e.decay_points,
            "decay_t_max": e.decay_t_max,
        }

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


def _layered_values(scenario: Scenario, config_path: Optional[Path], overrides: Optional[Dict[str, Any]]) -> Dict[str, str]:
    values = dict(DEFAULTS)
    values.update(SCENARIO_DEFAULTS.get(scenario.value, {}))
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"scenario file not found: {path}")
        from_file = {k.upper(): v for k, v in dotenv_values(path).items() if v is not None}
        unknown = sorted(set(from_file) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown keys in {path}: {', '.join(unknown)}")
        values.update(from_file)
        logger.info("Loaded %d settings from %s", len(from_file), path)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown setting {key}")
        values[key] = str(value)
    return values


def resolve_config(
    scenario: Scenario,
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ScenarioConfig:
    """
    Merge DEFAULTS, the scenario defaults, an optional scenario file and flag overrides.

    Every value is validated; all problems are reported together in one ConfigError.
    """
    values = _layered_values(scenario, config_path, overrides)
    errors = []
    parsed: Dict[str, Any] = {}

    def take(key: str, validator, *args):
        ok, value, error = validator(values[key], *args)
        if not ok:
            errors.append(f"{key}: {error}")
        parsed[key] = value

    take("OMEGA_HZ", validate_float, 0.0)
    take("GAMMA", validate_float, 0.0)
    take("DELTA", validate_float)
    take("T_FINAL", validate_float, 0.0)
    take("DT", validate_float, 0.0, True)
    take("SHOTS", validate_count, 1)
    take("SEED", validate_count, 0)
    take("CUTOFF", validate_count, 0)
    take("SIGMA_DET", validate_float, 0.0)
    take("TRANSFER", validate_fraction)
    take("N_CONDENSATE", validate_float, 0.0, True)
    take("N_CONDENSATE_SD", validate_float, 0.0)
    take("GAMMA_GRID", parse_grid)
    take("DELTA_GRID", parse_grid, None)
    take("T_GRID_POINTS", validate_count, 1)
    take("FIT_N_MAX", validate_count, 0)
    take("BOOTSTRAP_RESAMPLES", validate_count, 1)
    take("PRIOR", validate_probability)
    take("USE_NOISE", validate_flag)
    take("WORKERS", validate_count, 1)
    take("SYNTHETIC_GAMMA", validate_float, 0.0)
    take("DECAY_NOISE", validate_float, 0.0)
    take("DECAY_POINTS", validate_count, 3)
    take("DECAY_T_MAX", validate_float, 0.0, True)
    if str(values["XI"]).strip():
        take("XI", validate_float, 0.0)
    else:
        parsed["XI"] = None

    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))

    omega = 2.0 * math.pi * parsed["OMEGA_HZ"]
    t_final = parsed["T_FINAL"]
    if parsed["XI"] is not None:
        if omega == 0:
            raise ConfigError("XI requires a positive OMEGA_HZ")
        t_final = parsed["XI"] / omega

    try:
        physics = SpinDynamicsParams(
            omega=omega,
            gamma=parsed["GAMMA"],
            delta=parsed["DELTA"],
            t_final=t_final,
            dt=min(parsed["DT"], t_final) if t_final > 0 else parsed["DT"],
        )
        detection = DetectionModel(
            sigma_det_atoms=parsed["SIGMA_DET"],
            transfer_fraction=parsed["TRANSFER"],
            n_condensate_mean=parsed["N_CONDENSATE"],
            n_condensate_sd=parsed["N_CONDENSATE_SD"],
        )
        cutoff = FockCutoff(parsed["CUTOFF"])
    except ZenoIFMError as e:
        raise ConfigError(f"invalid configuration: {e}") from e

    extras = ScenarioExtras(
        gamma_grid=parsed["GAMMA_GRID"],
        delta_grid=parsed["DELTA_GRID"],
        t_grid_points=parsed["T_GRID_POINTS"],
        fit_n_max=parsed["FIT_N_MAX"],
        bootstrap_resamples=parsed["BOOTSTRAP_RESAMPLES"],
        prior=parsed["PRIOR"],
        use_noise=parsed["USE_NOISE"],
        workers=parsed["WORKERS"],
        synthetic_gamma=parsed["SYNTHETIC_GAMMA"],
        decay_noise=parsed["DECAY_NOISE"],
        decay_points=parsed["DECAY_POINTS"],
        decay_t_max=parsed["DECAY_T_MAX"],
    )
    config = ScenarioConfig(
        scenario=scenario,
        physics=physics,
        detection=detection,
        shots=parsed["SHOTS"],
        seed=parsed["SEED"],
        output_dir=Path(values["OUTPUT_DIR"]),
        cutoff=cutoff,
        extras=extras,
    )
    logger.info("Scenario %s: xi=%.4g gamma=%.4g seed=%d", scenario.value, physics.xi, physics.gamma, config.seed)
    return config
