"""Script to write a documented scenario file with the default settings."""
import sys
from pathlib import Path

from zenoifm.config import DEFAULTS, SCENARIO_DEFAULTS

DESCRIPTIONS = {
    "OMEGA_HZ": "pair-creation rate Omega / 2pi",
    "GAMMA": "loss rate on m=-1 in 1/s",
    "DELTA": "detuning in rad/s",
    "T_FINAL": "evolution time in s (ignored when XI is set)",
    "XI": "squeezing parameter; sets T_FINAL = XI / Omega",
    "DT": "upper bound on the integration step in s",
    "SHOTS": "homodyne shots per histogram",
    "SEED": "master random seed",
    "OUTPUT_DIR": "directory for CSV/JSON results",
    "CUTOFF": "Fock cutoff per mode for the master equation",
    "SIGMA_DET": "atom-counting noise in atoms",
    "TRANSFER": "displacement transfer fraction cos^2(theta)",
    "N_CONDENSATE": "mean condensate atom number",
    "N_CONDENSATE_SD": "shot-to-shot spread of the condensate atom number",
    "GAMMA_GRID": "loss rates of the Zeno sweep",
    "DELTA_GRID": "detunings of the resonance scan (empty: skipped)",
    "T_GRID_POINTS": "time points for growth and variance scenarios",
    "FIT_N_MAX": "highest Fock level in the reconstruction",
    "BOOTSTRAP_RESAMPLES": "bootstrap resamples for weight intervals",
    "PRIOR": "prior probability of an object being present",
    "USE_NOISE": "include detection noise in the reconstruction and posteriors",
    "WORKERS": "worker processes for sweeps and bootstrap",
    "SYNTHETIC_GAMMA": "true loss rate of the synthetic calibration curve",
    "DECAY_NOISE": "relative noise of the synthetic calibration counts",
    "DECAY_POINTS": "points on the calibration curve",
    "DECAY_T_MAX": "last time on the calibration curve in s",
}


def render(scenario: str = "") -> str:
    """Scenario file text for `scenario` (empty: global defaults)."""
    values = dict(DEFAULTS)
    values.update(SCENARIO_DEFAULTS.get(scenario, {}))
    lines = [f"# zenoifm scenario file ({scenario or 'defaults'})"]
    for key, value in values.items():
        lines.append(f"# {DESCRIPTIONS[key]}")
        lines.append(f'{key}="{value}"')
    return "\n".join(lines) + "\n"


def setup_config(path: str = "scenario.env", scenario: str = "") -> Path:
    target = Path(path)
    if scenario and scenario not in SCENARIO_DEFAULTS:
        raise SystemExit(f"unknown scenario '{scenario}'")
    target.write_text(render(scenario), encoding="utf-8")
    print(f"✓ Wrote {target}")
    return target


if __name__ == "__main__":
    setup_config(*sys.argv[1:3])
