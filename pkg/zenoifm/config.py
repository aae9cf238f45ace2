"""Configuration management for the simulator."""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Runtime
TIMEZONE = os.getenv("ZENOIFM_TIMEZONE", "Europe/Berlin")
LOG_LEVEL = os.getenv("ZENOIFM_LOG_LEVEL", "INFO")
OUTPUT_DIR = os.getenv("ZENOIFM_OUTPUT_DIR", str(Path.cwd() / "results"))
DEFAULT_SEED = os.getenv("ZENOIFM_SEED", "20180412")

# Scenario-file keys and their defaults (strings, parsed by utils validators).
# Rates: OMEGA_HZ is Omega / 2pi; GAMMA in 1/s; DELTA in rad/s.
DEFAULTS = {
    "OMEGA_HZ": "3.1",
    "GAMMA": "0",
    "DELTA": "0",
    "T_FINAL": "0.2",
    "XI": "",
    "DT": "1e-4",
    "SHOTS": "4200",
    "SEED": DEFAULT_SEED,
    "OUTPUT_DIR": OUTPUT_DIR,
    "CUTOFF": "12",
    "SIGMA_DET": "16",
    "TRANSFER": "0.08",
    "N_CONDENSATE": "25000",
    "N_CONDENSATE_SD": "1250",
    "GAMMA_GRID": "0,5,10,15,20,25,30,35,40,45,50,55,59,60,65,70,75,80,85,90,95,100",
    "DELTA_GRID": "",
    "T_GRID_POINTS": "11",
    "FIT_N_MAX": "4",
    "BOOTSTRAP_RESAMPLES": "1000",
    "PRIOR": "0.5",
    "USE_NOISE": "true",
    "WORKERS": "1",
    "SYNTHETIC_GAMMA": "58.6",
    "DECAY_NOISE": "0.05",
    "DECAY_POINTS": "20",
    "DECAY_T_MAX": "0.05",
}

# Strong-Zeno loss rate for the "with object" runs: puts <N_+1> near 0.49 at xi = 3.1,
# i.e. a vacuum weight close to 0.67.
GAMMA_WITH_OBJECT = "600"

SCENARIO_DEFAULTS = {
    "growth": {"T_FINAL": "0.2"},
    "zeno-sweep": {"OMEGA_HZ": "3.6", "T_FINAL": "0.2"},
    "variance-vs-time": {"GAMMA": GAMMA_WITH_OBJECT, "XI": "3.1", "SHOTS": "2000"},
    "histogram": {"GAMMA": GAMMA_WITH_OBJECT, "XI": "3.1"},
    "reconstruct": {"GAMMA": GAMMA_WITH_OBJECT, "XI": "3.1"},
    "bayes": {"GAMMA": GAMMA_WITH_OBJECT, "XI": "3.1"},
    "ev-merit": {"GAMMA": GAMMA_WITH_OBJECT, "XI": "3.1"},
    "calibrate-loss": {},
}

# Output file names
GROWTH_CSV = "growth.csv"
ZENO_CSV = "zeno_sweep.csv"
RESONANCE_CSV = "resonance.csv"
VARIANCE_CSV = "variance_vs_time.csv"
HISTOGRAM_CSV = "histogram_{label}.csv"
HISTOGRAM_JSON = "histogram_{label}.json"
RECONSTRUCT_CSV = "reconstruction.csv"
RECONSTRUCT_JSON = "reconstruction.json"
BAYES_CSV = "posteriors.csv"
ANALYSIS_JSON = "analysis.json"
THRESHOLD_CSV = "threshold_scan.csv"
DECAY_CSV = "loss_calibration.csv"
DECAY_JSON = "loss_calibration.json"
