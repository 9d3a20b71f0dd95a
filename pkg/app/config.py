"""
PartialADMM Configuration
Loads environment variables and engine defaults
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Process-wide defaults for the engine, solvers and harness"""

    # Application Settings
    APP_NAME = "PartialADMM"
    APP_VERSION = "0.2.0"
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR = os.getenv("OUTPUT_DIR", os.path.join("data", "runs"))

    # Engine Settings
    DEFAULT_MAX_CS = int(os.getenv("DEFAULT_MAX_CS", "1000"))
    DEFAULT_TOLERANCE = float(os.getenv("DEFAULT_TOLERANCE", "1e-10"))
    DIVERGENCE_LIMIT = float(os.getenv("DIVERGENCE_LIMIT", "1e6"))
    ENGINE_WORKERS = int(os.getenv("ENGINE_WORKERS", "1"))
    REFERENCE_MAX_SCALARS = int(os.getenv("REFERENCE_MAX_SCALARS", "400"))

    # Local solver Settings
    SPG_TOLERANCE = float(os.getenv("SPG_TOLERANCE", "1e-10"))
    SPG_MAX_ITERS = int(os.getenv("SPG_MAX_ITERS", "5000"))
    SPG_STALL_TOLERANCE = float(os.getenv("SPG_STALL_TOLERANCE", "1e-6"))
    DELAY_SAFEGUARD = float(os.getenv("DELAY_SAFEGUARD", "1e-9"))

    # Tuning presets found for the reference experiments
    RHO_PRESETS = {
        "flow_quadratic": {"alg1": 2.0, "alg2": 2.0, "consensus": 2.0},
        "flow_delay": {"alg1": 0.08, "alg2": 0.12, "consensus": 0.12},
        "mpc_star_unstable": {"alg1": 135.0, "alg2": 135.0, "consensus": 120.0},
        "mpc_star_stable": {"alg1": 25.0, "alg2": 30.0, "consensus": 25.0},
        "mpc_nonconnected": {"alg3": 35.0, "alg2": 35.0},
    }
    DELAY_LIPSCHITZ = float(os.getenv("DELAY_LIPSCHITZ", "15000"))

    # Error levels reported in run summaries
    THRESHOLDS = (1e-1, 1e-2, 1e-3, 1e-4)

    @classmethod
    def validate(cls):
        """Check that numeric settings are usable"""
        if cls.DEFAULT_MAX_CS < 1:
            raise ValueError("DEFAULT_MAX_CS must be at least 1")
        if cls.DEFAULT_TOLERANCE < 0:
            raise ValueError("DEFAULT_TOLERANCE must be nonnegative")
        if cls.ENGINE_WORKERS < 1:
            raise ValueError("ENGINE_WORKERS must be at least 1")
        if not 0 < cls.DELAY_SAFEGUARD < 1:
            raise ValueError("DELAY_SAFEGUARD must lie in (0, 1)")
        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ValueError(f"Unknown LOG_LEVEL: {cls.LOG_LEVEL}")
        return True


# Validate configuration when this file is imported
Config.validate()
