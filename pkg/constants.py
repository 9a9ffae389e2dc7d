import os

from dotenv import load_dotenv

load_dotenv()

# General
SERVICE_NAME = "magtv"
LOG_LEVEL = os.environ.get("MAGTV_LOG_LEVEL", "INFO")
CONFIG_VERSION = 1

# Physics
# mu0 / 4pi in SI units (T·m/A)
SCALE = float(os.environ.get("MAGTV_SCALE", "1e-7"))

# Forward model
MAX_MATRIX_BYTES = int(os.environ.get("MAGTV_MAX_MATRIX_BYTES", str(512 * 1024 * 1024)))
CACHE_DIR = os.environ.get("MAGTV_CACHE_DIR", "")

# Measures
TEST_FUNCTIONS = 64
SINGULARITY_RADIUS = 1e-12
