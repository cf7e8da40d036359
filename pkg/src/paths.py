"""
Central path resolver for SlowLayers.
All scripts import paths from here to find project resources.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Project root = parent of src/
PROJECT_ROOT = Path(__file__).resolve().parent.parent

# Optional .env overrides (output directory only)
ENV_PATH = PROJECT_ROOT / ".env"
if ENV_PATH.exists():
    load_dotenv(ENV_PATH)

OUTPUT_ENV_VAR = "SLOWLAYERS_OUTPUT_DIR"

# Core directories
CONFIG_DIR = PROJECT_ROOT / "config"
DATA_DIR = PROJECT_ROOT / "data"
DOCS_DIR = PROJECT_ROOT / "docs"
LOGS_DIR = PROJECT_ROOT / "logs"
SCRIPTS_DIR = PROJECT_ROOT / "scripts"
SRC_DIR = PROJECT_ROOT / "src"

# Config files
SCENARIOS_DIR = CONFIG_DIR / "scenarios"
TEMPLATE_SCENARIO = SCENARIOS_DIR / "template.json"


def output_root() -> Path:
    """Run output root, honouring the SLOWLAYERS_OUTPUT_DIR override."""
    override = os.getenv(OUTPUT_ENV_VAR)
    if override:
        return Path(override).expanduser().resolve()
    return DATA_DIR / "output"
