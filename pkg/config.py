"""
Configuration module for loading environment variables.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Default root for every artifact a command writes (data, checkpoints, reports).
CANONSLR_OUT = os.getenv("CANONSLR_OUT", "outputs")

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_DIR = os.getenv("LOG_DIR")

# Intra-op CPU threads for torch. Results are only reproducible between runs
# that use the same thread count, so pin it when comparing checkpoints.
TORCH_THREADS = int(os.getenv("TORCH_THREADS", "0"))
