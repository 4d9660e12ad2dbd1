"""
Configuration settings for the application.

This module loads configuration settings from environment variables using the
`python-dotenv` package. It provides a central location for the defaults that the
command-line tool falls back to when a flag is omitted.

Example:
    LEARNING_RATE: SGD learning rate. Defaults to 0.0001, the value the training
    protocol prescribes.

Usage:
    To access configuration values:
        config = Config()
        print(config.LEARNING_RATE)
"""

import os
from dotenv import load_dotenv

load_dotenv()


class Config():
    """
    Configuration settings loaded from environment variables.
    """
    LOG_INTERVAL = int(os.getenv("LOG_INTERVAL", "100"))
    LEARNING_RATE = float(os.getenv("LEARNING_RATE", "0.0001"))
    MOMENTUM = float(os.getenv("MOMENTUM", "0.9"))
    WEIGHT_DECAY = float(os.getenv("WEIGHT_DECAY", "0.0005"))
    ALPHA_PERCENT = float(os.getenv("ALPHA_PERCENT", "30"))
    ABLATION_WORKERS = int(os.getenv("ABLATION_WORKERS", "1"))
