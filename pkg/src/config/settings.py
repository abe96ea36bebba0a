"""
Configuration settings for the coded MapReduce simulator.
Handles all configuration parameters and environment variables.
"""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()

@dataclass
class EngineConfig:
    """Cluster simulator configuration."""
    WORKERS: int = 1
    FIELD_BITS: int = 8
    FIELD_POLY: int = 0x11B  # x^8 + x^4 + x^3 + x + 1

@dataclass
class SortConfig:
    """CodedTeraSort record shape and input generation."""
    KEY_BYTES: int = 10
    VALUE_BYTES: int = 90
    RECORDS: int = 100_000
    SEED: int = 0

@dataclass
class OutputConfig:
    """Experiment output configuration."""
    PROGRESS: bool = True

@dataclass
class LoggingConfig:
    """Logging configuration."""
    LEVEL: str = "INFO"
    FILE: str = ""  # empty means console only

class Settings:
    """Global settings container."""
    def __init__(self):
        self.engine = EngineConfig(
            WORKERS=self._parse_int_env("CDC_WORKERS", 1),
            FIELD_BITS=self._parse_int_env("CDC_FIELD_BITS", 8),
            FIELD_POLY=self._parse_int_env("CDC_FIELD_POLY", 0x11B)
        )

        self.sort = SortConfig(
            KEY_BYTES=self._parse_int_env("SORT_KEY_BYTES", 10),
            VALUE_BYTES=self._parse_int_env("SORT_VALUE_BYTES", 90),
            RECORDS=self._parse_int_env("SORT_RECORDS", 100_000),
            SEED=self._parse_int_env("SORT_SEED", 0)
        )

        self.output = OutputConfig(
            PROGRESS=self._parse_bool_env("CDC_PROGRESS", True)
        )

        self.logging = LoggingConfig(
            LEVEL=os.getenv("LOG_LEVEL", "INFO"),
            FILE=os.getenv("LOG_FILE", "")
        )

    @staticmethod
    def _parse_bool_env(key: str, default: bool) -> bool:
        """Parse boolean environment variables."""
        value = os.getenv(key, str(default)).lower()
        return value in ("true", "1", "yes", "y", "t")

    @staticmethod
    def _parse_int_env(key: str, default: int) -> int:
        """Parse integer environment variables (decimal or 0x-prefixed hex)."""
        value = os.getenv(key)
        if not value:
            return default
        return int(value, 0)

# Create a global settings instance
settings = Settings()
