"""
This module contains the configuration layer.

Settings are read from the environment (optionally seeded from a .env file)
using the PBSAT_ prefix. Every value has a default, so an empty environment
yields a working configuration.
"""
import os
import functools
from dataclasses import dataclass
from dotenv import load_dotenv, find_dotenv

from pbsat.errors import ConfigError


HEURISTICS = ("moms", "probe", "activity", "recent")
ENGINES = ("counter", "watched")
DB_POLICIES = ("hybrid", "strict")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    heuristic: str = "activity"
    engine: str = "watched"
    relevance_bound: int = 3
    length_bound: int = 50
    expansion_cap: int = 100_000
    parity_max_len: int = 12
    brute_force_cap: int = 20
    max_weight: int = 2 ** 62


def _get_int(name: str, default: int, minimum: int = 0) -> int:
    """
    Read an integer environment variable.

    :param name: The variable name.
    :param default: Value used when the variable is unset or empty.
    :param minimum: Smallest accepted value.
    :return: The parsed integer.
    """
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        # Allow 2**62 style values for the weight limit
        if "**" in raw:
            base, exponent = raw.split("**", 1)
            value = int(base) ** int(exponent)
        else:
            value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from e
    if value < minimum:
        raise ConfigError(f"{name} must be at least {minimum}, got {value}")
    return value


def _get_choice(name: str, default: str, choices: tuple[str, ...], upper: bool = False) -> str:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    value = raw.strip().upper() if upper else raw.strip().lower()
    if value not in choices:
        raise ConfigError(f"{name} must be one of {', '.join(choices)}, got {raw!r}")
    return value


def load_settings(env_file: str | None = None) -> Settings:
    """
    Load the settings from the environment.

    :param env_file: Optional path of a .env file; defaults to the nearest one found.
    :return: The resolved settings.
    """
    # Load environment variables
    load_dotenv(env_file if env_file else find_dotenv(usecwd=True))

    return Settings(
        log_level=_get_choice("PBSAT_LOG_LEVEL", Settings.log_level, LOG_LEVELS, upper=True),
        heuristic=_get_choice("PBSAT_HEURISTIC", Settings.heuristic, HEURISTICS),
        engine=_get_choice("PBSAT_ENGINE", Settings.engine, ENGINES),
        relevance_bound=_get_int("PBSAT_RELEVANCE_BOUND", Settings.relevance_bound),
        length_bound=_get_int("PBSAT_LENGTH_BOUND", Settings.length_bound),
        expansion_cap=_get_int("PBSAT_EXPANSION_CAP", Settings.expansion_cap, minimum=1),
        parity_max_len=_get_int("PBSAT_PARITY_MAX_LEN", Settings.parity_max_len, minimum=1),
        brute_force_cap=_get_int("PBSAT_BRUTE_FORCE_CAP", Settings.brute_force_cap, minimum=1),
        max_weight=_get_int("PBSAT_MAX_WEIGHT", Settings.max_weight, minimum=1),
    )


@functools.lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return the process-wide settings, loading them on first use."""
    return load_settings()
