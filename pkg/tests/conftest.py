import pytest

from pbsat.bench import gen_random_instance, model_mask
from pbsat.config import get_settings


SETTING_NAMES = (
    "PBSAT_LOG_LEVEL",
    "PBSAT_HEURISTIC",
    "PBSAT_ENGINE",
    "PBSAT_RELEVANCE_BOUND",
    "PBSAT_LENGTH_BOUND",
    "PBSAT_EXPANSION_CAP",
    "PBSAT_PARITY_MAX_LEN",
    "PBSAT_BRUTE_FORCE_CAP",
    "PBSAT_MAX_WEIGHT",
)


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    """Run every test against default settings, restoring the environment afterwards."""
    for name in SETTING_NAMES:
        # setenv first so monkeypatch also undoes values a .env file writes later
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def models():
    """Set of satisfying assignment indices of a constraint list."""

    def _models(constraints, num_vars):
        return set(model_mask(constraints, num_vars).nonzero()[0].tolist())

    return _models


@pytest.fixture
def random_instances():
    """Small random mixed instances, deterministic per seed."""

    def _instances(count, max_vars=8, seed=0):
        instances = []
        for index in range(count):
            num_vars = 2 + (seed + index) % (max_vars - 1)
            num_constraints = 1 + (3 * (seed + index)) % (3 * num_vars)
            instances.append(gen_random_instance(num_vars, num_constraints, seed=seed + index))
        return instances

    return _instances
