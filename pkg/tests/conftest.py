"""Shared fixtures: deployments and cached datasets.

The two acceptance datasets are expensive to simulate, so they are built
once and cached under .cache/ keyed by their parameters; reruns load the
CSV and skip regeneration (generation itself is resumable).
"""

from pathlib import Path

import pytest

from dcb_arena.dataset import generate, load
from dcb_arena.deployment import load_deployment

REPO = Path(__file__).resolve().parent.parent
CACHE = REPO / ".cache"

TOY_DURATION = 2.0
PAIR_DURATION = 5.0


@pytest.fixture(scope="session")
def toy_deployment():
    return load_deployment(REPO / "deployments" / "toy4.toml")


@pytest.fixture(scope="session")
def pair_deployment():
    return load_deployment(REPO / "deployments" / "pair2.toml")


def _cached_dataset(path, deployment, mac, duration):
    if path.exists():
        try:
            ds = load(path)
            if ds.complete:
                return ds
        except Exception:
            pass
    CACHE.mkdir(exist_ok=True)
    return generate(
        deployment, duration, mac, reps=1, base_seed=0, parallelism=1, out_path=path
    )


@pytest.fixture(scope="session")
def toy_dataset(toy_deployment):
    deployment, mac = toy_deployment
    return _cached_dataset(
        CACHE / f"toy4_d{TOY_DURATION}_r1_s0.csv", deployment, mac, TOY_DURATION
    )


@pytest.fixture(scope="session")
def pair_dataset(pair_deployment):
    deployment, mac = pair_deployment
    return _cached_dataset(
        CACHE / f"pair2_d{PAIR_DURATION}_r1_s0.csv", deployment, mac, PAIR_DURATION
    )
