import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

import numpy as np
import pytest

from riskalloc.marketdata import CRYPTO, INDUSTRY, synthetic_panel

FIXTURES = Path(__file__).parent / "fixtures"
GOLDENS = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def goldens_dir() -> Path:
    return GOLDENS


@pytest.fixture(scope="session")
def mixed_panel():
    """Six-asset panel shaped like the real universe: 4 industry + 2 crypto."""
    return synthetic_panel(
        6,
        400,
        [0.012, 0.011, 0.013, 0.010, 0.045, 0.055],
        0.25,
        seed=3,
        asset_ids=["IndA", "IndB", "IndC", "IndD", "CoinA", "CoinB"],
        categories=[INDUSTRY] * 4 + [CRYPTO] * 2,
    )


def random_pd_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    """Well-conditioned random positive definite matrix."""
    a = rng.standard_normal((n, n))
    sigma = a @ a.T / n + 0.05 * np.eye(n)
    return (sigma + sigma.T) / 2.0


def random_rho(rng: np.random.Generator, n: int) -> np.ndarray:
    rho = rng.uniform(0.2, 1.0, size=n)
    return rho / rho.sum()
