from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.config import get_settings
from src.core.schemas import SamplerConfig
from src.data.columns import BOOKING_COLUMNS, display_name
from src.mcmc.sampler import STAT_FIELDS, SampleSet

HEADER = [display_name(c) for c in BOOKING_COLUMNS]


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    """Chains run in-process unless a test asks for a pool explicitly."""
    monkeypatch.setenv("BAYES_CANCEL_THREADS", "1")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def booking_row(i: int, **overrides: str) -> dict[str, str]:
    row = {
        "Booking_ID": f"INN{i:05d}",
        "number of adults": str(1 + i % 3),
        "number of children": str(int(i % 3 == 1)),
        "number of weekend nights": str(i % 3),
        "number of week nights": str(1 + i % 4),
        "type of meal": ("Meal Plan 1", "Not Selected")[i % 2],
        "car parking space": str(int(i % 5 == 0)),
        "room type": ("Room_Type 1", "Room_Type 4", "Room_Type 2")[i % 3],
        "lead time": str(10 + 7 * i),
        "market segment type": ("Online", "Offline")[i % 2],
        "repeated": "0",
        "P-C": str((i // 2) % 2),
        "P-not-C": str(i % 4 // 3),
        "average price": f"{80 + i:.2f}",
        "special requests": str(i % 3),
        "date of reservation": "10/2/2017",
        "booking status": "Canceled" if i % 3 == 0 else "Not_Canceled",
    }
    row.update(overrides)
    return row


def write_bookings(path: Path, rows: list[dict[str, str]], header: list[str] = HEADER) -> Path:
    pd.DataFrame(rows, columns=header).to_csv(path, index=False)
    return path


@pytest.fixture
def bookings_csv(tmp_path: Path) -> Path:
    return write_bookings(tmp_path / "bookings.csv", [booking_row(i) for i in range(1, 13)])


class StandardNormal:
    """Isotropic Gaussian target."""

    def __init__(self, dim: int = 2, scale: float | np.ndarray = 1.0):
        self.dim = dim
        self.param_names = [f"x{j}" for j in range(dim)]
        self.scale = np.broadcast_to(np.asarray(scale, dtype=float), (dim,)).copy()

    def log_density_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        z = theta / self.scale
        return -0.5 * float(z @ z), -z / self.scale


class Nowhere:
    dim = 1
    param_names = ["x0"]

    def log_density_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        return -np.inf, np.full(1, np.nan)


def make_samples(
    draws: np.ndarray,
    names: list[str],
    divergent: np.ndarray | None = None,
) -> SampleSet:
    """SampleSet around fixed (chains, draws, dim) values with neutral sampler stats."""
    draws = np.asarray(draws, dtype=float)
    n_chains, n_draws, _ = draws.shape
    stats = {name: np.zeros((n_chains, n_draws)) for name in STAT_FIELDS}
    stats["divergent"] = (
        np.zeros((n_chains, n_draws), dtype=bool) if divergent is None else divergent
    )
    stats["accept_stat"] += 0.8
    stats["step_size"] += 0.5
    return SampleSet(
        draws=draws,
        param_names=list(names),
        stats=stats,
        config_echo=SamplerConfig(chains=n_chains, sampling_iters=n_draws, adapt=False),
    )
