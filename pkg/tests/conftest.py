"""Shared fixtures for the quantum_kolmogorov tests."""

from __future__ import annotations

import numpy as np
import pytest

from quantum_kolmogorov.const import LOGGER
from quantum_kolmogorov.kernel_engine import FourierGrid, SolutionSlice


@pytest.fixture
def heat_grid() -> FourierGrid:
    """n=4096 on a domain of length 20."""
    return FourierGrid.from_length(4096, 20.0)


@pytest.fixture
def coarse_grid() -> FourierGrid:
    """n=256 on a domain of length 20, coarse enough for explicit stepping."""
    return FourierGrid.from_length(256, 20.0)


@pytest.fixture
def gaussian_bump(coarse_grid: FourierGrid) -> SolutionSlice:
    """Unit-variance Gaussian terminal condition."""
    return SolutionSlice.from_function(coarse_grid, lambda x: np.exp(-0.5 * x**2))


@pytest.fixture(autouse=True)
def _drop_cli_handlers():
    """Handlers installed by the CLI hold on to a captured stderr."""
    yield
    for handler in list(LOGGER.handlers):
        if getattr(handler, "_qk_cli", False):
            LOGGER.removeHandler(handler)
