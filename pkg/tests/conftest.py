from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import pytest

from mobility_app.services import model_core
from mobility_app.services.schemas import ModelParams


@pytest.fixture
def set_a() -> ModelParams:
    """mu=0.105, sigma=0.2, r=0.25 -> a=2, b=6.25."""
    return ModelParams(mu=0.105, sigma=0.2, r=0.25)


@pytest.fixture
def light_tail() -> ModelParams:
    """a=4, b=3.125 : finite variance, used for the mean-income oracle."""
    return ModelParams(mu=0.0025, sigma=0.2, r=0.25)


def forward_share(a: float, r: float, sigma: float, p: float = 0.01) -> float:
    D = 0.5 * sigma**2
    return float(model_core.top_share_values(a, r / (D * a), p))


@pytest.fixture
def write_panel(tmp_path: Path) -> Callable[[Sequence[str], str], Path]:
    def _write(lines: Sequence[str], name: str = "panel.csv") -> Path:
        path = tmp_path / name
        path.write_text("\n".join(["year,top1_share,separations,employment", *lines]) + "\n", encoding="utf-8")
        return path

    return _write


@pytest.fixture
def synthetic_panel(write_panel: Callable[[Sequence[str], str], Path]) -> Path:
    # r = 150000/600000 = 0.25, sigma 0.2, a in {2, 2.5, 3}
    lines = [
        f"{year},{forward_share(a, 0.25, 0.2)!r},150000,600000"
        for year, a in [(2010, 2.0), (2011, 2.5), (2012, 3.0)]
    ]
    return write_panel(lines)
