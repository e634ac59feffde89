"""Shipped example panels and the code that generates them.

Run ``python -m paratrend.fixtures`` to rewrite the CSV files.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .kernels import design_points
from .panel import TimeSeriesPanel, load_panel, save_panel
from .simulation import SimModel, generate_panel

SIM_SMALL_SEED = 20240607


def noiseless_parallel(N: int = 8, T: int = 200) -> TimeSeriesPanel:
    u = design_points(T)
    mu = 2.0 * np.sin(2 * np.pi * u) + 3.0 * u**2
    c = np.linspace(-3.0, 3.0, N)
    return TimeSeriesPanel(c[:, None] + mu[None, :], [f"p{i}" for i in range(N)])


def _groups(shapes, sizes, T, spread):
    u = design_points(T)
    rows, labels = [], []
    for g, (shape, n) in enumerate(zip(shapes, sizes)):
        c = np.linspace(-spread, spread, n) + 2.0 * g
        rows.append(c[:, None] + shape(u)[None, :])
        labels += [f"g{g}_{i}" for i in range(n)]
    return TimeSeriesPanel(np.vstack(rows), labels)


def two_group(T: int = 200) -> TimeSeriesPanel:
    shapes = [lambda u: 4.0 * np.sin(2 * np.pi * u), lambda u: 4.0 * np.cos(2 * np.pi * u)]
    return _groups(shapes, (6, 5), T, 1.5)


def three_group(T: int = 300) -> TimeSeriesPanel:
    shapes = [
        lambda u: 5.0 * np.sin(2 * np.pi * u),
        lambda u: 5.0 * np.cos(2 * np.pi * u),
        lambda u: 10.0 * u**2,
    ]
    return _groups(shapes, (10, 8, 6), T, 2.0)


def sim_small() -> TimeSeriesPanel:
    p = generate_panel(SimModel(), 20, 200, SIM_SMALL_SEED)
    return TimeSeriesPanel(p.values, [f"x{i}" for i in range(p.N)])


BUILDERS = {
    "noiseless_parallel": noiseless_parallel,
    "two_group": two_group,
    "three_group": three_group,
    "sim_small": sim_small,
}


def fixture_path(name: str) -> Path:
    if name not in BUILDERS:
        raise KeyError(f"unknown fixture {name!r}; available: {sorted(BUILDERS)}")
    return Path(str(resources.files("paratrend") / "fixtures" / f"{name}.csv"))


def load_fixture(name: str) -> TimeSeriesPanel:
    return load_panel(fixture_path(name))


def write_all(directory: Path | None = None) -> list[Path]:
    out = []
    for name, build in BUILDERS.items():
        path = fixture_path(name) if directory is None else Path(directory) / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_panel(build(), path)
        out.append(path)
    return out


if __name__ == "__main__":
    for p in write_all():
        print(p)
