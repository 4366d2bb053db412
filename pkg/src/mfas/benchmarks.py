"""Benchmark problems: Forrester (1-D), Park (4-D) and the fluidized-bed dataset."""

from __future__ import annotations

import csv
import warnings
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Callable

import numpy as np


def _unit_interval(x, closed_low: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    low_ok = x >= 0 if closed_low else x > 0
    if not np.all(low_ok & (x <= 1)):
        raise ValueError(f"input outside the domain {'[0' if closed_low else '(0'}, 1]: {x}")
    return x


def forrester_high(x):
    """High-fidelity Forrester function, ``(6x - 2)**2 * sin(12x - 4)`` on [0, 1]."""
    x = _unit_interval(x)
    out = (6 * x - 2) ** 2 * np.sin(12 * x - 4)
    return float(out) if out.ndim == 0 else out


def forrester_low(x, A: float = 0.6, B: float = 10.0, C: float = 7.0):
    """Low-fidelity Forrester function, ``A f_H(x) + B (x - 0.5) - C``."""
    x = _unit_interval(x)
    out = A * forrester_high(x) + B * (x - 0.5) - C
    return float(out) if np.ndim(out) == 0 else out


def _park_inputs(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise ValueError(f"Park functions take 4 inputs, got shape {x.shape}")
    if np.any(x[..., 0] <= 0):
        raise ValueError("x1 must be strictly positive")
    _unit_interval(x, closed_low=True)
    return x


def park_high(x):
    """High-fidelity Park function on (0, 1]^4.

    Args:
        x: 4-vector, or an (n, 4) array of points.
    """
    x = _park_inputs(x)
    x1, x2, x3, x4 = np.moveaxis(x, -1, 0)
    out = (x1 / 2) * (np.sqrt(1 + (x2 + x3**2) * x4 / x1**2) - 1) + (x1 + 3 * x4) * np.exp(1 + np.sin(x3))
    return float(out) if out.ndim == 0 else out


def park_low(x):
    """Low-fidelity Park function, ``(1 + sin(x1)/10) f_H(x) - 2 x1 + x2**2 + x3**2 + 0.5``."""
    x = _park_inputs(x)
    x1, x2, x3, _ = np.moveaxis(x, -1, 0)
    out = (1 + np.sin(x1) / 10) * park_high(x) - 2 * x1 + x2**2 + x3**2 + 0.5
    return float(out) if np.ndim(out) == 0 else out


def rmse(predictions, truth) -> float:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size != t.size or p.size == 0:
        raise ValueError(f"need equal non-empty lengths, got {p.size} and {t.size}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


# ---------------------------------------------------------------------------
# fluidized bed

FLUIDIZED_BED_COLUMNS = ("H_R", "T_R", "T_a", "R_f", "P_a", "V_f", "T_exp", "T_model")
FLUIDIZED_BED_INPUTS = FLUIDIZED_BED_COLUMNS[:6]


class FluidizedBedParseError(ValueError):
    pass


@dataclass(frozen=True)
class FluidizedBedRecord:
    """One operating condition: six process inputs, measured and simulated temperature."""

    H_R: float
    T_R: float
    T_a: float
    R_f: float
    P_a: float
    V_f: float
    T_exp: float
    T_model: float

    @property
    def inputs(self) -> tuple[float, ...]:
        return astuple(self)[:6]


def load_fluidized_bed(path) -> list[FluidizedBedRecord]:
    """Read fluidized-bed records from a CSV file.

    The header must be exactly ``H_R,T_R,T_a,R_f,P_a,V_f,T_exp,T_model``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FluidizedBedParseError(f"{path}: empty file, expected header {','.join(FLUIDIZED_BED_COLUMNS)}")
    header = [h.strip() for h in rows[0]]
    if tuple(header) != FLUIDIZED_BED_COLUMNS:
        missing = [c for c in FLUIDIZED_BED_COLUMNS if c not in header]
        extra = [c for c in header if c not in FLUIDIZED_BED_COLUMNS]
        raise FluidizedBedParseError(
            f"{path}: bad header {header}; missing {missing}, unexpected {extra}, "
            f"expected order {list(FLUIDIZED_BED_COLUMNS)}"
        )
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(FLUIDIZED_BED_COLUMNS):
            raise FluidizedBedParseError(
                f"{path}:{lineno}: expected {len(FLUIDIZED_BED_COLUMNS)} fields, got {len(row)}"
            )
        values = []
        for col, cell in zip(FLUIDIZED_BED_COLUMNS, row):
            try:
                values.append(float(cell))
            except ValueError:
                raise FluidizedBedParseError(f"{path}:{lineno}: column {col}: not a number: {cell!r}") from None
        records.append(FluidizedBedRecord(*values))
    if not records:
        warnings.warn(f"{path}: header only, no fluidized-bed records", stacklevel=2)
    elif len(records) != 28:
        warnings.warn(f"{path}: {len(records)} records (the full dataset has 28)", stacklevel=2)
    return records


def write_fluidized_bed(records, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FLUIDIZED_BED_COLUMNS)
        for r in records:
            writer.writerow([repr(float(v)) for v in astuple(r)])


# physical ranges used by the synthetic stand-in
_SYNTH_RANGES = {
    "H_R": (20.0, 80.0),   # %
    "T_R": (15.0, 30.0),   # degC
    "T_a": (40.0, 80.0),   # degC
    "R_f": (5.0, 20.0),    # g/min
    "P_a": (1.0, 3.0),     # bar
    "V_f": (1.0, 3.0),     # m/s
}


def synthetic_fluidized_bed(n: int = 28, seed: int = 0) -> list[FluidizedBedRecord]:
    """SYNTHETIC stand-in for the fluidized-bed dataset; not measured data.

    Temperatures follow a fixed 6-D quadratic in the normalized inputs plus
    noise; the "model" column adds a smooth bias to mimic a mid-fidelity
    simulation.
    """
    rng = np.random.default_rng(seed)
    lo = np.array([r[0] for r in _SYNTH_RANGES.values()])
    hi = np.array([r[1] for r in _SYNTH_RANGES.values()])
    u = rng.random((n, 6))
    x = lo + u * (hi - lo)
    lin = np.array([-3.0, 2.0, 12.0, -6.0, -1.5, -2.5])
    t_exp = 30.0 + u @ lin + 4.0 * u[:, 2] * (1 - u[:, 3]) - 2.0 * u[:, 0] ** 2 + rng.normal(0, 0.3, n)
    t_model = t_exp + 1.5 + 2.0 * u[:, 3] - 1.5 * u[:, 0] * u[:, 2] + rng.normal(0, 0.2, n)
    return [FluidizedBedRecord(*row, te, tm) for row, te, tm in zip(x, t_exp, t_model)]


# ---------------------------------------------------------------------------
# problem registry


@dataclass(frozen=True)
class Problem:
    """A two-fidelity benchmark on the unit hypercube.

    Analytic problems evaluate ``eval_high``/``eval_low`` on normalized
    inputs. Dataset problems instead carry a finite ``table`` of normalized
    inputs with ``high``/``low`` response columns.
    """

    name: str
    dim: int
    bounds: np.ndarray
    eval_high: Callable | None = None
    eval_low: Callable | None = None
    table: np.ndarray | None = None
    high: np.ndarray | None = None
    low: np.ndarray | None = None
    open_lower: bool = False
    default_iterations: int = 10

    @property
    def is_dataset(self) -> bool:
        return self.table is not None

    def to_unit(self, x) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (np.asarray(x, dtype=float) - lo) / (hi - lo)


def _normalize_columns(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (x - lo) / span, np.column_stack([lo, lo + span])


def fluidized_bed_problem(records) -> Problem:
    """Dataset problem: experiment = high fidelity, simulation = low fidelity.

    Inputs are min/max normalized per column over the dataset.
    """
    if len(records) == 0:
        raise ValueError("no fluidized-bed records")
    raw = np.array([r.inputs for r in records])
    table, bounds = _normalize_columns(raw)
    return Problem(
        name="fluidized_bed",
        dim=6,
        bounds=bounds,
        table=table,
        high=np.array([r.T_exp for r in records]),
        low=np.array([r.T_model for r in records]),
        default_iterations=15,
    )


def _forrester_problem() -> Problem:
    return Problem("forrester", 1, np.array([[0.0, 1.0]]),
                   lambda X: forrester_high(np.asarray(X)[:, 0]),
                   lambda X: forrester_low(np.asarray(X)[:, 0]),
                   default_iterations=10)


def _park_problem() -> Problem:
    return Problem("park", 4, np.tile([0.0, 1.0], (4, 1)), park_high, park_low,
                   open_lower=True, default_iterations=15)


def get_problem(name: str, data_path=None, synthetic_seed: int = 0) -> Problem:
    """Look up a benchmark by name.

    ``fluidized_bed`` reads ``data_path`` when given, otherwise it falls back
    to :func:`synthetic_fluidized_bed`.
    """
    if name == "forrester":
        return _forrester_problem()
    if name == "park":
        return _park_problem()
    if name == "fluidized_bed":
        records = load_fluidized_bed(data_path) if data_path else synthetic_fluidized_bed(seed=synthetic_seed)
        return fluidized_bed_problem(records)
    raise ValueError(f"unknown problem {name!r}; choose from forrester, park, fluidized_bed")


PROBLEMS = ("forrester", "park", "fluidized_bed")

