"""Run artifacts: energy-trace CSVs, JSON reports, metric tables and trace plots."""

from __future__ import annotations

import csv
from collections.abc import Mapping, Sequence
from pathlib import Path

from loguru import logger
from pydantic import BaseModel, ValidationError

from .config import DeepCVConfig
from .exceptions import ImageIOError, InvalidInputError
from .report_models import EnergyBreakdown


def write_rows(path: Path, columns: Sequence[str], rows: Sequence[Mapping[str, object]]) -> None:
    """Write dictionaries as a CSV with a header row.

    Raises:
        ImageIOError: If the file cannot be written
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    except OSError as e:
        raise ImageIOError(path, str(e)) from e


def write_trace_csv(trace: Sequence[EnergyBreakdown], path: Path) -> None:
    """One row per trace entry: iter, reconstruction, kl, tv, penalty, aug_bce, cri, total."""
    write_rows(path, DeepCVConfig.TRACE_COLUMNS, [e.as_row(k) for k, e in enumerate(trace)])


def read_trace_csv(path: Path) -> list[EnergyBreakdown]:
    """Parse a trace CSV.

    Raises:
        ImageIOError: If the file cannot be read
        InvalidInputError: If a column is missing or a value is not numeric
    """
    try:
        with path.open(newline="") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames or []
            missing = [c for c in DeepCVConfig.TRACE_COLUMNS if c not in header]
            if missing:
                raise InvalidInputError(f"{path}: trace CSV is missing columns {missing}")
            rows = list(reader)
    except OSError as e:
        raise ImageIOError(path, str(e)) from e

    trace: list[EnergyBreakdown] = []
    for number, row in enumerate(rows, start=2):
        try:
            trace.append(
                EnergyBreakdown(**{c: float(row[c]) for c in DeepCVConfig.TRACE_COLUMNS if c != "iter"})
            )
        except (TypeError, ValueError, ValidationError) as e:
            raise InvalidInputError(f"{path}:{number}: malformed trace row ({e})") from e
    return trace


def write_json(model: BaseModel, path: Path) -> None:
    """Serialize a pydantic model as indented JSON."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _ = path.write_text(model.model_dump_json(indent=2))
    except OSError as e:
        raise ImageIOError(path, str(e)) from e


def plot_trace(trace: Sequence[EnergyBreakdown], path: Path, title: str = "Energy trace") -> None:
    """Static plot of every nonzero energy component against the iteration."""
    import matplotlib

    _ = matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    iterations = list(range(len(trace)))
    fig, ax = plt.subplots(figsize=(7, 4))
    for column in DeepCVConfig.TRACE_COLUMNS[1:]:
        values = [float(getattr(e, column)) for e in trace]
        if any(values):
            _ = ax.plot(iterations, values, label=column, linewidth=2.0 if column == "total" else 1.0)
    _ = ax.set_xlabel("iteration")
    _ = ax.set_ylabel("energy")
    _ = ax.set_title(title)
    if all(e.total > 0 for e in trace) and trace:
        ax.set_yscale("log")
    _ = ax.legend(loc="upper right")
    fig.tight_layout()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120)
    except OSError as e:
        raise ImageIOError(path, str(e)) from e
    finally:
        plt.close(fig)
    logger.debug(f"Wrote trace plot {path}")
