"""Utility functions for donorcnot."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from pydantic import BaseModel, ConfigDict

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from typing_extensions import Self

SIGNIFICANT_DIGITS = 12

# 1 μeV of energy is 241.799 MHz.
MHZ_PER_MICRO_EV = 241.799


class JsonModel(BaseModel):
    """Frozen pydantic model with JSON file helpers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    @classmethod
    def from_json(cls, source: str | Path) -> Self:
        """Load from a JSON file path or a JSON string.

        Parameters
        ----------
        source : str | Path
            A `Path`, a string naming an existing file, or JSON text.

        Raises
        ------
        OSError
            If a path is given and cannot be read.
        pydantic.ValidationError
            If the document does not match the model.
        """
        if isinstance(source, Path) or not source.lstrip().startswith("{"):
            text = Path(source).read_text(encoding="utf-8")
        else:
            text = source
        return cls.model_validate_json(text)

    def to_json(self) -> str:
        """Serialize to an indented JSON document."""
        return json.dumps(self.model_dump(mode="json"), indent=2)


def fmt(value: float) -> str:
    """Format a number with 12 significant digits."""
    return format(float(value), f".{SIGNIFICANT_DIGITS}g")


def rounded(obj: Any) -> Any:
    """Round every float in a JSON-like structure to 12 significant digits."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON text with rounded floats."""
    return json.dumps(rounded(obj), indent=2) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render rows as CSV, floats with 12 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [
                fmt(v)
                if isinstance(v, (float, np.floating)) and not isinstance(v, bool)
                else v
                for v in row
            ]
        )
    return buffer.getvalue()


def write_text(path: str | Path, text: str) -> Path:
    """Write `text` to `path`, creating parent directories."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    return target
