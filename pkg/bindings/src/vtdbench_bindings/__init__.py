"""In-process bindings for researcher pipelines.

`evaluate` and `vtda` run the same evaluation entry points the CLI
dispatches to, so reports are score-identical to the CLI's to the last
digit. Inputs are file paths and plain mappings; failures raise typed
exceptions mirroring the CLI exit codes (1 validation, 2 I/O or format).
"""

from __future__ import annotations

from collections.abc import Mapping

import vtdbench
from vtdbench.errors import FormatError as _FormatError
from vtdbench.errors import ValidationError as _ValidationError
from vtdbench.tasks import run_aggregation, run_evaluation
from vtdbench.vtda import ScalingTable

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "BindingError",
    "ValidationFailure",
    "FileFailure",
    "evaluate",
    "vtda",
]


class BindingError(Exception):
    """Base class; `exit_code` mirrors the CLI."""

    exit_code: int | None = None


class ValidationFailure(BindingError):
    """Semantic or schema problem (CLI exit code 1)."""

    exit_code = 1


class FileFailure(BindingError):
    """Missing, unreadable or malformed input bytes (CLI exit code 2)."""

    exit_code = 2


class BoundReport(Mapping):
    """Read-only mapping view over a report document."""

    def __init__(self, document: dict):
        self._document = dict(document)

    def __getitem__(self, key):
        return self._document[key]

    def __iter__(self):
        return iter(self._document)

    def __len__(self):
        return len(self._document)

    @property
    def scores(self) -> dict:
        return dict(self._document["scores"])

    def to_dict(self) -> dict:
        return dict(self._document)

    def __repr__(self):
        return f"BoundReport(task={self._document.get('task')!r}, scores={self.scores!r})"


def _translate(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except _ValidationError as exc:
        raise ValidationFailure(str(exc)) from exc
    except (_FormatError, OSError) as exc:
        raise FileFailure(str(exc)) from exc


def evaluate(task: str, pred_path, gt_path, options: Mapping | None = None) -> BoundReport:
    """Evaluate one task from prediction/ground-truth files.

    `options` mirrors the CLI flags (workers, subsample, sigmas, ...).
    """
    document = _translate(
        run_evaluation, task, pred_path, gt_path, dict(options or {})
    )
    return BoundReport(document)


def vtda(scores: Mapping, scales: Mapping | None = None, partial: bool = False) -> BoundReport:
    """Aggregate a slot -> value mapping into group scores and the total.

    `scales` may carry `sigma` and/or `scale` sub-mappings; omitted means
    the canonical published table.
    """
    if scales is None:
        table = vtdbench.default_scales()
    else:
        sigma = dict(scales.get("sigma", {}))
        scale = scales.get("scale")
        if scale is None:
            table = _translate(ScalingTable.from_sigmas, sigma)
        else:
            table = _translate(ScalingTable.from_pairs, sigma, dict(scale))
    document = _translate(run_aggregation, dict(scores), table, partial=partial)
    return BoundReport(document)
