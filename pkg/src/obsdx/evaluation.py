"""Labelled-dataset evaluation: per-pathology AUROC and style/view ablations.

Label tables are CheXpert-style CSVs: one row per image, a path (or
study id) column, and one column per pathology holding 1 / 0 / -1 / blank.
Uncertain (-1) and blank cells are excluded per pathology; a pathology
with only one class present is marked unevaluated and left out of the
macro mean. AUROC is the Mann-Whitney statistic with half credit for
ties, so it is invariant under any strictly increasing score transform.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .backends import CachingBackend, EmbeddingBackend, ImageRef
from .catalog import Catalog, PromptStyle
from .errors import ParseError, ValidationError
from .inference import AggregationMode, StudyPrediction, diagnose_study

POSITIVE_LABEL = 1
NEGATIVE_LABEL = 0
UNCERTAIN_LABEL = -1

_PATH_COLUMNS = {"path"}
_STUDY_COLUMNS = {"study", "study_id"}
_METADATA_COLUMNS = {"sex", "age", "frontal/lateral", "ap/pa", "view", "view_id"}


@dataclass(frozen=True)
class StudyRow:
    study_id: str
    images: tuple[ImageRef, ...]
    labels: Mapping[str, int]  # pathology -> 1/0/-1; missing means blank


@dataclass(frozen=True)
class LabelTable:
    pathologies: tuple[str, ...]
    studies: tuple[StudyRow, ...]

    def __len__(self) -> int:
        return len(self.studies)


@dataclass(frozen=True)
class PathologyEval:
    auroc: Optional[float]  # None marks an unevaluated pathology
    n_pos: int
    n_neg: int


@dataclass(frozen=True)
class EvalReport:
    per_pathology: Mapping[str, PathologyEval]
    macro_auroc: Optional[float]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metadata": dict(self.metadata),
            "pathologies": [
                {
                    "name": name,
                    "auroc": entry.auroc,
                    "evaluated": entry.auroc is not None,
                    "positives": entry.n_pos,
                    "negatives": entry.n_neg,
                }
                for name, entry in self.per_pathology.items()
            ],
            "macro_auroc": self.macro_auroc,
        }

    def to_text(self) -> str:
        width = max([len(n) for n in self.per_pathology] + [len("macro (mean)")])
        lines = [f"{'pathology':<{width}}  {'AUROC':>7}  {'pos':>5}  {'neg':>5}"]
        lines.append("-" * (width + 24))
        for name, entry in self.per_pathology.items():
            shown = f"{entry.auroc:7.4f}" if entry.auroc is not None else "    n/a"
            lines.append(f"{name:<{width}}  {shown}  {entry.n_pos:5d}  {entry.n_neg:5d}")
        lines.append("-" * (width + 24))
        macro = f"{self.macro_auroc:7.4f}" if self.macro_auroc is not None else "    n/a"
        lines.append(f"{'macro (mean)':<{width}}  {macro}")
        return "\n".join(lines)


def _parse_label_cell(raw: str, row_number: int, column: str) -> Optional[int]:
    text = raw.strip().replace("−", "-")  # tolerate a unicode minus
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row_number}: column {column!r}: cannot parse label {raw!r}"
        ) from None
    if value == 1.0:
        return POSITIVE_LABEL
    if value == 0.0:
        return NEGATIVE_LABEL
    if value == -1.0:
        return UNCERTAIN_LABEL
    raise ParseError(f"row {row_number}: column {column!r}: label {raw!r} is not 1/0/-1")


def _view_from_path(path: str, declared: Optional[str]) -> bool:
    """True for frontal. Path substrings win; otherwise a declared column."""
    lowered = path.lower()
    if "lateral" in lowered:
        return False
    if "frontal" in lowered:
        return True
    if declared is not None:
        return not declared.strip().lower().startswith("l")
    return True


def load_label_table(source: str | Path, catalog: Catalog) -> LabelTable:
    """Parse a label CSV against a catalog.

    Columns that name no catalog pathology (and are not recognized
    metadata) are ignored with a warning. Rows sharing a study id merge
    into one study with several views; their labels must agree.
    """
    if isinstance(source, Path) or "\n" not in str(source):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ParseError(f"label file not found: {path}") from None
    else:
        text = str(source)

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("label table is empty") from None

    id_column = None
    id_is_path = False
    for i, name in enumerate(header):
        if name.strip().lower() in _PATH_COLUMNS:
            id_column, id_is_path = i, True
            break
        if name.strip().lower() in _STUDY_COLUMNS:
            id_column, id_is_path = i, False
            break
    if id_column is None:
        raise ParseError("label table needs a 'Path' or 'study_id' column")

    view_column = None
    for i, name in enumerate(header):
        if name.strip().lower() == "frontal/lateral":
            view_column = i

    label_columns: dict[int, str] = {}
    for i, name in enumerate(header):
        if i == id_column:
            continue
        clean = name.strip()
        if clean in catalog:
            label_columns[i] = clean
        elif clean.lower() not in _METADATA_COLUMNS:
            warnings.warn(f"label column {clean!r} names no catalog pathology; ignored")

    studies: dict[str, dict] = {}
    order: list[str] = []
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        identifier = row[id_column].strip()
        if not identifier:
            raise ParseError(f"row {row_number}: empty study identifier")
        if id_is_path:
            slash = identifier.rfind("/")
            study_id = identifier[:slash] if slash > 0 else identifier
            view_id = identifier[slash + 1 :] if slash > 0 else identifier
        else:
            study_id, view_id = identifier, f"view{row_number}"
        declared_view = row[view_column] if view_column is not None and view_column < len(row) else None
        ref = ImageRef(
            study_id=study_id,
            view_id=view_id,
            source=identifier if id_is_path else None,
            frontal=_view_from_path(identifier, declared_view),
        )
        labels: dict[str, int] = {}
        for i, pathology in label_columns.items():
            if i >= len(row):
                continue
            parsed = _parse_label_cell(row[i], row_number, pathology)
            if parsed is not None:
                labels[pathology] = parsed
        entry = studies.get(study_id)
        if entry is None:
            studies[study_id] = {"images": [ref], "labels": labels}
            order.append(study_id)
        else:
            if any(existing.view_id == ref.view_id for existing in entry["images"]):
                raise ValidationError(
                    f"row {row_number}: duplicate view {ref.view_id!r} for study {study_id!r}"
                )
            entry["images"].append(ref)
            for pathology, value in labels.items():
                previous = entry["labels"].setdefault(pathology, value)
                if previous != value:
                    raise ValidationError(
                        f"row {row_number}: study {study_id!r} has conflicting labels "
                        f"for {pathology!r}"
                    )

    rows = tuple(
        StudyRow(
            study_id=sid,
            images=tuple(studies[sid]["images"]),
            labels=dict(studies[sid]["labels"]),
        )
        for sid in order
    )
    pathologies = tuple(p.name for p in catalog.pathologies if any(p.name in r.labels for r in rows))
    return LabelTable(pathologies=pathologies, studies=rows)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> Optional[float]:
    """Probability a random positive outranks a random negative (ties: 0.5).

    Returns None when only one class is present; that marks the pathology
    unevaluable rather than faking a number.
    """
    score_arr = np.asarray(scores, dtype=np.float64)
    label_arr = np.asarray(labels)
    if score_arr.shape != label_arr.shape:
        raise ValidationError("scores and labels differ in length")
    if not np.all(np.isin(label_arr, (0, 1))):
        raise ValidationError("labels must be 0 or 1")
    n_pos = int(np.count_nonzero(label_arr == 1))
    n_neg = label_arr.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    return float(kernels.rank_auroc(score_arr, label_arr.astype(np.uint8)))


def evaluate(
    table: LabelTable,
    predictions: Mapping[str, StudyPrediction],
    metadata: Optional[Mapping[str, object]] = None,
) -> EvalReport:
    """Score predictions against a label table.

    Every study carrying at least one definite (0/1) label needs a
    prediction. AUROC uses the predicted pathology probability; studies
    whose label for a pathology is uncertain or blank are skipped for that
    pathology only.
    """
    needed = [
        row.study_id
        for row in table.studies
        if any(v in (POSITIVE_LABEL, NEGATIVE_LABEL) for v in row.labels.values())
    ]
    missing = sorted(set(needed) - set(predictions))
    if missing:
        raise ValidationError(f"missing predictions for studies: {', '.join(missing)}")

    per_pathology: dict[str, PathologyEval] = {}
    evaluated: list[float] = []
    for pathology in table.pathologies:
        scores: list[float] = []
        labels: list[int] = []
        for row in table.studies:
            label = row.labels.get(pathology)
            if label not in (POSITIVE_LABEL, NEGATIVE_LABEL):
                continue
            scores.append(predictions[row.study_id].probability(pathology))
            labels.append(label)
        n_pos = sum(labels)
        n_neg = len(labels) - n_pos
        value = auroc(scores, labels) if (n_pos and n_neg) else None
        per_pathology[pathology] = PathologyEval(auroc=value, n_pos=n_pos, n_neg=n_neg)
        if value is not None:
            evaluated.append(value)

    macro = float(np.mean(evaluated)) if evaluated else None
    return EvalReport(
        per_pathology=per_pathology, macro_auroc=macro, metadata=dict(metadata or {})
    )


def predict_table(
    table: LabelTable,
    catalog: Catalog,
    backend: EmbeddingBackend,
    style: PromptStyle,
    mode: AggregationMode,
    tau: float = 1.0,
    no_finding_variant: str = "max",
    jobs: int = 1,
) -> dict[str, StudyPrediction]:
    """Diagnose every study of a label table."""
    cached = backend if isinstance(backend, CachingBackend) else CachingBackend(backend)

    def run(row: StudyRow) -> tuple[str, StudyPrediction]:
        prediction = diagnose_study(
            row.images,
            catalog,
            style,
            cached,
            tau=tau,
            mode=mode,
            no_finding_variant=no_finding_variant,
        )
        return row.study_id, prediction

    if jobs > 1 and len(table.studies) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return dict(pool.map(run, table.studies))
    return dict(run(row) for row in table.studies)


def run_ablation(
    table: LabelTable,
    catalog: Catalog,
    backend: EmbeddingBackend,
    styles: Sequence[PromptStyle],
    modes: Sequence[AggregationMode],
    tau: float = 1.0,
    no_finding_variant: str = "max",
    jobs: int = 1,
) -> list[EvalReport]:
    """One EvalReport per (style, mode) combination, sharing one cache.

    The cache makes every embedding a one-time cost across the whole grid;
    re-scoring per combination is just the similarity arithmetic.
    """
    cached = CachingBackend(backend)
    reports: list[EvalReport] = []
    for style in styles:
        for mode in modes:
            predictions = predict_table(
                table, catalog, cached, style, mode, tau, no_finding_variant, jobs
            )
            reports.append(
                evaluate(
                    table,
                    predictions,
                    metadata={
                        "style": style.value,
                        "mode": mode.value,
                        "tau": tau,
                        "catalog": catalog.name,
                    },
                )
            )
    return reports


def ablation_table_text(reports: Iterable[EvalReport]) -> str:
    """Aligned comparison table over (style, mode) runs."""
    rows = []
    for report in reports:
        macro = report.macro_auroc
        rows.append(
            (
                str(report.metadata.get("style", "?")),
                str(report.metadata.get("mode", "?")),
                f"{macro:7.4f}" if macro is not None else "    n/a",
            )
        )
    if not rows:
        return "(no ablation runs)"
    style_w = max(len(r[0]) for r in rows + [("style", "", "")])
    mode_w = max(len(r[1]) for r in rows + [("", "mode", "")])
    lines = [f"{'style':<{style_w}}  {'mode':<{mode_w}}  {'macro AUROC':>11}"]
    lines.append("-" * (style_w + mode_w + 15))
    for style, mode, macro in rows:
        lines.append(f"{style:<{style_w}}  {mode:<{mode_w}}  {macro:>11}")
    return "\n".join(lines)
