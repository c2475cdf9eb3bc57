"""Supervised Gaussian Naive Bayes head over descriptor probabilities.

The zero-shot pooling weights every descriptor equally. This head learns,
per pathology, how informative each descriptor probability actually is:
one independent binary classifier per pathology, Gaussian class
conditionals per feature, fit by maximum likelihood with a variance floor.
Feature ordering is pinned to a catalog fingerprint so a model cannot be
applied to descriptor vectors it was not trained for.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .catalog import Catalog
from .errors import FingerprintMismatchError, ParseError, ValidationError
from .inference import StudyPrediction

VARIANCE_FLOOR = 1e-9
MODEL_VERSION = 1

FEATURES_OWN = "own"  # each pathology sees only its own descriptors
FEATURES_ALL = "all"  # every pathology sees the full concatenated vector


@dataclass(frozen=True)
class PathologyNB:
    prior0: float
    prior1: float
    feature_names: tuple[str, ...]
    mean0: np.ndarray
    var0: np.ndarray
    mean1: np.ndarray
    var1: np.ndarray


@dataclass(frozen=True)
class NBModel:
    catalog_fingerprint: str
    feature_mode: str
    pathologies: Mapping[str, PathologyNB]
    version: int = MODEL_VERSION


def fit_pathology_nb(
    features: np.ndarray, labels: np.ndarray, feature_names: Sequence[str]
) -> PathologyNB:
    """Maximum-likelihood Gaussian parameters per class and feature.

    `features` is (studies x descriptors) of probabilities in [0, 1];
    `labels` is the binary diagnosis column. Variances are floored at
    1e-9 so a constant feature cannot produce an infinite likelihood.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ValidationError("features must be a 2-d matrix (studies x descriptors)")
    if features.shape[1] != len(feature_names):
        raise ValidationError(
            f"{features.shape[1]} feature columns but {len(feature_names)} names"
        )
    if features.shape[0] != labels.shape[0]:
        raise ValidationError(
            f"{features.shape[0]} feature rows but {labels.shape[0]} labels"
        )
    if np.any(features < 0.0) or np.any(features > 1.0):
        raise ValidationError("descriptor probabilities must lie in [0, 1]")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValidationError("labels must be 0 or 1")
    n1 = int(np.count_nonzero(labels == 1))
    n0 = labels.shape[0] - n1
    if n0 == 0 or n1 == 0:
        raise ValidationError("both classes need at least one sample")

    x0 = features[labels == 0]
    x1 = features[labels == 1]
    return PathologyNB(
        prior0=n0 / labels.shape[0],
        prior1=n1 / labels.shape[0],
        feature_names=tuple(feature_names),
        mean0=np.mean(x0, axis=0),
        var0=np.maximum(np.var(x0, axis=0), VARIANCE_FLOOR),
        mean1=np.mean(x1, axis=0),
        var1=np.maximum(np.var(x1, axis=0), VARIANCE_FLOOR),
    )


def predict_log_odds(model: PathologyNB, features: np.ndarray) -> np.ndarray:
    """Log posterior odds for one or many feature vectors."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != len(model.feature_names):
        raise FingerprintMismatchError(
            f"feature vector has {x.shape[1]} entries, model expects "
            f"{len(model.feature_names)}"
        )
    out = kernels.gnb_log_odds(
        x,
        model.mean0,
        model.var0,
        model.mean1,
        model.var1,
        math.log(model.prior1) - math.log(model.prior0),
    )
    return out[0] if single else out


def predict_proba(model: PathologyNB, features: np.ndarray) -> np.ndarray | float:
    """Posterior P(diagnosis | descriptor probabilities), in log space.

    predict_proba(x) and its complement (the class-0 posterior) sum to 1
    well within 1e-12.
    """
    log_odds = np.atleast_1d(predict_log_odds(model, features))
    q = np.exp(-np.abs(log_odds))
    small = q / (1.0 + q)
    probs = np.where(log_odds < 0.0, small, 1.0 - small)
    return float(probs[0]) if np.asarray(features).ndim == 1 else probs


def features_for(
    prediction: StudyPrediction, catalog: Catalog, pathology_name: str, feature_mode: str
) -> np.ndarray:
    """Descriptor-probability vector for one study in canonical catalog order."""
    lookup = {
        (p.name, o.descriptor): o.probability
        for p in prediction.pathologies
        for o in p.observations
    }
    vector = [lookup[key] for key in _feature_keys(catalog, pathology_name, feature_mode)]
    return np.asarray(vector, dtype=np.float64)


def _feature_keys(catalog: Catalog, pathology_name: str, feature_mode: str):
    if feature_mode == FEATURES_OWN:
        pathology = catalog.get(pathology_name)
        return [(pathology.name, d.text) for d in pathology.descriptors]
    if feature_mode == FEATURES_ALL:
        return [(p.name, d.text) for p in catalog.scored() for d in p.descriptors]
    raise ValidationError(f"unknown feature mode {feature_mode!r}")


def feature_names(catalog: Catalog, pathology_name: str, feature_mode: str) -> list[str]:
    return [f"{p}:{d}" for p, d in _feature_keys(catalog, pathology_name, feature_mode)]


def train_nb_model(
    catalog: Catalog,
    predictions: Mapping[str, StudyPrediction],
    labels: Mapping[str, Mapping[str, int]],
    feature_mode: str = FEATURES_OWN,
) -> NBModel:
    """Fit one binary NB per scorable pathology with a definite label.

    `labels` maps study_id -> {pathology -> 1/0/-1}; uncertain and blank
    labels drop the study for that pathology only.
    """
    models: dict[str, PathologyNB] = {}
    for pathology in catalog.scored():
        rows = []
        ys = []
        for study_id, study_labels in labels.items():
            label = study_labels.get(pathology.name)
            if label not in (0, 1):
                continue
            rows.append(features_for(predictions[study_id], catalog, pathology.name, feature_mode))
            ys.append(label)
        if not rows:
            continue
        matrix = np.stack(rows)
        ys_arr = np.asarray(ys)
        if len(set(ys)) < 2:
            continue  # one-class pathology: nothing to fit
        models[pathology.name] = fit_pathology_nb(
            matrix, ys_arr, feature_names(catalog, pathology.name, feature_mode)
        )
    if not models:
        raise ValidationError("no pathology had both classes present; nothing to train")
    return NBModel(
        catalog_fingerprint=catalog.fingerprint(),
        feature_mode=feature_mode,
        pathologies=models,
    )


def evaluate_nb(
    table,
    catalog: Catalog,
    predictions: Mapping[str, StudyPrediction],
    model: NBModel,
    metadata: Optional[Mapping[str, object]] = None,
):
    """AUROC of the NB posteriors over a label table, per modeled pathology."""
    from .evaluation import EvalReport, PathologyEval, auroc

    per_pathology = {}
    evaluated = []
    for name, pathology_model in model.pathologies.items():
        scores = []
        labels = []
        for row in table.studies:
            label = row.labels.get(name)
            if label not in (0, 1):
                continue
            x = features_for(predictions[row.study_id], catalog, name, model.feature_mode)
            scores.append(float(predict_proba(pathology_model, x)))
            labels.append(label)
        n_pos = sum(labels)
        n_neg = len(labels) - n_pos
        value = auroc(scores, labels) if (n_pos and n_neg) else None
        per_pathology[name] = PathologyEval(auroc=value, n_pos=n_pos, n_neg=n_neg)
        if value is not None:
            evaluated.append(value)
    macro = float(np.mean(evaluated)) if evaluated else None
    return EvalReport(per_pathology=per_pathology, macro_auroc=macro, metadata=dict(metadata or {}))


def save_model(model: NBModel, path: str | Path) -> None:
    document = {
        "version": model.version,
        "catalog_fingerprint": model.catalog_fingerprint,
        "feature_mode": model.feature_mode,
        "pathologies": {
            name: {
                "prior0": m.prior0,
                "prior1": m.prior1,
                "features": [
                    {
                        "name": m.feature_names[j],
                        "mean0": float(m.mean0[j]),
                        "var0": float(m.var0[j]),
                        "mean1": float(m.mean1[j]),
                        "var1": float(m.var1[j]),
                    }
                    for j in range(len(m.feature_names))
                ],
            }
            for name, m in model.pathologies.items()
        },
    }
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path, catalog: Catalog | None = None) -> NBModel:
    """Load a model file; with a catalog given, enforce the fingerprint."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file {path}: line {exc.lineno}: {exc.msg}") from exc
    try:
        version = document["version"]
        if version != MODEL_VERSION:
            raise ParseError(f"model file {path}: unsupported version {version}")
        pathologies = {}
        for name, entry in document["pathologies"].items():
            features = entry["features"]
            pathologies[name] = PathologyNB(
                prior0=float(entry["prior0"]),
                prior1=float(entry["prior1"]),
                feature_names=tuple(f["name"] for f in features),
                mean0=np.array([f["mean0"] for f in features], dtype=np.float64),
                var0=np.array([f["var0"] for f in features], dtype=np.float64),
                mean1=np.array([f["mean1"] for f in features], dtype=np.float64),
                var1=np.array([f["var1"] for f in features], dtype=np.float64),
            )
        model = NBModel(
            catalog_fingerprint=document["catalog_fingerprint"],
            feature_mode=document["feature_mode"],
            pathologies=pathologies,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"model file {path}: malformed document ({exc})") from exc
    if catalog is not None and model.catalog_fingerprint != catalog.fingerprint():
        raise FingerprintMismatchError(
            f"model {path} was trained against a different catalog "
            f"(fingerprint {model.catalog_fingerprint[:12]}..., "
            f"catalog {catalog.fingerprint()[:12]}...)"
        )
    return model
