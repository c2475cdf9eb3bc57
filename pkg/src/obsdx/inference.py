"""Scoring: similarities -> observation probabilities -> diagnosis scores.

Per descriptor, the positive and negative prompt similarities pass through
a pairwise softmax (temperature tau) to give the probability that the
observation is present. A pathology's score is the mean of the log
observation probabilities; its probability is exp(score), the geometric
mean. Multiple views of a study are combined on the probability side
(mean, max, or a single designated frontal view) before pooling. The
healthy label is rule-based: one minus the maximum pathology probability
(or the product of complements, behind a flag).

Everything here is pure given an immutable backend view, so studies can be
diagnosed in parallel without coordination.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .backends import EmbeddingBackend, ImageRef
from .catalog import Catalog, PromptPair, PromptStyle, plan_prompts, prompt_plan
from .errors import ConsistencyError, ValidationError

PROBABILITY_CLAMP = 1e-12


class AggregationMode(enum.Enum):
    SINGLE_FRONTAL = "single-frontal"
    MEAN = "mean"
    MAX = "max"

    @classmethod
    def from_string(cls, value: str) -> "AggregationMode":
        normalized = value.strip().lower().replace("_", "-").replace(" ", "-")
        for mode in cls:
            if mode.value == normalized:
                return mode
        valid = ", ".join(m.value for m in cls)
        raise ValidationError(f"unknown aggregation mode {value!r} (valid: {valid})")


@dataclass(frozen=True)
class ObservationProbability:
    """Probability that one observation is present, with its provenance."""

    pathology: str
    descriptor: str
    probability: float
    sim_pos: float
    sim_neg: Optional[float]


@dataclass(frozen=True)
class PathologyResult:
    name: str
    score: float
    probability: float
    observations: tuple[ObservationProbability, ...]
    rule_based: bool = False


@dataclass(frozen=True)
class StudyPrediction:
    study_id: str
    style: PromptStyle
    aggregation: AggregationMode
    pathologies: tuple[PathologyResult, ...]

    def result(self, name: str) -> PathologyResult:
        for p in self.pathologies:
            if p.name == name:
                return p
        raise KeyError(f"no prediction for pathology {name!r}")

    def probability(self, name: str) -> float:
        return self.result(name).probability

    def to_dict(self) -> dict:
        return {
            "study_id": self.study_id,
            "style": self.style.value,
            "aggregation": self.aggregation.value,
            "pathologies": [
                {
                    "name": p.name,
                    "score": p.score,
                    "probability": p.probability,
                    "descriptors": [
                        {
                            "text": o.descriptor,
                            "probability": o.probability,
                            "sim_pos": o.sim_pos,
                            "sim_neg": o.sim_neg,
                        }
                        for o in p.observations
                    ],
                }
                for p in self.pathologies
            ],
        }


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit vectors, clamped to [-1, 1] against drift."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    value = float(np.dot(a.astype(np.float64), b.astype(np.float64)))
    return min(1.0, max(-1.0, value))


def contrastive_probability(sim_pos: float, sim_neg: float, tau: float = 1.0) -> float:
    """Softmax over the positive/negative similarity pair.

    Delegates to the active kernel so scalar calls agree bit-for-bit with
    the batched inference path. contrastive_probability(a, b, tau) +
    contrastive_probability(b, a, tau) sums to exactly 1.0.
    """
    if tau <= 0.0 or not math.isfinite(tau):
        raise ValidationError(f"temperature must be positive and finite, got {tau}")
    if not (math.isfinite(sim_pos) and math.isfinite(sim_neg)):
        raise ValidationError("similarities must be finite")
    out = kernels.contrastive_probs(
        np.array([sim_pos], dtype=np.float64),
        np.array([sim_neg], dtype=np.float64),
        float(tau),
    )
    return float(out[0])


def basic_probability(sim_pos: float) -> float:
    """Map a cosine in [-1, 1] onto [0, 1] for styles without negatives."""
    return (sim_pos + 1.0) / 2.0


def pool_pathology_score(observation_probs: Sequence[float]) -> float:
    """Mean log probability; exp of it is the geometric mean.

    Probabilities are clamped to [1e-12, 1] first, so a zero contributes
    log(1e-12) instead of -inf.
    """
    if len(observation_probs) == 0:
        raise ValidationError("cannot pool an empty probability list")
    arr = np.asarray(observation_probs, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise ValidationError("observation probabilities must lie in [0, 1]")
    return float(kernels.pool_log_mean(arr, PROBABILITY_CLAMP))


def no_finding_score(
    pathology_probs: Mapping[str, float] | Sequence[float], variant: str = "max"
) -> float:
    """Healthy-class probability from the other labels' probabilities.

    "max" reads absence strictly: 1 - max(p). "product" multiplies the
    complements instead.
    """
    values = list(pathology_probs.values() if isinstance(pathology_probs, Mapping) else pathology_probs)
    if not values:
        raise ValidationError("no pathology probabilities to derive a no-finding score from")
    if variant == "max":
        return 1.0 - max(values)
    if variant == "product":
        result = 1.0
        for v in values:
            result *= 1.0 - v
        return result
    raise ValidationError(f"unknown no-finding variant {variant!r}")


def aggregate_views(
    per_view: Sequence[Sequence[ObservationProbability]],
    mode: AggregationMode,
    frontal: Optional[Sequence[bool]] = None,
) -> list[ObservationProbability]:
    """Combine per-view observation probabilities into one list.

    All views must cover the same descriptors in the same order. Mean
    averages probabilities (and similarity provenance) across views; Max
    takes each descriptor's most confident view; SingleFrontal returns the
    first designated frontal view untouched.
    """
    if not per_view:
        raise ValidationError("at least one view is required")
    first = per_view[0]
    signature = [(o.pathology, o.descriptor) for o in first]
    for view in per_view[1:]:
        if [(o.pathology, o.descriptor) for o in view] != signature:
            raise ConsistencyError("views cover different descriptor sets")

    if mode is AggregationMode.SINGLE_FRONTAL:
        if frontal is None or len(frontal) != len(per_view):
            raise ValidationError("single-frontal aggregation needs per-view frontal flags")
        for view, is_frontal in zip(per_view, frontal):
            if is_frontal:
                return list(view)
        raise ValidationError("single-frontal aggregation requires a frontal view")

    if len(per_view) == 1:
        return list(first)

    aggregated: list[ObservationProbability] = []
    for idx, obs in enumerate(first):
        probs = [view[idx].probability for view in per_view]
        sims_pos = [view[idx].sim_pos for view in per_view]
        sims_neg = [view[idx].sim_neg for view in per_view]
        if mode is AggregationMode.MEAN:
            probability = sum(probs) / len(probs)
            sim_pos = sum(sims_pos) / len(sims_pos)
            sim_neg = None if sims_neg[0] is None else sum(sims_neg) / len(sims_neg)
        else:
            best = max(range(len(probs)), key=probs.__getitem__)
            probability = probs[best]
            sim_pos = sims_pos[best]
            sim_neg = sims_neg[best]
        aggregated.append(
            ObservationProbability(
                pathology=obs.pathology,
                descriptor=obs.descriptor,
                probability=probability,
                sim_pos=sim_pos,
                sim_neg=sim_neg,
            )
        )
    return aggregated


def _view_observations(
    plan: Sequence[PromptPair],
    positive_sims: np.ndarray,
    negative_sims: Optional[np.ndarray],
    style: PromptStyle,
    tau: float,
) -> list[ObservationProbability]:
    if style.has_negative:
        assert negative_sims is not None
        probs = kernels.contrastive_probs(positive_sims, negative_sims, tau)
    else:
        probs = (positive_sims + 1.0) / 2.0
    observations = []
    for i, pair in enumerate(plan):
        observations.append(
            ObservationProbability(
                pathology=pair.pathology,
                descriptor=pair.descriptor if pair.descriptor is not None else pair.pathology,
                probability=float(probs[i]),
                sim_pos=float(positive_sims[i]),
                sim_neg=float(negative_sims[i]) if negative_sims is not None else None,
            )
        )
    return observations


def diagnose_study(
    images: Sequence[ImageRef],
    catalog: Catalog,
    style: PromptStyle,
    backend: EmbeddingBackend,
    tau: float = 1.0,
    mode: AggregationMode = AggregationMode.MEAN,
    no_finding_variant: str = "max",
) -> StudyPrediction:
    """Score every catalog pathology on one study.

    Embeds each prompt and view once, computes per-view observation
    probabilities, aggregates views by `mode`, pools with the log-mean, and
    scores a rule-based pathology from the others' probabilities. The
    explanation lists each pathology's descriptors sorted by probability,
    most confident first.
    """
    if not images:
        raise ValidationError("a study needs at least one image")
    study_ids = {ref.study_id for ref in images}
    if len(study_ids) != 1:
        raise ValidationError(f"images span multiple studies: {sorted(study_ids)}")
    if tau <= 0.0:
        raise ValidationError(f"temperature must be positive, got {tau}")
    scored = catalog.scored()
    if not scored:
        raise ValidationError(f"catalog {catalog.name!r} has no scorable pathologies")

    plan = prompt_plan(catalog, style)
    prompt_vectors = {p: backend.embed_text(p) for p in plan_prompts(plan)}
    positive_matrix = np.stack([prompt_vectors[p.positive] for p in plan]).astype(np.float64)
    negative_matrix = None
    if style.has_negative:
        negative_matrix = np.stack(
            [prompt_vectors[p.negative] for p in plan]  # type: ignore[index]
        ).astype(np.float64)

    per_view: list[list[ObservationProbability]] = []
    for ref in images:
        image_vec = backend.embed_image(ref).astype(np.float64)
        if image_vec.shape[0] != positive_matrix.shape[1]:
            raise ConsistencyError(
                f"image {ref.key!r} has dimension {image_vec.shape[0]}, "
                f"prompts have {positive_matrix.shape[1]}"
            )
        pos_sims = np.clip(positive_matrix @ image_vec, -1.0, 1.0)
        neg_sims = None
        if negative_matrix is not None:
            neg_sims = np.clip(negative_matrix @ image_vec, -1.0, 1.0)
        per_view.append(_view_observations(plan, pos_sims, neg_sims, style, float(tau)))

    frontal_flags = [ref.frontal for ref in images]
    combined = aggregate_views(per_view, mode, frontal=frontal_flags)

    by_pathology: dict[str, list[ObservationProbability]] = {}
    for obs in combined:
        by_pathology.setdefault(obs.pathology, []).append(obs)

    results: list[PathologyResult] = []
    scored_probabilities: dict[str, float] = {}
    for pathology in scored:
        observations = by_pathology[pathology.name]
        score = pool_pathology_score([o.probability for o in observations])
        probability = math.exp(score)
        scored_probabilities[pathology.name] = probability
        ordered = tuple(sorted(observations, key=lambda o: -o.probability))
        results.append(
            PathologyResult(
                name=pathology.name,
                score=score,
                probability=probability,
                observations=ordered,
            )
        )

    rule_based = catalog.rule_based_pathology
    if rule_based is not None:
        probability = no_finding_score(scored_probabilities, variant=no_finding_variant)
        score = math.log(probability) if probability > 0.0 else -math.inf
        position = [p.name for p in catalog.pathologies].index(rule_based.name)
        results.insert(
            position,
            PathologyResult(
                name=rule_based.name,
                score=score,
                probability=probability,
                observations=(),
                rule_based=True,
            ),
        )

    return StudyPrediction(
        study_id=images[0].study_id,
        style=style,
        aggregation=mode,
        pathologies=tuple(results),
    )
