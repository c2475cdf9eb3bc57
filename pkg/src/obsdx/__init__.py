"""obsdx: explainable zero-shot multi-label diagnosis from observation prompts."""

from .backends import (
    CachingBackend,
    FileStoreBackend,
    HttpBackend,
    ImageRef,
    SyntheticBackend,
    synthetic_oracle,
)
from .catalog import (
    Catalog,
    Descriptor,
    Pathology,
    PromptPair,
    PromptStyle,
    load_catalog,
    load_shipped_catalog,
    parse_catalog,
    prompt_plan,
    render_pathology_prompt,
    render_prompt,
    serialize_catalog,
)
from .evaluation import (
    EvalReport,
    LabelTable,
    auroc,
    evaluate,
    load_label_table,
    predict_table,
    run_ablation,
)
from .inference import (
    AggregationMode,
    ObservationProbability,
    PathologyResult,
    StudyPrediction,
    aggregate_views,
    basic_probability,
    contrastive_probability,
    cosine_similarity,
    diagnose_study,
    no_finding_score,
    pool_pathology_score,
)
from .naive_bayes import NBModel, load_model, predict_proba, save_model, train_nb_model
from .store import open_store, write_store

__version__ = "0.1.0"

__all__ = [
    "AggregationMode",
    "CachingBackend",
    "Catalog",
    "Descriptor",
    "EvalReport",
    "FileStoreBackend",
    "HttpBackend",
    "ImageRef",
    "LabelTable",
    "NBModel",
    "ObservationProbability",
    "Pathology",
    "PathologyResult",
    "PromptPair",
    "PromptStyle",
    "StudyPrediction",
    "SyntheticBackend",
    "aggregate_views",
    "auroc",
    "basic_probability",
    "contrastive_probability",
    "cosine_similarity",
    "diagnose_study",
    "evaluate",
    "load_catalog",
    "load_label_table",
    "load_model",
    "load_shipped_catalog",
    "no_finding_score",
    "open_store",
    "parse_catalog",
    "pool_pathology_score",
    "predict_proba",
    "predict_table",
    "prompt_plan",
    "render_pathology_prompt",
    "render_prompt",
    "run_ablation",
    "save_model",
    "serialize_catalog",
    "synthetic_oracle",
    "train_nb_model",
    "write_store",
]
