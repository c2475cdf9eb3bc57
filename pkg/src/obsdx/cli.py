"""Command-line entry point.

Subcommands wire catalogs, backends, inference, evaluation, ablations and
the Naive Bayes head into reproducible runs. Option precedence is
command-line flags over config-file values over built-in defaults; every
JSON output embeds the fully resolved configuration.

Exit codes: 0 ok, 2 input error, 3 consistency error, 4 transport error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .backends import (
    CachingBackend,
    FileStoreBackend,
    HttpBackend,
    ImageRef,
    SyntheticBackend,
)
from .catalog import Catalog, PromptStyle, load_catalog, load_shipped_catalog, prompt_plan
from .errors import InputError, ObsdxError, ParseError, ValidationError
from .evaluation import (
    ablation_table_text,
    evaluate,
    load_label_table,
    predict_table,
    run_ablation,
)
from .inference import AggregationMode, diagnose_study
from .naive_bayes import (
    FEATURES_ALL,
    FEATURES_OWN,
    evaluate_nb,
    load_model,
    save_model,
    train_nb_model,
)
from .store import write_store

_DEFAULTS = {
    "catalog": "refined",
    "style": "report-style",
    "mode": "mean",
    "temperature": 1.0,
    "no_finding": "max",
    "jobs": os.cpu_count() or 1,
    "threshold": 0.5,
    "nb_features": FEATURES_OWN,
}

_SHIPPED_CATALOGS = ("refined", "chatgpt-raw", "chestxray14")


@dataclass
class RunConfig:
    catalog: str
    backend: str
    style: PromptStyle
    mode: AggregationMode
    temperature: float
    no_finding: str
    jobs: int
    threshold: float
    nb_features: str
    synthetic: dict

    def echo(self) -> dict:
        return {
            "catalog": self.catalog,
            "backend": self.backend,
            "style": self.style.value,
            "mode": self.mode.value,
            "temperature": self.temperature,
            "no_finding": self.no_finding,
            "jobs": self.jobs,
        }


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"config file {path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise ParseError(f"config file {path}: top level must be an object")
    return document


def resolve_config(args: argparse.Namespace) -> RunConfig:
    file_config = _load_config_file(getattr(args, "config", None))

    def pick(key: str):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        if key in file_config:
            return file_config[key]
        return _DEFAULTS.get(key)

    backend = pick("backend")
    if not backend:
        raise ValidationError("a backend is required (--backend or config 'backend')")
    temperature = float(pick("temperature"))
    if temperature <= 0.0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    no_finding = pick("no_finding")
    if no_finding not in ("max", "product"):
        raise ValidationError(f"--no-finding must be 'max' or 'product', got {no_finding!r}")
    nb_features = pick("nb_features")
    if nb_features not in (FEATURES_OWN, FEATURES_ALL):
        raise ValidationError(f"--nb-features must be 'own' or 'all', got {nb_features!r}")
    return RunConfig(
        catalog=str(pick("catalog")),
        backend=str(backend),
        style=PromptStyle.from_string(str(pick("style"))),
        mode=AggregationMode.from_string(str(pick("mode"))),
        temperature=temperature,
        no_finding=no_finding,
        jobs=int(pick("jobs")),
        threshold=float(pick("threshold")),
        nb_features=nb_features,
        synthetic=file_config.get("synthetic", {}),
    )


def open_catalog(spec: str) -> Catalog:
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        return load_catalog(path)
    if spec in _SHIPPED_CATALOGS:
        return load_shipped_catalog(spec)
    raise ParseError(
        f"catalog {spec!r} is neither a file nor a shipped catalog "
        f"(shipped: {', '.join(_SHIPPED_CATALOGS)})"
    )


def open_backend(config: RunConfig):
    spec = config.backend
    if spec.startswith("synthetic:"):
        seed_text = spec[len("synthetic:") :]
        try:
            seed = int(seed_text)
        except ValueError:
            raise ValidationError(f"synthetic backend needs an integer seed, got {seed_text!r}")
        options = config.synthetic
        return SyntheticBackend(
            seed=seed,
            dimension=int(options.get("dimension", 512)),
            planted=options.get("planted"),
            alpha=float(options.get("alpha", 0.9)),
        )
    if spec.startswith("file:"):
        paths = [p for p in spec[len("file:") :].split(",") if p]
        if not paths:
            raise ValidationError("file backend needs at least one store path")
        return FileStoreBackend(paths)
    if spec.startswith(("http://", "https://")):
        return HttpBackend(spec)
    raise ValidationError(
        f"backend spec {spec!r} not understood (use file:PATH, http(s)://URL or synthetic:SEED)"
    )


def _write_output(document: dict, out: Optional[str]) -> None:
    text = json.dumps(document, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_view(token: str) -> tuple[str, bool]:
    if ":" in token:
        view_id, _, designation = token.rpartition(":")
        designation = designation.strip().lower()
        if designation not in ("frontal", "lateral"):
            raise ValidationError(f"view designation must be frontal or lateral: {token!r}")
        return view_id, designation == "frontal"
    return token, True


def cmd_diagnose(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    catalog = open_catalog(config.catalog)
    backend = CachingBackend(open_backend(config))
    images = []
    for token in args.views:
        view_id, frontal = _parse_view(token)
        images.append(ImageRef(study_id=args.study_id, view_id=view_id, frontal=frontal))
    prediction = diagnose_study(
        images,
        catalog,
        config.style,
        backend,
        tau=config.temperature,
        mode=config.mode,
        no_finding_variant=config.no_finding,
    )
    document = {"config": config.echo(), **prediction.to_dict()}
    _write_output(document, args.out)

    aggregation = "single view" if len(images) == 1 else config.mode.value
    lines = [f"study {prediction.study_id}", f"style: {config.style.value}  aggregation: {aggregation}"]
    flagged = [p for p in prediction.pathologies if p.probability >= config.threshold]
    flagged.sort(key=lambda p: -p.probability)
    if flagged:
        lines.append(f"pathologies at or above probability {config.threshold:.2f}:")
        for result in flagged:
            lines.append(f"  {result.name:<30} {result.probability:6.3f}")
            for obs in result.observations[:3]:
                lines.append(f"    - {obs.descriptor:<40} {obs.probability:6.3f}")
    else:
        lines.append(f"no pathology at or above probability {config.threshold:.2f}")
    print("\n".join(lines), file=sys.stderr)
    return 0


def _predictions_for_table(config: RunConfig, catalog, backend, table):
    return predict_table(
        table,
        catalog,
        backend,
        config.style,
        config.mode,
        tau=config.temperature,
        no_finding_variant=config.no_finding,
        jobs=config.jobs,
    )


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    catalog = open_catalog(config.catalog)
    backend = CachingBackend(open_backend(config))
    table = load_label_table(Path(args.labels), catalog)
    predictions = _predictions_for_table(config, catalog, backend, table)
    report = evaluate(
        table,
        predictions,
        metadata={
            "style": config.style.value,
            "mode": config.mode.value,
            "tau": config.temperature,
            "catalog": catalog.name,
        },
    )
    _write_output({"config": config.echo(), **report.to_dict()}, args.out)
    print(report.to_text(), file=sys.stderr)
    if report.macro_auroc is None:
        print("no pathology was evaluable (single-class labels everywhere)", file=sys.stderr)
        return 2
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    catalog = open_catalog(config.catalog)
    backend = open_backend(config)
    table = load_label_table(Path(args.labels), catalog)

    styles: list[PromptStyle] = []
    for token in args.styles.split(","):
        token = token.strip()
        if not token:
            continue
        style = PromptStyle.from_string(token)
        if style in styles:
            warnings.warn(f"duplicate style {style.value!r} ignored")
            continue
        styles.append(style)
    modes: list[AggregationMode] = []
    for token in (args.modes or "").split(","):
        token = token.strip()
        if not token:
            continue
        mode = AggregationMode.from_string(token)
        if mode in modes:
            warnings.warn(f"duplicate mode {mode.value!r} ignored")
            continue
        modes.append(mode)
    if not modes:
        modes = [AggregationMode.MEAN]

    reports = run_ablation(
        table,
        catalog,
        backend,
        styles,
        modes,
        tau=config.temperature,
        no_finding_variant=config.no_finding,
        jobs=config.jobs,
    )
    document = {"config": config.echo(), "runs": [r.to_dict() for r in reports]}
    _write_output(document, args.out)
    print(ablation_table_text(reports), file=sys.stderr)
    return 0


def cmd_nb_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    catalog = open_catalog(config.catalog)
    backend = CachingBackend(open_backend(config))
    table = load_label_table(Path(args.labels), catalog)
    predictions = _predictions_for_table(config, catalog, backend, table)
    labels = {row.study_id: row.labels for row in table.studies}
    model = train_nb_model(catalog, predictions, labels, feature_mode=config.nb_features)
    save_model(model, args.model_out)
    print(
        f"trained {len(model.pathologies)} pathology model(s) -> {args.model_out}",
        file=sys.stderr,
    )
    return 0


def cmd_nb_eval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    catalog = open_catalog(config.catalog)
    model = load_model(args.model, catalog=catalog)
    backend = CachingBackend(open_backend(config))
    table = load_label_table(Path(args.labels), catalog)
    predictions = _predictions_for_table(config, catalog, backend, table)
    report = evaluate_nb(
        table,
        catalog,
        predictions,
        model,
        metadata={
            "style": config.style.value,
            "mode": config.mode.value,
            "tau": config.temperature,
            "catalog": catalog.name,
            "model": str(args.model),
        },
    )
    _write_output({"config": config.echo(), **report.to_dict()}, args.out)
    print(report.to_text(), file=sys.stderr)
    return 0


def cmd_cache(args: argparse.Namespace) -> int:
    if not args.out:
        raise ValidationError("cache writes a binary store; --out is required")
    config = resolve_config(args)
    catalog = open_catalog(config.catalog)
    backend = CachingBackend(open_backend(config))
    entries: list[tuple[str, object]] = []

    prompts: list[str] = []
    if args.plan:
        plan = prompt_plan(catalog, config.style)
        for pair in plan:
            prompts.append(pair.positive)
            if pair.negative is not None:
                prompts.append(pair.negative)
    if args.prompts:
        prompts.extend(
            line.strip()
            for line in Path(args.prompts).read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
    seen = set()
    for prompt in prompts:
        if prompt in seen:
            continue
        seen.add(prompt)
        entries.append((prompt, backend.embed_text(prompt)))

    if args.images:
        for line in Path(args.images).read_text(encoding="utf-8").splitlines():
            key = line.strip()
            if not key or key in seen:
                continue
            seen.add(key)
            study_id, _, view_id = key.rpartition("/")
            ref = ImageRef(study_id=study_id or key, view_id=view_id)
            entries.append((key, backend.embed_image(ref)))

    write_store(args.out, entries)
    print(f"wrote {len(entries)} embedding(s) -> {args.out}", file=sys.stderr)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--catalog", help="catalog file or shipped name (default: refined)")
    parser.add_argument(
        "--backend", help="embedding source: file:PATH[,PATH], http(s)://URL, synthetic:SEED"
    )
    parser.add_argument("--style", help="prompt style (default: report-style)")
    parser.add_argument("--mode", help="view aggregation: mean, max, single-frontal")
    parser.add_argument("--temperature", type=float, help="softmax temperature (default: 1.0)")
    parser.add_argument("--no-finding", dest="no_finding", choices=("max", "product"))
    parser.add_argument("--jobs", type=int, help="parallel study workers (default: CPUs)")
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--out", help="write the JSON document here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obsdx",
        description="Zero-shot diagnosis from descriptive observation prompts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagnose", help="score one study and explain the result")
    p.add_argument("study_id")
    p.add_argument("views", nargs="+", help="view ids, optionally VIEW:lateral")
    p.add_argument("--threshold", type=float, help="summary display threshold (default 0.5)")
    _add_common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("evaluate", help="AUROC against a label CSV")
    p.add_argument("--labels", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="compare prompt styles and aggregation modes")
    p.add_argument("--labels", required=True)
    p.add_argument("--styles", required=True, help="comma-separated prompt styles")
    p.add_argument("--modes", help="comma-separated aggregation modes (default: mean)")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("nb-train", help="fit the Naive Bayes descriptor head")
    p.add_argument("--labels", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--nb-features", dest="nb_features", choices=(FEATURES_OWN, FEATURES_ALL))
    _add_common(p)
    p.set_defaults(func=cmd_nb_train)

    p = sub.add_parser("nb-eval", help="AUROC of a trained Naive Bayes head")
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_nb_eval)

    p = sub.add_parser("cache", help="precompute embeddings into a store file")
    p.add_argument("--prompts", help="file with one prompt per line")
    p.add_argument("--images", help="file with one study_id/view_id per line")
    p.add_argument("--plan", action="store_true", help="cache the catalog's full prompt plan")
    _add_common(p)
    p.set_defaults(func=cmd_cache)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ObsdxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputError.exit_code
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
