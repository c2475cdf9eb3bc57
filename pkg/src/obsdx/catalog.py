"""Descriptor catalogs and prompt rendering.

A catalog lists diagnosis labels ("pathologies"), each with an ordered set
of observation descriptors a reader would look for on the scan. Prompt
rendering turns a descriptor into positive/negated sentence pairs in one
of five styles; the style determines how much report-like context the
sentence carries (disease indication, "There is/are" framing).

Catalog files are JSON: a top-level list of records
``{name, rule_based (default false), descriptors: [{text, plural (default
false)}]}``, UTF-8. Two catalogs ship with the package under
``obsdx/data/``; ``load_shipped_catalog`` opens them by name.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .errors import ParseError, ValidationError

POSITIVE = "positive"
NEGATIVE = "negative"


class PromptStyle(enum.Enum):
    """The five prompting styles, from bare label to full report sentence."""

    PATHOLOGY_BASED = "pathology-based"
    BASIC = "basic"
    CONTRASTIVE = "contrastive"
    PATHOLOGY_INDICATION = "pathology-indication"
    REPORT_STYLE = "report-style"

    @classmethod
    def from_string(cls, value: str) -> "PromptStyle":
        normalized = value.strip().lower().replace("_", "-").replace(" ", "-")
        for style in cls:
            if style.value == normalized:
                return style
        valid = ", ".join(s.value for s in cls)
        raise ValidationError(f"unknown prompt style {value!r} (valid: {valid})")

    @property
    def uses_descriptors(self) -> bool:
        return self is not PromptStyle.PATHOLOGY_BASED

    @property
    def has_negative(self) -> bool:
        return self is not PromptStyle.BASIC


@dataclass(frozen=True)
class Descriptor:
    """One observation phrase; `plural` picks "There are" over "There is"."""

    text: str
    plural: bool = False


@dataclass(frozen=True)
class Pathology:
    name: str
    descriptors: tuple[Descriptor, ...]
    rule_based: bool = False


@dataclass(frozen=True)
class Catalog:
    name: str
    pathologies: tuple[Pathology, ...]
    _by_name: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {p.name: p for p in self.pathologies})

    def __iter__(self):
        return iter(self.pathologies)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def get(self, name: str) -> Pathology:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"pathology {name!r} not in catalog {self.name!r}") from None

    def scored(self) -> tuple[Pathology, ...]:
        """Pathologies scored from descriptors (everything not rule-based)."""
        return tuple(p for p in self.pathologies if not p.rule_based)

    @property
    def rule_based_pathology(self) -> Optional[Pathology]:
        for p in self.pathologies:
            if p.rule_based:
                return p
        return None

    def fingerprint(self) -> str:
        """Content hash tying trained models to the exact descriptor layout."""
        payload = [
            [p.name, p.rule_based, [[d.text, d.plural] for d in p.descriptors]]
            for p in self.pathologies
        ]
        blob = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PromptPair:
    """One scoring unit of a prompt plan.

    `descriptor` is None for the pathology-based style; `negative` is None
    for the basic style.
    """

    pathology: str
    descriptor: Optional[str]
    positive: str
    negative: Optional[str]


def _validate_descriptor(text, plural, where: str) -> Descriptor:
    if not isinstance(text, str):
        raise ValidationError(f"{where}: descriptor text must be a string")
    if text != text.strip():
        raise ValidationError(f"{where}: descriptor text {text!r} has surrounding whitespace")
    if not text:
        raise ValidationError(f"{where}: descriptor text is empty")
    if "\n" in text or "\r" in text:
        raise ValidationError(f"{where}: descriptor text {text!r} contains a newline")
    if not isinstance(plural, bool):
        raise ValidationError(f"{where}: plural flag must be a boolean")
    return Descriptor(text=text, plural=plural)


def parse_catalog(text: str, name: str = "catalog") -> Catalog:
    """Parse a catalog document. Raises ParseError/ValidationError."""
    if not text.strip():
        raise ParseError(f"catalog {name!r}: document is empty")
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"catalog {name!r}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(records, list):
        raise ParseError(f"catalog {name!r}: top level must be a list of pathology records")
    if not records:
        raise ValidationError(f"catalog {name!r}: no pathologies defined")

    pathologies: list[Pathology] = []
    seen_names: set[str] = set()
    rule_based_count = 0
    for idx, record in enumerate(records):
        where = f"catalog {name!r}, record {idx}"
        if not isinstance(record, dict):
            raise ParseError(f"{where}: expected an object")
        unknown = set(record) - {"name", "rule_based", "descriptors"}
        if unknown:
            raise ParseError(f"{where}: unknown field(s) {sorted(unknown)}")
        pname = record.get("name")
        if not isinstance(pname, str) or not pname.strip():
            raise ParseError(f"{where}: field 'name' must be a non-empty string")
        if pname in seen_names:
            raise ValidationError(f"{where}: duplicate pathology {pname!r}")
        seen_names.add(pname)
        rule_based = record.get("rule_based", False)
        if not isinstance(rule_based, bool):
            raise ParseError(f"{where}: field 'rule_based' must be a boolean")
        rule_based_count += rule_based
        raw_descriptors = record.get("descriptors", [])
        if not isinstance(raw_descriptors, list):
            raise ParseError(f"{where}: field 'descriptors' must be a list")
        descriptors = []
        seen_texts: set[str] = set()
        for d_idx, d in enumerate(raw_descriptors):
            d_where = f"{where} ({pname!r}), descriptor {d_idx}"
            if not isinstance(d, dict) or "text" not in d:
                raise ParseError(f"{d_where}: expected an object with a 'text' field")
            descriptor = _validate_descriptor(d["text"], d.get("plural", False), d_where)
            if descriptor.text in seen_texts:
                raise ValidationError(f"{d_where}: duplicate descriptor {descriptor.text!r}")
            seen_texts.add(descriptor.text)
            descriptors.append(descriptor)
        if not rule_based and not descriptors:
            raise ValidationError(f"{where}: pathology {pname!r} has no descriptors")
        pathologies.append(Pathology(pname, tuple(descriptors), rule_based))

    if rule_based_count > 1:
        raise ValidationError(f"catalog {name!r}: more than one rule-based pathology")
    return Catalog(name=name, pathologies=tuple(pathologies))


def serialize_catalog(catalog: Catalog) -> str:
    """Inverse of parse_catalog (catalog name travels outside the document)."""
    records = []
    for p in catalog.pathologies:
        record: dict = {"name": p.name}
        if p.rule_based:
            record["rule_based"] = True
        record["descriptors"] = [
            {"text": d.text, "plural": True} if d.plural else {"text": d.text}
            for d in p.descriptors
        ]
        records.append(record)
    return json.dumps(records, ensure_ascii=False, indent=2) + "\n"


def load_catalog(path: str | Path, name: Optional[str] = None) -> Catalog:
    """Load a catalog file; the catalog name defaults to the file stem."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"catalog file not found: {path}") from None
    return parse_catalog(text, name=name or path.stem)


def load_shipped_catalog(name: str) -> Catalog:
    """Open one of the packaged catalogs: 'refined', 'chatgpt-raw', 'chestxray14'."""
    try:
        text = resources.files("obsdx.data").joinpath(f"{name}.json").read_text("utf-8")
    except FileNotFoundError:
        raise ParseError(f"no shipped catalog named {name!r}") from None
    return parse_catalog(text, name=name)


def render_pathology_prompt(pathology: Pathology, polarity: str) -> str:
    """Pathology-based prompts: bare label, or the label behind "No "."""
    if pathology.rule_based:
        raise ValidationError(
            f"pathology {pathology.name!r} is rule-based and has no prompt form"
        )
    _check_polarity(polarity)
    if polarity == POSITIVE:
        return pathology.name
    return f"No {pathology.name}"


def render_prompt(
    style: PromptStyle, descriptor: Descriptor, pathology: Pathology, polarity: str
) -> str:
    """Render one descriptor prompt. Pure: same inputs, same string.

    Positive and negative renderings differ only by the "No "/"no "
    insertion; descriptor text is inserted verbatim and the pathology name
    is lowercased when it sits mid-sentence.
    """
    _check_polarity(polarity)
    if style is PromptStyle.PATHOLOGY_BASED:
        raise ValidationError("pathology-based style renders via render_pathology_prompt")
    if style is PromptStyle.BASIC:
        if polarity != POSITIVE:
            raise ValidationError("basic style defines positive prompts only")
        return descriptor.text

    label = pathology.name.lower()
    if style is PromptStyle.CONTRASTIVE:
        return descriptor.text if polarity == POSITIVE else f"No {descriptor.text}"
    if style is PromptStyle.PATHOLOGY_INDICATION:
        if polarity == POSITIVE:
            return f"{descriptor.text} indicating {label}"
        return f"No {descriptor.text} indicating {label}"
    verb = "are" if descriptor.plural else "is"
    if polarity == POSITIVE:
        return f"There {verb} {descriptor.text} indicating {label}."
    return f"There {verb} no {descriptor.text} indicating {label}."


def prompt_plan(catalog: Catalog, style: PromptStyle) -> list[PromptPair]:
    """Every prompt pair the style needs for the catalog, in catalog order."""
    plan: list[PromptPair] = []
    for pathology in catalog.scored():
        if style is PromptStyle.PATHOLOGY_BASED:
            plan.append(
                PromptPair(
                    pathology=pathology.name,
                    descriptor=None,
                    positive=render_pathology_prompt(pathology, POSITIVE),
                    negative=render_pathology_prompt(pathology, NEGATIVE),
                )
            )
            continue
        for descriptor in pathology.descriptors:
            negative = None
            if style.has_negative:
                negative = render_prompt(style, descriptor, pathology, NEGATIVE)
            plan.append(
                PromptPair(
                    pathology=pathology.name,
                    descriptor=descriptor.text,
                    positive=render_prompt(style, descriptor, pathology, POSITIVE),
                    negative=negative,
                )
            )
    return plan


def plan_prompts(plan: Iterable[PromptPair]) -> list[str]:
    """Unique prompt strings of a plan, preserving first-seen order."""
    seen: dict[str, None] = {}
    for pair in plan:
        seen.setdefault(pair.positive)
        if pair.negative is not None:
            seen.setdefault(pair.negative)
    return list(seen)


def _check_polarity(polarity: str) -> None:
    if polarity not in (POSITIVE, NEGATIVE):
        raise ValidationError(f"polarity must be 'positive' or 'negative', got {polarity!r}")
