"""Character and sub-character component vocabularies.

The character vocabulary collects every distinct modern-script text in
first-occurrence order. The component vocabulary starts from a seed list
(classically the 540 dictionary section headers) and grows by closure over
every component string observed in annotations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

from .corpus import Corpus, GlyphLabel
from .errors import DataError


@dataclass(frozen=True)
class Vocabulary:
    """Ordered character and component lists with dense, stable ids."""

    characters: tuple[str, ...] = ()
    components: tuple[str, ...] = ()
    seed_size: int = 0

    def __post_init__(self):
        object.__setattr__(self, "characters", tuple(self.characters))
        object.__setattr__(self, "components", tuple(self.components))
        if len(set(self.characters)) != len(self.characters):
            raise DataError("character vocabulary has duplicates")
        if len(set(self.components)) != len(self.components):
            raise DataError("component vocabulary has duplicates")
        if not 0 <= self.seed_size <= len(self.components):
            raise DataError(f"seed_size {self.seed_size} out of range")

    @cached_property
    def _char_ids(self) -> dict[str, int]:
        return {text: i for i, text in enumerate(self.characters)}

    @cached_property
    def _component_ids(self) -> dict[str, int]:
        return {comp: i for i, comp in enumerate(self.components)}

    def char_id(self, text: str) -> int:
        try:
            return self._char_ids[text]
        except KeyError:
            raise DataError(f"unknown character {text}") from None

    def component_id(self, comp: str) -> int:
        try:
            return self._component_ids[comp]
        except KeyError:
            raise DataError(f"unknown component {comp}") from None

    def has_char(self, text: str) -> bool:
        return text in self._char_ids

    def has_component(self, comp: str) -> bool:
        return comp in self._component_ids

    def to_json(self) -> dict:
        return {"seed_size": self.seed_size,
                "characters": list(self.characters),
                "components": list(self.components)}


def build_vocabulary(corpus: Corpus, seed_components: Sequence[str] = ()) -> Vocabulary:
    """Characters in first-occurrence order; components = seed then growth.

    Every component string observed in an annotation that is not already in
    the vocabulary is appended, so the result is closed over the corpus.
    """
    seed = tuple(seed_components)
    if len(set(seed)) != len(seed):
        dupes = sorted({c for c in seed if seed.count(c) > 1})
        raise DataError(f"duplicate seed components: {', '.join(dupes)}")
    characters: list[str] = []
    seen_chars: set[str] = set()
    components: list[str] = list(seed)
    seen_comps: set[str] = set(seed)
    for inst in corpus:
        label = inst.label
        if label.kind == "modern":
            if label.text not in seen_chars:
                seen_chars.add(label.text)
                characters.append(label.text)
        elif label.kind == "components":
            for comp in label.items:
                if comp not in seen_comps:
                    seen_comps.add(comp)
                    components.append(comp)
    return Vocabulary(tuple(characters), tuple(components), seed_size=len(seed))


def decompose(label: GlyphLabel, vocab: Vocabulary) -> int | tuple[int, ...] | None:
    """Map a label to vocabulary ids.

    Modern labels yield their character id, components labels a tuple of
    component ids in annotation order, unknown labels ``None``.
    """
    if label.kind == "modern":
        return vocab.char_id(label.text)
    if label.kind == "components":
        return tuple(vocab.component_id(c) for c in label.items)
    return None


@dataclass(frozen=True)
class SourceCoverage:
    instances: int
    oov: int
    oov_rate: float


@dataclass(frozen=True)
class CoverageReport:
    n_instances: int
    n_oov: int
    oov_rate: float
    per_source: tuple[tuple[str, SourceCoverage], ...]
    component_usage: tuple[tuple[str, int], ...]

    def to_json(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "n_oov": self.n_oov,
            "oov_rate": self.oov_rate,
            "per_source": {s: vars(c).copy() for s, c in self.per_source},
            "component_usage": [[c, n] for c, n in self.component_usage],
        }


def coverage_report(corpus: Corpus, vocab: Vocabulary) -> CoverageReport:
    """OOV rate (components-kind plus unknown-kind over all instances)."""
    total = len(corpus)
    oov = 0
    per_source: dict[str, list[int]] = {}
    usage: dict[str, int] = {}
    for inst in corpus:
        counts = per_source.setdefault(inst.source, [0, 0])
        counts[0] += 1
        if inst.label.kind != "modern":
            oov += 1
            counts[1] += 1
        if inst.label.kind == "components":
            for comp in inst.label.items:
                usage[comp] = usage.get(comp, 0) + 1

    def comp_order(item):
        comp, count = item
        known = vocab.has_component(comp)
        return (-count, vocab.component_id(comp) if known else len(vocab.components), comp)

    return CoverageReport(
        n_instances=total,
        n_oov=oov,
        oov_rate=oov / total if total else 0.0,
        per_source=tuple(
            (s, SourceCoverage(n, o, o / n if n else 0.0))
            for s, (n, o) in sorted(per_source.items())),
        component_usage=tuple(sorted(usage.items(), key=comp_order)))


def dumps_vocabulary(vocab: Vocabulary) -> str:
    return json.dumps(vocab.to_json(), ensure_ascii=False, indent=2) + "\n"


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    Path(path).write_text(dumps_vocabulary(vocab), encoding="utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid vocabulary file: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise DataError("vocabulary file must hold a JSON object")
    for field in ("seed_size", "characters", "components"):
        if field not in obj:
            raise DataError(f"vocabulary file missing field {field}")
    return Vocabulary(tuple(obj["characters"]), tuple(obj["components"]),
                      seed_size=obj["seed_size"])
