"""Slip-corpus manifests: loading, validation, filtering, splitting, and stats.

A corpus is an immutable sequence of character instances, one per scanned
glyph occurrence. On disk a corpus is a UTF-8 JSON Lines manifest, one
instance per line; see ``load_manifest`` / ``write_manifest``.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .errors import DataError

LABEL_KINDS = ("modern", "components", "unknown")
CHARACTER_TYPE_TAGS = ("logogram", "semantic_phonetic_compound", "phonogram")

#: Class key shared by every unknown-labeled instance.
UNKNOWN_CLASS = "{?}"

_INSTANCE_FIELDS = ("id", "image_path", "source", "document", "slip",
                    "reading_index", "bbox", "label")
_REQUIRED_FIELDS = tuple(f for f in _INSTANCE_FIELDS if f != "bbox")


@dataclass(frozen=True)
class GlyphLabel:
    """Annotation for one character occurrence.

    Exactly one of three kinds: ``modern`` carries the modern-script text,
    ``components`` carries the expert's sub-character decomposition, and
    ``unknown`` marks an unreadable glyph. Components-kind labels may carry
    an optional character-type tag (one of ``CHARACTER_TYPE_TAGS``).
    """

    kind: str
    text: str = ""
    items: tuple[str, ...] = ()
    type_tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.kind not in LABEL_KINDS:
            raise DataError(f"label kind must be one of {LABEL_KINDS}, got {self.kind!r}")
        if self.kind == "modern":
            if not self.text:
                raise DataError("modern label requires non-empty text")
            if self.items:
                raise DataError("modern label must not carry items")
        elif self.kind == "components":
            if not self.items:
                raise DataError("components label requires a non-empty items list")
            if len(set(self.items)) != len(self.items):
                raise DataError(f"components label has duplicate items: {list(self.items)}")
            if self.text:
                raise DataError("components label must not carry text")
        else:
            if self.text or self.items:
                raise DataError("unknown label must not carry text or items")
        if self.type_tag is not None:
            if self.kind != "components":
                raise DataError("type tag is only valid on components labels")
            if self.type_tag not in CHARACTER_TYPE_TAGS:
                raise DataError(f"type tag must be one of {CHARACTER_TYPE_TAGS}, got {self.type_tag!r}")

    @classmethod
    def modern(cls, text: str) -> "GlyphLabel":
        return cls(kind="modern", text=text)

    @classmethod
    def components(cls, items: Iterable[str], type_tag: str | None = None) -> "GlyphLabel":
        return cls(kind="components", items=tuple(items), type_tag=type_tag)

    @classmethod
    def unknown(cls) -> "GlyphLabel":
        return cls(kind="unknown")

    def class_key(self) -> str:
        """Stable class identity used by filtering, splitting, and recognizers.

        Modern labels key on their text, components labels on the
        '+'-joined item string in annotation order, and all unknown labels
        share the ``UNKNOWN_CLASS`` key.
        """
        if self.kind == "modern":
            return self.text
        if self.kind == "components":
            return "+".join(self.items)
        return UNKNOWN_CLASS

    def to_json(self) -> dict:
        if self.kind == "modern":
            return {"kind": "modern", "text": self.text}
        if self.kind == "components":
            obj = {"kind": "components", "items": list(self.items)}
            if self.type_tag is not None:
                obj["type"] = self.type_tag
            return obj
        return {"kind": "unknown"}

    @classmethod
    def from_json(cls, obj) -> "GlyphLabel":
        if not isinstance(obj, dict):
            raise DataError("label must be a JSON object")
        kind = obj.get("kind")
        if kind not in LABEL_KINDS:
            raise DataError(f"label kind must be one of {LABEL_KINDS}, got {kind!r}")
        allowed = {"modern": {"kind", "text"},
                   "components": {"kind", "items", "type"},
                   "unknown": {"kind"}}[kind]
        for key in obj:
            if key not in allowed:
                raise DataError(f"unknown field {key} in {kind} label")
        if kind == "modern":
            text = obj.get("text")
            if not isinstance(text, str):
                raise DataError("modern label requires a string text field")
            return cls.modern(text)
        if kind == "components":
            items = obj.get("items")
            if not isinstance(items, list) or not all(isinstance(i, str) for i in items):
                raise DataError("components label requires a list of strings in items")
            return cls.components(items, type_tag=obj.get("type"))
        return cls.unknown()


@dataclass(frozen=True)
class CharacterInstance:
    """One character occurrence: provenance, optional pixel box, and label."""

    id: str
    image_path: str
    source: str
    document: str
    slip: str
    reading_index: int
    label: GlyphLabel
    bbox: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        if self.bbox is not None:
            object.__setattr__(self, "bbox", tuple(self.bbox))

    def slip_key(self) -> tuple[str, str, str]:
        return (self.source, self.document, self.slip)

    def class_key(self) -> str:
        return self.label.class_key()

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "image_path": self.image_path,
            "source": self.source,
            "document": self.document,
            "slip": self.slip,
            "reading_index": self.reading_index,
        }
        if self.bbox is not None:
            obj["bbox"] = list(self.bbox)
        obj["label"] = self.label.to_json()
        return obj


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered collection of character instances."""

    instances: tuple[CharacterInstance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[CharacterInstance]:
        return iter(self.instances)

    def __getitem__(self, idx: int) -> CharacterInstance:
        return self.instances[idx]

    def class_counts(self) -> Counter:
        return Counter(inst.class_key() for inst in self.instances)

    def group_by_class(self) -> dict[str, list[CharacterInstance]]:
        groups: dict[str, list[CharacterInstance]] = {}
        for inst in self.instances:
            groups.setdefault(inst.class_key(), []).append(inst)
        return groups

    def group_by_slip(self) -> dict[tuple[str, str, str], list[CharacterInstance]]:
        """Instances per (source, document, slip), each list in reading order."""
        groups: dict[tuple[str, str, str], list[CharacterInstance]] = {}
        for inst in self.instances:
            groups.setdefault(inst.slip_key(), []).append(inst)
        for members in groups.values():
            members.sort(key=lambda i: i.reading_index)
        return groups


@dataclass(frozen=True)
class FilterConfig:
    """Minimum per-class occurrence count; classes below it are dropped."""

    min_count: int = 1

    def __post_init__(self):
        if not isinstance(self.min_count, int) or self.min_count < 1:
            raise DataError(f"min_count must be an integer >= 1, got {self.min_count!r}")


@dataclass(frozen=True)
class SplitConfig:
    """Per-class stratified split ratios (train, val, test) and shuffle seed."""

    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(self.ratios))
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise DataError(f"ratios must be three positive numbers, got {self.ratios!r}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise DataError(f"ratios must sum to 1, got {self.ratios!r}")


class CorpusSplit(NamedTuple):
    train: Corpus
    val: Corpus
    test: Corpus


@dataclass(frozen=True)
class Violation:
    """One invariant breach found by ``validate``; data, not an exception."""

    rule: str
    ids: tuple[str, ...]
    message: str


@dataclass(frozen=True)
class SourceCount:
    documents: int
    slips: int
    characters: int


@dataclass(frozen=True)
class CorpusStats:
    total: SourceCount
    per_source: tuple[tuple[str, SourceCount], ...]
    label_kinds: tuple[tuple[str, int], ...]
    class_frequencies: tuple[tuple[str, int], ...]
    singleton_class_fraction: float

    def to_json(self) -> dict:
        return {
            "total": vars(self.total).copy(),
            "per_source": {s: vars(c).copy() for s, c in self.per_source},
            "label_kinds": dict(self.label_kinds),
            "class_frequencies": [[k, n] for k, n in self.class_frequencies],
            "singleton_class_fraction": self.singleton_class_fraction,
        }


def _parse_bbox(value, line_no: int):
    if value is None:
        return None
    if (not isinstance(value, (list, tuple)) or len(value) != 4
            or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
        raise DataError(f"line {line_no}: field bbox must be [x, y, w, h] integers")
    return tuple(value)


def _parse_instance(obj, line_no: int) -> CharacterInstance:
    if not isinstance(obj, dict):
        raise DataError(f"line {line_no}: record must be a JSON object")
    for field in _REQUIRED_FIELDS:
        if field not in obj:
            raise DataError(f"line {line_no}: missing field {field}")
    for field in obj:
        if field not in _INSTANCE_FIELDS:
            raise DataError(f"line {line_no}: unknown field {field}")
    for field in ("id", "image_path", "source", "document", "slip"):
        if not isinstance(obj[field], str):
            raise DataError(f"line {line_no}: field {field} must be a string")
    if not obj["id"]:
        raise DataError(f"line {line_no}: field id must be non-empty")
    idx = obj["reading_index"]
    if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
        raise DataError(f"line {line_no}: field reading_index must be a non-negative integer")
    try:
        label = GlyphLabel.from_json(obj["label"])
    except DataError as exc:
        raise DataError(f"line {line_no}: {exc}") from None
    return CharacterInstance(
        id=obj["id"],
        image_path=obj["image_path"],
        source=obj["source"],
        document=obj["document"],
        slip=obj["slip"],
        reading_index=idx,
        label=label,
        bbox=_parse_bbox(obj.get("bbox"), line_no),
    )


def loads_manifest(text: str) -> Corpus:
    """Parse manifest text (JSON Lines); errors carry 1-based line numbers."""
    instances: list[CharacterInstance] = []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: invalid JSON: {exc.msg}") from None
        inst = _parse_instance(obj, line_no)
        if inst.id in seen:
            raise DataError(f"duplicate id '{inst.id}' on lines {seen[inst.id]} and {line_no}")
        seen[inst.id] = line_no
        instances.append(inst)
    return Corpus(tuple(instances))


def load_manifest(path: str | Path) -> Corpus:
    """Load a JSON Lines manifest, preserving file order. No deduplication."""
    return loads_manifest(Path(path).read_text(encoding="utf-8"))


def dumps_manifest(corpus: Corpus) -> str:
    """Canonical manifest text: fixed key order, compact separators."""
    lines = [json.dumps(inst.to_json(), ensure_ascii=False, separators=(",", ":"))
             for inst in corpus]
    return "".join(line + "\n" for line in lines)


def write_manifest(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(dumps_manifest(corpus), encoding="utf-8")


def validate(corpus: Corpus) -> list[Violation]:
    """Check corpus invariants; returns violations instead of raising."""
    violations: list[Violation] = []
    by_id: dict[str, list[str]] = {}
    for inst in corpus:
        by_id.setdefault(inst.id, []).append(inst.id)
    for inst_id, hits in by_id.items():
        if len(hits) > 1:
            violations.append(Violation(
                rule="duplicate-id", ids=(inst_id,),
                message=f"id '{inst_id}' appears {len(hits)} times"))
    per_slip: dict[tuple, dict[int, list[str]]] = {}
    for inst in corpus:
        per_slip.setdefault(inst.slip_key(), {}).setdefault(inst.reading_index, []).append(inst.id)
    for slip_key in sorted(per_slip):
        for idx, ids in sorted(per_slip[slip_key].items()):
            if len(ids) > 1:
                violations.append(Violation(
                    rule="duplicate-reading-index", ids=tuple(ids),
                    message=(f"reading_index {idx} on slip {'/'.join(slip_key)} "
                             f"shared by {', '.join(ids)}")))
    for inst in corpus:
        if inst.reading_index < 0:
            violations.append(Violation(
                rule="negative-reading-index", ids=(inst.id,),
                message=f"instance '{inst.id}' has negative reading_index {inst.reading_index}"))
        if inst.bbox is not None:
            x, y, w, h = inst.bbox
            if w <= 0 or h <= 0:
                violations.append(Violation(
                    rule="bbox-degenerate", ids=(inst.id,),
                    message=f"instance '{inst.id}' bbox degenerate (w={w}, h={h})"))
    return violations


def filter_by_min_count(corpus: Corpus, cfg: FilterConfig,
                        granularity: str = "character") -> Corpus:
    """Drop rare classes (character granularity) or rare components.

    Character granularity drops every instance whose class key occurs fewer
    than ``min_count`` times. Component granularity prunes components seen
    fewer than ``min_count`` times from items lists and drops components-kind
    instances left with nothing; other kinds pass through untouched.
    """
    k = cfg.min_count
    if granularity == "character":
        counts = corpus.class_counts()
        kept = [inst for inst in corpus if counts[inst.class_key()] >= k]
        return Corpus(tuple(kept))
    if granularity != "component":
        raise DataError(f"granularity must be 'character' or 'component', got {granularity!r}")
    comp_counts: Counter = Counter()
    for inst in corpus:
        if inst.label.kind == "components":
            comp_counts.update(inst.label.items)
    kept = []
    for inst in corpus:
        if inst.label.kind != "components":
            kept.append(inst)
            continue
        items = tuple(c for c in inst.label.items if comp_counts[c] >= k)
        if not items:
            continue
        if items == inst.label.items:
            kept.append(inst)
        else:
            kept.append(replace(inst, label=replace(inst.label, items=items)))
    return Corpus(tuple(kept))


def split(corpus: Corpus, cfg: SplitConfig = SplitConfig()) -> CorpusSplit:
    """Per-class stratified split.

    Each class is shuffled by a seeded Fisher-Yates over its instances
    sorted by id; the test part takes ``max(1, round(r_test * n))``
    instances, val takes ``round(r_val * n)`` (clamped so train keeps at
    least one), and train the remainder. Every class therefore lands in
    test at least once. Classes with a single instance are an error.
    """
    groups = corpus.group_by_class()
    singles = sorted(key for key, members in groups.items() if len(members) < 2)
    if singles:
        raise DataError("cannot split: classes with a single instance: "
                        + ", ".join(repr(s) for s in singles))
    _, r_val, r_test = cfg.ratios
    train: list[CharacterInstance] = []
    val: list[CharacterInstance] = []
    test: list[CharacterInstance] = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda inst: inst.id)
        rng = random.Random(f"{cfg.seed}:{key}")
        rng.shuffle(members)
        n = len(members)
        n_test = max(1, round(r_test * n))
        n_val = max(0, min(round(r_val * n), n - n_test - 1))
        test.extend(members[:n_test])
        val.extend(members[n_test:n_test + n_val])
        train.extend(members[n_test + n_val:])
    order = lambda insts: Corpus(tuple(sorted(insts, key=lambda i: i.id)))
    return CorpusSplit(order(train), order(val), order(test))


def split_report(parts: CorpusSplit) -> tuple[tuple[str, int, int, int], ...]:
    """(class key, train, val, test) counts, sorted by class key."""
    keys = sorted(set(Counter(i.class_key() for part in parts for i in part)))
    counts = [part.class_counts() for part in parts]
    return tuple((key, counts[0][key], counts[1][key], counts[2][key]) for key in keys)


def stats(corpus: Corpus) -> CorpusStats:
    """Per-source document/slip/character counts plus class histograms."""
    docs: dict[str, set] = {}
    slips: dict[str, set] = {}
    chars: Counter = Counter()
    kind_counts = Counter(inst.label.kind for inst in corpus)
    for inst in corpus:
        docs.setdefault(inst.source, set()).add((inst.source, inst.document))
        slips.setdefault(inst.source, set()).add(inst.slip_key())
        chars[inst.source] += 1
    per_source = tuple(
        (source, SourceCount(len(docs[source]), len(slips[source]), chars[source]))
        for source in sorted(chars))
    total = SourceCount(
        documents=sum(c.documents for _, c in per_source),
        slips=sum(c.slips for _, c in per_source),
        characters=sum(c.characters for _, c in per_source))
    class_counts = corpus.class_counts()
    class_frequencies = tuple(sorted(class_counts.items(), key=lambda kv: (-kv[1], kv[0])))
    singletons = sum(1 for _, n in class_frequencies if n == 1)
    fraction = singletons / len(class_frequencies) if class_frequencies else 0.0
    return CorpusStats(
        total=total,
        per_source=per_source,
        label_kinds=tuple((kind, kind_counts.get(kind, 0)) for kind in LABEL_KINDS),
        class_frequencies=class_frequencies,
        singleton_class_fraction=fraction)
