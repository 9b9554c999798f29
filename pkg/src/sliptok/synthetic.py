"""Procedural glyphs and slips with exact ground truth.

Each synthetic glyph is composed of one to three component bitmaps, so the
generator knows the true bounding boxes, character classes, and component
sets. That gives segmentation, recognition, and tokenization something
honest to be measured against without any real scan data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .detection import BoundingBox
from .errors import DataError

# Slot boxes are fractions of the glyph cell: (top, bottom, left, right).
_SLOT_EXTENTS = {
    "full": (0.08, 0.92, 0.08, 0.92),
    "left": (0.08, 0.92, 0.08, 0.46),
    "right": (0.08, 0.92, 0.54, 0.92),
    "top": (0.08, 0.46, 0.08, 0.92),
    "bottom": (0.54, 0.92, 0.08, 0.92),
    "right_top": (0.08, 0.46, 0.54, 0.92),
    "right_bottom": (0.54, 0.92, 0.54, 0.92),
}

_PATTERNS = (
    ("full",),
    ("left", "right"),
    ("top", "bottom"),
    ("left", "right_top", "right_bottom"),
)

_SLOT_SHARE = {
    "left": 0.24, "right": 0.24, "top": 0.12, "bottom": 0.12,
    "right_top": 0.10, "right_bottom": 0.10, "full": 0.08,
}


def _slot_box(slot: str, size: int) -> tuple[int, int, int, int]:
    t, b, l, r = _SLOT_EXTENTS[slot]
    return (round(t * size), round(b * size), round(l * size), round(r * size))


def _draw_segment(mask: np.ndarray, p0, p1, thickness: int) -> None:
    h, w = mask.shape
    steps = int(2 * max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1]))) + 2
    rows = np.linspace(p0[0], p1[0], steps)
    cols = np.linspace(p0[1], p1[1], steps)
    half = thickness // 2
    for r, c in zip(rows, cols):
        r0 = max(0, int(round(r)) - half)
        c0 = max(0, int(round(c)) - half)
        mask[r0:min(h, int(round(r)) + half + 1), c0:min(w, int(round(c)) + half + 1)] = True


def _make_component_bitmap(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    n_strokes = int(rng.integers(2, 5))
    for _ in range(n_strokes):
        p0 = (rng.uniform(1, h - 2), rng.uniform(1, w - 2))
        p1 = (rng.uniform(1, h - 2), rng.uniform(1, w - 2))
        # Reject tiny strokes so components stay visually distinct.
        while abs(p1[0] - p0[0]) + abs(p1[1] - p0[1]) < 0.6 * min(h, w):
            p1 = (rng.uniform(1, h - 2), rng.uniform(1, w - 2))
        _draw_segment(mask, p0, p1, thickness=3)
    return mask


def _overlap(a: np.ndarray, b: np.ndarray) -> float:
    denom = min(a.sum(), b.sum())
    return float((a & b).sum()) / denom if denom else 1.0


@dataclass(eq=False)
class GlyphSet:
    """Component bitmaps with fixed home slots, plus glyph compositions."""

    glyph_size: int
    component_slots: dict[str, str]
    component_bitmaps: dict[str, np.ndarray]
    glyphs: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def component_names(self) -> tuple[str, ...]:
        return tuple(self.component_bitmaps)

    @property
    def glyph_names(self) -> tuple[str, ...]:
        return tuple(self.glyphs)

    def components_of(self, glyph_name: str) -> tuple[str, ...]:
        return self.glyphs[glyph_name]


def _allocate_slots(n_components: int) -> list[str]:
    slots = list(_SLOT_SHARE)
    if n_components < len(slots):
        raise DataError(f"need at least {len(slots)} components, got {n_components}")
    counts = {s: max(1, round(_SLOT_SHARE[s] * n_components)) for s in slots}
    order = sorted(slots, key=lambda s: -_SLOT_SHARE[s])
    i = 0
    while sum(counts.values()) < n_components:
        counts[order[i % len(order)]] += 1
        i += 1
    while sum(counts.values()) > n_components:
        s = order[i % len(order)]
        if counts[s] > 1:
            counts[s] -= 1
        i += 1
    out: list[str] = []
    for slot in slots:
        out.extend([slot] * counts[slot])
    return out


def make_glyph_set(n_glyphs: int = 40, n_components: int = 20, seed: int = 0,
                   glyph_size: int = 32) -> GlyphSet:
    """Build a deterministic glyph library.

    Components are dealt across layout slots and drawn as random stroke
    bundles (re-drawn when too similar to a sibling in the same slot).
    Glyph compositions are sampled so every component is used by at least
    one glyph.
    """
    rng = np.random.default_rng(seed)
    slot_list = _allocate_slots(n_components)
    component_slots: dict[str, str] = {}
    component_bitmaps: dict[str, np.ndarray] = {}
    by_slot: dict[str, list[str]] = {s: [] for s in _SLOT_SHARE}
    for i, slot in enumerate(slot_list):
        name = f"c{i:02d}"
        t, b, l, r = _slot_box(slot, glyph_size)
        h, w = b - t, r - l
        for _ in range(50):
            bitmap = _make_component_bitmap(rng, h, w)
            ink = bitmap.mean()
            if not 0.12 <= ink <= 0.55:
                continue
            if all(_overlap(bitmap, component_bitmaps[o]) < 0.62 for o in by_slot[slot]):
                break
        component_slots[name] = slot
        component_bitmaps[name] = bitmap
        by_slot[slot].append(name)

    compositions: list[tuple[str, ...]] = []
    for pattern in _PATTERNS:
        pools = [by_slot[s] for s in pattern]
        if any(not p for p in pools):
            continue
        combos = [()]
        for pool in pools:
            combos = [c + (name,) for c in combos for name in pool]
        compositions.extend(combos)
    if len(compositions) < n_glyphs:
        raise DataError(f"only {len(compositions)} distinct compositions possible; "
                        f"raise n_components or lower n_glyphs")
    order = rng.permutation(len(compositions))
    unused = set(component_bitmaps)
    chosen: list[tuple[str, ...]] = []
    deferred: list[tuple[str, ...]] = []
    for idx in order:
        combo = compositions[idx]
        if unused & set(combo):
            chosen.append(combo)
            unused -= set(combo)
        else:
            deferred.append(combo)
    for combo in deferred:
        if len(chosen) >= n_glyphs:
            break
        chosen.append(combo)
    chosen = chosen[:n_glyphs]
    glyphs = {f"G{i:02d}": combo for i, combo in enumerate(chosen)}
    return GlyphSet(glyph_size=glyph_size, component_slots=component_slots,
                    component_bitmaps=component_bitmaps, glyphs=glyphs)


def render_glyph_mask(glyph_set: GlyphSet, name: str,
                      rng: np.random.Generator | None = None,
                      jitter: float = 0.0) -> np.ndarray:
    """Boolean ink mask of one glyph; jitter in [0, 1] shifts and erodes."""
    size = glyph_set.glyph_size
    mask = np.zeros((size, size), dtype=bool)
    if rng is None:
        rng = np.random.default_rng(0)
    max_shift = int(round(2 * jitter))
    for comp in glyph_set.glyphs[name]:
        t, b, l, r = _slot_box(glyph_set.component_slots[comp], size)
        bitmap = glyph_set.component_bitmaps[comp]
        dr = int(rng.integers(-max_shift, max_shift + 1)) if max_shift else 0
        dc = int(rng.integers(-max_shift, max_shift + 1)) if max_shift else 0
        t0, l0 = max(0, t + dr), max(0, l + dc)
        sub = bitmap[:size - t0, :size - l0]
        mask[t0:t0 + sub.shape[0], l0:l0 + sub.shape[1]] |= sub
    if jitter > 0:
        drop = rng.random(mask.shape) < 0.03 * jitter
        mask &= ~drop
    return mask


def glyph_image(glyph_set: GlyphSet, name: str, rng: np.random.Generator,
                jitter: float = 0.5, noise: float = 0.3,
                ink_level: float = 45.0, bg_level: float = 215.0) -> np.ndarray:
    """One grayscale training/eval image of the glyph (ink dark on light)."""
    mask = render_glyph_mask(glyph_set, name, rng=rng, jitter=jitter)
    canvas = np.full(mask.shape, bg_level, dtype=np.float64)
    canvas[mask] = ink_level
    canvas += rng.normal(0.0, 2.0 + 12.0 * noise, size=mask.shape)
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def glyph_samples(glyph_set: GlyphSet, per_class: int, seed: int = 0,
                  jitter: float = 0.5, noise: float = 0.3) -> list[tuple[np.ndarray, str]]:
    """Jittered labeled images, ``per_class`` for every glyph, class-major order."""
    rng = np.random.default_rng(seed)
    samples = []
    for name in glyph_set.glyph_names:
        for _ in range(per_class):
            samples.append((glyph_image(glyph_set, name, rng, jitter=jitter, noise=noise), name))
    return samples


@dataclass(frozen=True)
class SlipLayout:
    """Geometry of a generated strip: tall and narrow, glyphs stacked."""

    width: int = 72
    margin: int = 14
    gap_min: int = 8
    gap_max: int = 20
    x_jitter: int = 3
    glyph_jitter: float = 0.3

    def __post_init__(self):
        if self.gap_min < 1 or self.gap_max < self.gap_min:
            raise DataError("gap range must satisfy 1 <= gap_min <= gap_max")
        if self.width < 8 or self.margin < 0 or self.x_jitter < 0:
            raise DataError("bad slip layout geometry")


class SyntheticSlip(NamedTuple):
    image: np.ndarray
    boxes: list[BoundingBox]
    labels: tuple[str, ...]


def generate_synthetic_slip(glyph_set: GlyphSet, n_chars: int,
                            layout: SlipLayout = SlipLayout(),
                            noise: float = 0.0, seed: int = 0,
                            glyph_names: Sequence[str] | None = None) -> SyntheticSlip:
    """Render a vertical strip of glyphs with gold boxes and gold labels.

    Deterministic for a fixed seed. ``noise`` in [0, 1] scales both the
    strip texture and the additive Gaussian noise; at 0 the strip is still
    lightly textured but far below the segmenter's contrast gate.
    """
    if n_chars < 0:
        raise DataError(f"n_chars must be >= 0, got {n_chars}")
    rng = np.random.default_rng(seed)
    size = glyph_set.glyph_size
    if layout.width < size + 2:
        raise DataError(f"strip width {layout.width} too narrow for glyph size {size}")
    if glyph_names is None:
        pool = glyph_set.glyph_names
        if n_chars and not pool:
            raise DataError("glyph set has no glyphs")
        names = tuple(pool[int(rng.integers(len(pool)))] for _ in range(n_chars))
    else:
        names = tuple(glyph_names)
        if len(names) != n_chars:
            raise DataError(f"expected {n_chars} glyph names, got {len(names)}")

    placements = []
    y = layout.margin
    x_base = (layout.width - size) // 2
    for name in names:
        mask = render_glyph_mask(glyph_set, name, rng=rng, jitter=layout.glyph_jitter)
        dx = int(rng.integers(-layout.x_jitter, layout.x_jitter + 1)) if layout.x_jitter else 0
        x = min(max(0, x_base + dx), layout.width - size)
        placements.append((mask, y, x))
        y += size + int(rng.integers(layout.gap_min, layout.gap_max + 1))
    height = (y - (placements and int(0) or 0)) + layout.margin if placements else 2 * layout.margin
    if placements:
        last_mask, last_y, _ = placements[-1]
        height = last_y + size + layout.margin

    canvas = np.full((height, layout.width), 215.0, dtype=np.float64)
    boxes: list[BoundingBox] = []
    for mask, gy, gx in placements:
        rows, cols = np.nonzero(mask)
        canvas[gy:gy + size, gx:gx + size][mask] = 45.0
        if rows.size:
            boxes.append(BoundingBox(x=gx + int(cols.min()), y=gy + int(rows.min()),
                                     w=int(cols.max() - cols.min()) + 1,
                                     h=int(rows.max() - rows.min()) + 1))
        else:
            boxes.append(BoundingBox(x=gx, y=gy, w=size, h=size))
    canvas += rng.normal(0.0, 2.0 + 12.0 * noise, size=canvas.shape)
    image = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
    return SyntheticSlip(image=image, boxes=boxes, labels=names)
