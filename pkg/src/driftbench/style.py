"""Visual style palettes.

Training worlds draw wall styles from ``TRAINING_POOL``; the validation
corridor and the almost-collision locations use ``HELDOUT_POOL``. The two id
ranges never overlap, which is what makes the validation world visually new.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rng import SplitMix64

TEXTURES = ("flat", "vertical-stripe", "checker", "gradient")


@dataclass(frozen=True)
class StyleEntry:
    shade: int
    texture: str = "flat"
    period: float = 1.0

    def __post_init__(self):
        if not 0 <= self.shade <= 255:
            raise ValueError("shade must be in 0..255")
        if self.texture not in TEXTURES:
            raise ValueError(f"unknown texture {self.texture!r}")
        if not self.period > 0:
            raise ValueError("texture period must be positive")

    def to_dict(self) -> dict:
        return {"shade": self.shade, "texture": self.texture, "period": self.period}


@dataclass(frozen=True)
class StylePalette:
    entries: dict = field(default_factory=dict)
    floor_shade: int = 90
    ceiling_shade: int = 200

    def __getitem__(self, style_id: int) -> StyleEntry:
        return self.entries[style_id]

    def __contains__(self, style_id: int) -> bool:
        return style_id in self.entries

    def __hash__(self):
        return hash((tuple(sorted(self.entries.items())), self.floor_shade, self.ceiling_shade))

    def subset(self, ids) -> "StylePalette":
        return StylePalette({i: self.entries[i] for i in sorted(set(ids))}, self.floor_shade, self.ceiling_shade)

    def to_dict(self) -> dict:
        return {
            "floor_shade": self.floor_shade,
            "ceiling_shade": self.ceiling_shade,
            "entries": {str(k): v.to_dict() for k, v in sorted(self.entries.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StylePalette":
        entries = {int(k): StyleEntry(int(v["shade"]), v["texture"], float(v["period"])) for k, v in d["entries"].items()}
        return cls(entries, int(d["floor_shade"]), int(d["ceiling_shade"]))


def _build_pool(first_id: int, count: int, seed: int, shade_range, period_range, textures) -> dict:
    rng = SplitMix64(seed)
    pool = {}
    for k in range(count):
        shade = int(rng.uniform(*shade_range))
        texture = textures[k % len(textures)]
        period = round(rng.uniform(*period_range), 3)
        pool[first_id + k] = StyleEntry(shade, texture, period)
    return pool


# Saturated, coarse patterns for the basic worlds.
TRAINING_POOL = _build_pool(0, 24, 0x5EED_0001, (70, 235), (0.6, 2.0), TEXTURES)
TRAINING_FLOOR_CEILING = ((90, 200), (70, 180), (110, 220), (60, 150))

# Muted, finer patterns for the validation corridor and almost-collision set.
HELDOUT_POOL = _build_pool(100, 16, 0x5EED_0002, (40, 170), (0.2, 0.55), ("gradient", "checker", "flat", "vertical-stripe"))
HELDOUT_FLOOR_CEILING = (40, 235)
NIGHT_FLOOR_CEILING = (15, 30)

assert not set(TRAINING_POOL) & set(HELDOUT_POOL)


def training_palette(rng: SplitMix64, n_styles: int) -> tuple[StylePalette, list[int]]:
    """Draw ``n_styles`` wall style ids (with replacement) plus floor/ceiling."""
    ids = sorted(TRAINING_POOL)
    chosen = [rng.choice(ids) for _ in range(n_styles)]
    floor, ceiling = rng.choice(TRAINING_FLOOR_CEILING)
    return StylePalette({i: TRAINING_POOL[i] for i in sorted(set(chosen))}, floor, ceiling), chosen


def heldout_palette(ids, night: bool = False) -> StylePalette:
    floor, ceiling = NIGHT_FLOOR_CEILING if night else HELDOUT_FLOOR_CEILING
    return StylePalette({i: HELDOUT_POOL[i] for i in sorted(set(ids))}, floor, ceiling)
