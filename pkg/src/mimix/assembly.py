"""Dataset assembly: ratio mixing, manifests, training configs, statistics."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

from .errors import InsufficientSynthetic

MANIFEST_HEADER = "# mimix-manifest v1"
SWEEP_RATIOS = (0.0, 0.05, 0.10, 0.20)

_ENTRY_FIELDS = (
    "id", "path", "show", "characters", "caption", "style", "provenance",
    "frames", "fps", "width", "height", "source",
)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: str
    show: str
    characters: tuple[str, ...] = ()
    caption: Optional[str] = None   # canonical rendered caption string
    style: Optional[str] = None
    provenance: str = "real"
    frames: int = 81
    fps: int = 16
    width: int = 0
    height: int = 0
    source: Optional[dict] = None   # {bg_clip, fg_clip, seed} for composites

    def to_json_line(self) -> str:
        data = asdict(self)
        data["characters"] = list(self.characters)
        return json.dumps({k: data[k] for k in _ENTRY_FIELDS}, ensure_ascii=False)

    @staticmethod
    def from_json(data: dict) -> "ManifestEntry":
        data = dict(data)
        data["characters"] = tuple(data.get("characters", ()))
        return ManifestEntry(**{k: data[k] for k in _ENTRY_FIELDS if k in data})


@dataclass(frozen=True)
class MixPolicy:
    ratio: float
    seed: int = 0
    stratify_by_show: bool = False

    def __post_init__(self):
        if not (0 <= self.ratio <= 1):
            raise ValueError(f"ratio {self.ratio} outside [0, 1]")


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    mix: Optional[MixPolicy] = None

    @property
    def counts(self) -> dict[str, int]:
        real = sum(1 for e in self.entries if e.provenance == "real")
        return {"real": real, "synthetic": len(self.entries) - real}


def synthetic_count(ratio: float, real_count: int) -> int:
    # round-half-to-even keeps the count deterministic and unbiased
    return round(ratio * real_count)


def _stratified_sample(pool: list[ManifestEntry], n: int,
                       rng: random.Random) -> list[ManifestEntry]:
    groups: dict[str, list[ManifestEntry]] = {}
    for e in pool:
        groups.setdefault(e.show, []).append(e)
    shows = sorted(groups)
    total = len(pool)
    # proportional allocation with largest-remainder rounding
    quotas = {s: n * len(groups[s]) / total for s in shows}
    alloc = {s: int(quotas[s]) for s in shows}
    remainder = n - sum(alloc.values())
    for s in sorted(shows, key=lambda s: (-(quotas[s] - alloc[s]), s)):
        if remainder <= 0:
            break
        if alloc[s] < len(groups[s]):
            alloc[s] += 1
            remainder -= 1
    # spill over if a group was capped at its size
    while remainder > 0:
        progressed = False
        for s in shows:
            if remainder > 0 and alloc[s] < len(groups[s]):
                alloc[s] += 1
                remainder -= 1
                progressed = True
        if not progressed:
            break
    selected = []
    for s in shows:
        selected.extend(rng.sample(sorted(groups[s], key=lambda e: e.id), alloc[s]))
    return selected


def mix_datasets(real: list[ManifestEntry], synthetic: list[ManifestEntry],
                 policy: MixPolicy) -> DatasetManifest:
    """All real entries plus a seeded sample of synthetic entries.

    The synthetic count is round(ratio * |real|): the ratio is a fraction of
    the original real set, not of the final total.
    """
    needed = synthetic_count(policy.ratio, len(real))
    if needed > len(synthetic):
        raise InsufficientSynthetic(needed, len(synthetic))
    rng = random.Random(policy.seed)
    pool = sorted(synthetic, key=lambda e: e.id)
    if needed == 0:
        selected: list[ManifestEntry] = []
    elif policy.stratify_by_show:
        selected = _stratified_sample(pool, needed, rng)
    else:
        selected = rng.sample(pool, needed)
    entries = sorted(list(real) + selected, key=lambda e: e.id)
    return DatasetManifest(entries=entries, mix=policy)


def emit_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write the line-oriented manifest; byte-identical across re-runs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [MANIFEST_HEADER]
    lines.extend(e.to_json_line() for e in manifest.entries)
    path.write_text("\n".join(lines) + "\n", "utf-8")


def load_manifest(path: str | Path) -> DatasetManifest:
    entries = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entries.append(ManifestEntry.from_json(json.loads(line)))
    return DatasetManifest(entries=entries)


@dataclass(frozen=True)
class TrainingConfig:
    lora_rank: int = 32
    epochs: int = 5
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    batch_size: int = 64
    gradient_clipping: bool = True
    precision: str = "fp16"


def emit_training_config(path: str | Path, **overrides) -> TrainingConfig:
    """Write the fine-tuning hyperparameters as a flat key=value file."""
    cfg = TrainingConfig(**overrides)
    lines = []
    for key, value in asdict(cfg).items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", "utf-8")
    return cfg


def load_training_config(path: str | Path) -> TrainingConfig:
    values: dict = {}
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip() or "=" not in line:
            continue
        key, raw = line.split("=", 1)
        key, raw = key.strip(), raw.strip()
        if key in ("lora_rank", "epochs", "batch_size"):
            values[key] = int(raw)
        elif key == "learning_rate":
            values[key] = float(raw)
        elif key == "gradient_clipping":
            values[key] = raw.lower() == "true"
        else:
            values[key] = raw
    return TrainingConfig(**values)


@dataclass(frozen=True)
class CharacterStat:
    show: str
    character: str
    count: int
    total: int
    percentage: float  # round(100*count/total, 1)


@dataclass(frozen=True)
class DistributionStats:
    per_character: tuple[CharacterStat, ...]
    show_totals: dict[str, int]


def compute_stats(entries: list[ManifestEntry]) -> DistributionStats:
    """Per-show clip totals and per-character occurrence percentages.

    Shows with zero clips are omitted (no division by zero).
    """
    totals: dict[str, int] = {}
    counts: dict[tuple[str, str], int] = {}
    for e in entries:
        totals[e.show] = totals.get(e.show, 0) + 1
        for name in e.characters:
            key = (e.show, name)
            counts[key] = counts.get(key, 0) + 1
    stats = []
    for (show, name), count in sorted(counts.items()):
        total = totals[show]
        stats.append(CharacterStat(
            show=show, character=name, count=count, total=total,
            percentage=round(100 * count / total, 1),
        ))
    return DistributionStats(per_character=tuple(stats), show_totals=totals)


def render_stats(stats: DistributionStats) -> str:
    """Aligned-columns distribution table."""
    lines = [f"{'show':<16} {'character':<16} {'count':>8} {'total':>8} {'pct':>6}"]
    for s in stats.per_character:
        lines.append(f"{s.show:<16} {s.character:<16} {s.count:>8} {s.total:>8} {s.percentage:>5.1f}%")
    return "\n".join(lines)
