"""Benchmark suite construction, VLM-judged scoring, and report rendering."""
from __future__ import annotations

import enum
import json
import math
import random
import re
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .annotation import sample_frames
from .captions import CaptionSegment, SceneStyle, TaggedCaption, make_caption, render_caption
from .errors import (
    EmptyInput,
    EvaluationError,
    MissingEvalFlag,
    NoScoreFound,
    ScoreOutOfRange,
)
from .registry import Character, CharacterRegistry, StyleDomain

SINGLE_PROMPTS = 50
MULTI_PROMPTS = 50
PROMPTS_PER_CHARACTER = 5
DEFAULT_DYNAMIC_THRESHOLD = 1.0
SCENE_CHARACTER = "(scene)"

VLM_METRICS = ("identity_p", "motion_p", "style_p", "interaction_p")
PROXY_METRICS = ("consistency", "motion", "dynamic", "quality", "aesthetic")


class Metric(enum.Enum):
    IDENTITY_P = "identity_p"
    MOTION_P = "motion_p"
    STYLE_P = "style_p"
    INTERACTION_P = "interaction_p"


class InteractionCategory(enum.Enum):
    INTER_STYLE = "inter_style"
    INTRA_STYLE = "intra_style"
    INTER_SERIES = "inter_series"
    INTRA_SERIES = "intra_series"


@dataclass(frozen=True)
class SuiteEntry:
    prompt_id: str
    prompt: TaggedCaption
    characters: tuple[str, ...]
    category: Optional[InteractionCategory] = None

    def to_json(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "prompt": render_caption(self.prompt),
            "characters": list(self.characters),
            "category": self.category.value if self.category else None,
        }


@dataclass(frozen=True)
class BenchmarkSuite:
    single_prompts: tuple[SuiteEntry, ...]
    multi_prompts: tuple[SuiteEntry, ...]

    def to_json(self) -> dict:
        return {
            "single": [e.to_json() for e in self.single_prompts],
            "multi": [e.to_json() for e in self.multi_prompts],
        }

    def all_entries(self) -> list[SuiteEntry]:
        return list(self.single_prompts) + list(self.multi_prompts)


def categorize(characters: Sequence[str], registry: CharacterRegistry) -> InteractionCategory:
    """Primary interaction category for a character group.

    Precedence: same show wins (intra_series), then mixed styles
    (inter_style), then cross-show within one style (inter_series).
    intra_style is the axis label for single-style groups and is reported
    through category_axes.
    """
    shows = {registry.character(registry.resolve_alias(c)).show_id for c in characters}
    styles = {registry.style_of(c) for c in characters}
    if len(shows) == 1:
        return InteractionCategory.INTRA_SERIES
    if len(styles) > 1:
        return InteractionCategory.INTER_STYLE
    return InteractionCategory.INTER_SERIES


def category_axes(characters: Sequence[str], registry: CharacterRegistry) -> tuple[str, str]:
    """(style axis, series axis) for consistency checks."""
    shows = {registry.character(registry.resolve_alias(c)).show_id for c in characters}
    styles = {registry.style_of(c) for c in characters}
    style_axis = "inter_style" if len(styles) > 1 else "intra_style"
    series_axis = "inter_series" if len(shows) > 1 else "intra_series"
    return style_axis, series_axis


def _load_templates() -> dict:
    return json.loads(
        resources.files("mimix.data").joinpath("benchmark_templates.json").read_text("utf-8")
    )


def _prompt_caption(actions: list[tuple[str, str]], style: StyleDomain) -> TaggedCaption:
    segments: list[CaptionSegment] = []
    for name, action in actions:
        segments.append(CaptionSegment.of_character(name))
        segments.append(CaptionSegment.of_text(f", {action}. "))
    segments.append(CaptionSegment.of_style(SceneStyle(style.value)))
    return make_caption(segments)


def build_benchmark(registry: CharacterRegistry, seed: int = 0) -> BenchmarkSuite:
    """50 single-subject + 50 multi-subject prompts, deterministic per seed."""
    eval_chars = sorted(registry.eval_characters(), key=lambda c: c.canonical_name)
    if len(eval_chars) < 2:
        raise MissingEvalFlag("registry has fewer than two eval-flagged characters")
    templates = _load_templates()
    rng = random.Random(seed)

    singles: list[SuiteEntry] = []
    for ch in eval_chars:
        bank = templates["single"].get(ch.canonical_name)
        if not bank or len(bank) < PROMPTS_PER_CHARACTER:
            raise MissingEvalFlag(
                f"no single-prompt template bank for {ch.canonical_name!r}"
            )
        style = registry.style_of(ch.canonical_name)
        for k in range(PROMPTS_PER_CHARACTER):
            caption = _prompt_caption([(ch.canonical_name, bank[k])], style)
            singles.append(SuiteEntry(
                prompt_id=f"s{len(singles):03d}",
                prompt=caption,
                characters=(ch.canonical_name,),
            ))
    if len(singles) != SINGLE_PROMPTS:
        raise MissingEvalFlag(
            f"expected {SINGLE_PROMPTS} single prompts, built {len(singles)}"
        )

    names = [c.canonical_name for c in eval_chars]
    multis: list[SuiteEntry] = []
    pair_bank = templates["pair"]
    triple_bank = templates["triple"]
    for i in range(MULTI_PROMPTS):
        size = rng.choice((2, 2, 3))  # pairs dominant, triples mixed in
        group = rng.sample(names, size)
        category = categorize(group, registry)
        # scene style follows a background show drawn from the group; for
        # inter-style groups this alternates with the seeded draw
        bg_name = rng.choice(group)
        style = registry.style_of(bg_name)
        bank = pair_bank if size == 2 else triple_bank
        actions = rng.choice(bank)
        caption = _prompt_caption(list(zip(group, actions)), style)
        multis.append(SuiteEntry(
            prompt_id=f"m{i:03d}",
            prompt=caption,
            characters=tuple(group),
            category=category,
        ))
    return BenchmarkSuite(tuple(singles), tuple(multis))


def save_suite(suite: BenchmarkSuite, path: str | Path) -> None:
    Path(path).write_text(json.dumps(suite.to_json(), indent=2, ensure_ascii=False) + "\n", "utf-8")


def load_suite(path: str | Path, registry: CharacterRegistry) -> BenchmarkSuite:
    from .captions import parse_caption

    data = json.loads(Path(path).read_text("utf-8"))

    def entry(d: dict) -> SuiteEntry:
        return SuiteEntry(
            prompt_id=d["prompt_id"],
            prompt=parse_caption(d["prompt"]),
            characters=tuple(d["characters"]),
            category=InteractionCategory(d["category"]) if d.get("category") else None,
        )

    return BenchmarkSuite(
        tuple(entry(d) for d in data["single"]),
        tuple(entry(d) for d in data["multi"]),
    )


# --- judging ---

_RUBRIC_CRITERIA = {
    Metric.IDENTITY_P: (
        "how well the video preserves the character's visual identity and "
        "distinctive features: facial feature consistency, body proportions, "
        "characteristic attributes (e.g., Jerry's mouse ears, Tom's whiskers), "
        "and overall color scheme. 10 means perfect identity preservation where "
        "the character is immediately recognizable; 1 means the character is "
        "completely unrecognizable."
    ),
    Metric.MOTION_P: (
        "the authenticity of character-specific movements and behaviors relative "
        "to their canonical personality: motion patterns (e.g., Jerry's quick "
        "scurrying, Tom's exaggerated sneaking), behavioral consistency, and "
        "expression of personality through movement across the frame sequence."
    ),
    Metric.STYLE_P: (
        "the consistency of the character's original artistic and visual style: "
        "animation style (cartoon vs. realistic), aesthetic coherence with the "
        "source material, art direction fidelity, and rendering consistency."
    ),
    Metric.INTERACTION_P: (
        "the naturalness and plausibility of interactions: spatial relationships, "
        "timing and coordination, believability of reactions and responses, and "
        "physical dynamics between characters. For a single character, judge the "
        "interactions with the environment and scene elements."
    ),
}


@dataclass(frozen=True)
class JudgeRubric:
    metric: Metric
    rubric_text: str
    scale_min: int = 1
    scale_max: int = 10

    @staticmethod
    def for_metric(metric: Metric) -> "JudgeRubric":
        return JudgeRubric(metric=metric, rubric_text=_RUBRIC_CRITERIA[metric])


@dataclass(frozen=True)
class MetricScore:
    video_id: str
    metric: Metric
    character: str  # canonical name, or "(scene)" for interaction
    score: int

    def __post_init__(self):
        if not (1 <= self.score <= 10):
            raise ScoreOutOfRange(f"score {self.score} outside [1, 10]")

    def to_json_line(self) -> str:
        return json.dumps({
            "video_id": self.video_id,
            "metric": self.metric.value,
            "character": self.character,
            "score": self.score,
        })


def build_judge_prompt(frame_paths: Sequence[str], rubric: JudgeRubric,
                       character: Optional[Character] = None) -> str:
    if not frame_paths:
        raise EvaluationError("judge prompt needs at least one frame")
    parts = [
        f"You are judging {len(frame_paths)} frames sampled in order from a generated video.",
    ]
    if character is not None and rubric.metric is not Metric.INTERACTION_P:
        parts.append(
            f"Character under evaluation: {character.canonical_name} "
            f"({character.description})."
        )
    parts.append(f"Evaluate {rubric.rubric_text}")
    parts.append(
        f"Answer with a single integer {rubric.scale_min}-{rubric.scale_max}."
    )
    return "\n\n".join(parts)


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


def parse_judge_response(text: str) -> int:
    """Extract the first number in prose; fractional responses floor."""
    match = _NUMBER_RE.search(text)
    if match is None:
        raise NoScoreFound(text[:80])
    score = math.floor(float(match.group()))
    if not (1 <= score <= 10):
        raise ScoreOutOfRange(f"score {score} outside [1, 10]")
    return score


def compute_dynamic_degree(per_clip_mean_flow: Sequence[float],
                           threshold: float = DEFAULT_DYNAMIC_THRESHOLD) -> float:
    """Fraction of clips whose mean flow magnitude exceeds threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if not per_clip_mean_flow:
        raise EmptyInput("no flow values")
    above = sum(1 for v in per_clip_mean_flow if v > threshold)
    return above / len(per_clip_mean_flow)


def score_video(video_id: str, frame_paths: Sequence[str], entry: SuiteEntry,
                registry: CharacterRegistry, vlm_client) -> list[MetricScore]:
    """One identity/motion/style score per character plus one interaction score.

    The judge sees 10 uniformly sampled frames. A parse failure is retried
    once, then propagated.
    """
    indices = sample_frames(len(frame_paths), 10)
    frames = [frame_paths[i] for i in indices]

    def judge(metric: Metric, character: Optional[Character], who: str) -> MetricScore:
        prompt = build_judge_prompt(frames, JudgeRubric.for_metric(metric), character)
        try:
            score = parse_judge_response(vlm_client.vlm(prompt, frames))
        except (NoScoreFound, ScoreOutOfRange):
            score = parse_judge_response(vlm_client.vlm(prompt, frames))
        return MetricScore(video_id=video_id, metric=metric, character=who, score=score)

    scores = []
    for name in entry.characters:
        ch = registry.character(registry.resolve_alias(name) or name)
        for metric in (Metric.IDENTITY_P, Metric.MOTION_P, Metric.STYLE_P):
            scores.append(judge(metric, ch, ch.canonical_name))
    scores.append(judge(Metric.INTERACTION_P, None, SCENE_CHARACTER))
    return scores


# --- aggregation ---

@dataclass
class MethodScores:
    """Collected raw material for one report row."""
    method: str
    subject_mode: str  # "single" | "multiple"
    metric_scores: list[MetricScore] = field(default_factory=list)
    proxy_values: dict[str, list[float]] = field(default_factory=dict)


@dataclass(frozen=True)
class ReportRow:
    method: str
    subject_mode: str
    cells: dict[str, Optional[float]]  # metric -> value, None renders as "—"


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ReportRow, ...]

    def to_json(self) -> dict:
        return {
            "rows": [
                {"method": r.method, "subject": r.subject_mode, "cells": r.cells}
                for r in self.rows
            ]
        }


def aggregate_report(collected: list[MethodScores]) -> EvalReport:
    """Arithmetic means per row: VLM cells to 2 decimals, proxies to 4."""
    rows = []
    for ms in collected:
        cells: dict[str, Optional[float]] = {}
        for metric in PROXY_METRICS:
            values = ms.proxy_values.get(metric, [])
            cells[metric] = round(sum(values) / len(values), 4) if values else None
        for metric in VLM_METRICS:
            values = [s.score for s in ms.metric_scores if s.metric.value == metric]
            cells[metric] = round(sum(values) / len(values), 2) if values else None
        rows.append(ReportRow(method=ms.method, subject_mode=ms.subject_mode, cells=cells))
    return EvalReport(tuple(rows))


def render_report(report: EvalReport) -> str:
    columns = list(PROXY_METRICS) + list(VLM_METRICS)
    header = f"{'method':<16} {'subject':<9}" + "".join(f" {c:>14}" for c in columns)
    lines = [header, "-" * len(header)]
    for row in report.rows:
        cells = []
        for c in columns:
            v = row.cells.get(c)
            if v is None:
                cells.append(f" {'—':>14}")
            elif c in PROXY_METRICS:
                cells.append(f" {v:>14.4f}")
            else:
                cells.append(f" {v:>14.2f}")
        lines.append(f"{row.method:<16} {row.subject_mode:<9}" + "".join(cells))
    return "\n".join(lines)
