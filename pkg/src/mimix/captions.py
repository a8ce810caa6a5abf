"""Character/action caption grammar: parsing, rendering, validation, ablation.

Captions carry structured tags that anchor character identities and the
scene's rendering style:

    [character:Tom], chases a mouse. [character:Jerry], hides. [scene-style:cartoon]

Input is lenient (any key casing, optional whitespace inside brackets);
output is canonical (lowercase key, no padding). Tag-free captions are
valid: they are the untagged baseline format.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import MalformedTag, UnterminatedTag


class SceneStyle(enum.Enum):
    CARTOON = "cartoon"
    REALISTIC = "realistic"

    def __str__(self) -> str:
        return self.value


class SegmentKind(enum.Enum):
    TEXT = "text"
    CHARACTER_TAG = "character_tag"
    SCENE_STYLE_TAG = "scene_style_tag"


class TagAblation(enum.Enum):
    NONE = "none"
    STRIP_SCENE_STYLE = "strip_scene_style"
    STRIP_CHARACTER = "strip_character"
    STRIP_BOTH = "strip_both"


@dataclass(frozen=True)
class CaptionSegment:
    kind: SegmentKind
    text: str = ""
    name: str = ""
    style: Optional[SceneStyle] = None

    @staticmethod
    def of_text(text: str) -> "CaptionSegment":
        if not text:
            raise ValueError("text segments must be non-empty")
        return CaptionSegment(SegmentKind.TEXT, text=text)

    @staticmethod
    def of_character(name: str) -> "CaptionSegment":
        name = name.strip()
        if not name:
            raise ValueError("character tag name must be non-empty")
        return CaptionSegment(SegmentKind.CHARACTER_TAG, name=name)

    @staticmethod
    def of_style(style: SceneStyle) -> "CaptionSegment":
        return CaptionSegment(SegmentKind.SCENE_STYLE_TAG, style=style)


@dataclass(frozen=True)
class TaggedCaption:
    segments: tuple[CaptionSegment, ...]
    raw: str = ""

    def __eq__(self, other: object) -> bool:
        # raw is provenance only; captions are equal segment-by-segment
        if not isinstance(other, TaggedCaption):
            return NotImplemented
        return self.segments == other.segments

    def __hash__(self) -> int:
        return hash(self.segments)

    @property
    def style(self) -> Optional[SceneStyle]:
        for seg in self.segments:
            if seg.kind is SegmentKind.SCENE_STYLE_TAG:
                return seg.style
        return None

    @property
    def character_tags(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments if s.kind is SegmentKind.CHARACTER_TAG)


_KEY_CHARACTER = "character"
_KEY_SCENE_STYLE = "scene-style"


def _merge_text(segments: Iterable[CaptionSegment]) -> tuple[CaptionSegment, ...]:
    """Collapse adjacent text segments and drop empty ones."""
    merged: list[CaptionSegment] = []
    for seg in segments:
        if seg.kind is SegmentKind.TEXT:
            if not seg.text:
                continue
            if merged and merged[-1].kind is SegmentKind.TEXT:
                merged[-1] = CaptionSegment.of_text(merged[-1].text + seg.text)
                continue
        merged.append(seg)
    return tuple(merged)


def make_caption(segments: Sequence[CaptionSegment], raw: str = "") -> TaggedCaption:
    """Build a caption from segments, merging adjacent text runs."""
    return TaggedCaption(_merge_text(segments), raw=raw)


def _try_parse_tag(raw: str, start: int):
    """Attempt to read a recognized tag at raw[start] == '['.

    Returns (segment, end_index) on success, None when the bracket is not a
    recognized tag (and should pass through as plain text). Raises
    MalformedTag / UnterminatedTag per the grammar.
    """
    colon = raw.find(":", start + 1)
    close = raw.find("]", start + 1)
    if colon == -1 or (close != -1 and close < colon):
        return None  # no 'key:' shape inside this bracket
    key = raw[start + 1:colon].strip().lower()
    if key not in (_KEY_CHARACTER, _KEY_SCENE_STYLE):
        return None
    if close == -1:
        raise UnterminatedTag(f"tag '[{key}:' opened at index {start} is never closed")
    value = raw[colon + 1:close].strip()
    if not value:
        raise MalformedTag(f"tag '[{key}:]' at index {start} has an empty value")
    if key == _KEY_CHARACTER:
        return CaptionSegment.of_character(value), close + 1
    try:
        style = SceneStyle(value.lower())
    except ValueError:
        raise MalformedTag(
            f"scene-style value {value!r} is not one of 'cartoon'/'realistic'"
        ) from None
    return CaptionSegment.of_style(style), close + 1


def parse_caption(raw: str) -> TaggedCaption:
    """Parse a caption string into tagged segments.

    Tags are recognized case-insensitively with optional whitespace padding;
    unknown bracketed keys pass through as plain text. A scene-style tag must
    be unique and final (trailing whitespace after it is tolerated).
    """
    segments: list[CaptionSegment] = []
    buf: list[str] = []
    i = 0
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch == "[":
            parsed = _try_parse_tag(raw, i)
            if parsed is not None:
                if buf:
                    segments.append(CaptionSegment.of_text("".join(buf)))
                    buf = []
                seg, i = parsed
                segments.append(seg)
                continue
        buf.append(ch)
        i += 1
    if buf:
        segments.append(CaptionSegment.of_text("".join(buf)))

    merged = list(_merge_text(segments))
    style_positions = [
        k for k, s in enumerate(merged) if s.kind is SegmentKind.SCENE_STYLE_TAG
    ]
    if len(style_positions) > 1:
        raise MalformedTag("caption contains more than one scene-style tag")
    if style_positions:
        k = style_positions[0]
        trailing = merged[k + 1:]
        if len(trailing) == 1 and trailing[0].kind is SegmentKind.TEXT and not trailing[0].text.strip():
            merged = merged[:k + 1]  # trailing whitespace after the style tag is noise
        elif trailing:
            raise MalformedTag("scene-style tag must be the final element of the caption")
    return TaggedCaption(tuple(merged), raw=raw)


def render_caption(caption: TaggedCaption) -> str:
    """Serialize a caption in canonical tag spelling.

    parse_caption(render_caption(c)) equals c segment-by-segment.
    """
    parts: list[str] = []
    for seg in caption.segments:
        if seg.kind is SegmentKind.TEXT:
            parts.append(seg.text)
        elif seg.kind is SegmentKind.CHARACTER_TAG:
            parts.append(f"[character:{seg.name}]")
        else:
            parts.append(f"[scene-style:{seg.style.value}]")
    return "".join(parts)


def apply_ablation(caption: TaggedCaption, mode: TagAblation) -> TaggedCaption:
    """Produce the caption-format ablation variants.

    Stripping character tags keeps the bare name as plain text (the identity
    words survive, only the structured anchor is removed); stripping the
    scene-style tag removes it outright.
    """
    if mode is TagAblation.NONE:
        return caption
    out: list[CaptionSegment] = []
    for seg in caption.segments:
        if seg.kind is SegmentKind.SCENE_STYLE_TAG and mode in (
            TagAblation.STRIP_SCENE_STYLE, TagAblation.STRIP_BOTH,
        ):
            continue
        if seg.kind is SegmentKind.CHARACTER_TAG and mode in (
            TagAblation.STRIP_CHARACTER, TagAblation.STRIP_BOTH,
        ):
            out.append(CaptionSegment.of_text(seg.name))
            continue
        out.append(seg)
    # strip trailing whitespace left behind by a removed style tag
    merged = list(_merge_text(out))
    if merged and merged[-1].kind is SegmentKind.TEXT:
        stripped = merged[-1].text.rstrip()
        if stripped != merged[-1].text:
            if stripped:
                merged[-1] = CaptionSegment.of_text(stripped)
            else:
                merged.pop()
    return TaggedCaption(tuple(merged), raw=caption.raw)


class IssueCode(enum.Enum):
    UNKNOWN_CHARACTER = "UnknownCharacter"
    DUPLICATE_STYLE_TAG = "DuplicateStyleTag"
    STYLE_TAG_NOT_FINAL = "StyleTagNotFinal"


@dataclass(frozen=True)
class CaptionIssue:
    code: IssueCode
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.code.value}({self.detail})" if self.detail else self.code.value


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[CaptionIssue, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.issues


def validate_caption(caption: TaggedCaption, registry) -> ValidationReport:
    """Check a caption against the character registry and tag invariants.

    Issues are data, not failures: hand-built segment lists may violate the
    invariants that parse_caption enforces.
    """
    issues: list[CaptionIssue] = []
    seen_unknown: set[str] = set()
    style_count = 0
    for k, seg in enumerate(caption.segments):
        if seg.kind is SegmentKind.CHARACTER_TAG:
            if registry.resolve_alias(seg.name) is None and seg.name not in seen_unknown:
                seen_unknown.add(seg.name)
                issues.append(CaptionIssue(IssueCode.UNKNOWN_CHARACTER, seg.name))
        elif seg.kind is SegmentKind.SCENE_STYLE_TAG:
            style_count += 1
            if style_count > 1:
                issues.append(CaptionIssue(IssueCode.DUPLICATE_STYLE_TAG))
            elif k != len(caption.segments) - 1:
                issues.append(CaptionIssue(IssueCode.STYLE_TAG_NOT_FINAL))
    return ValidationReport(tuple(issues))


def mentioned_characters(caption: TaggedCaption, registry=None) -> list[str]:
    """Character names in first-mention order, deduplicated.

    With a registry, names are resolved to canonical form (unresolvable names
    are kept verbatim) and deduplicated post-resolution.
    """
    out: list[str] = []
    seen: set[str] = set()
    for seg in caption.segments:
        if seg.kind is not SegmentKind.CHARACTER_TAG:
            continue
        name = seg.name
        if registry is not None:
            name = registry.resolve_alias(name) or name
        if name not in seen:
            seen.add(name)
            out.append(name)
    return out
