"""Cross-style compositing augmentation.

Segments a character out of its source clip (via the segmentation client),
pastes it into a background clip from the opposite style domain with its own
motion preserved, filters bad composites, and enriches the caption with a
scene-style tag.
"""
from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .captions import (
    CaptionSegment,
    SceneStyle,
    SegmentKind,
    TaggedCaption,
    make_caption,
)
from .errors import (
    DomainMismatch,
    EmptyMatte,
    MissingReferenceImages,
    NoValidPlacement,
    TooShort,
)
from .ingest import ClipRecord, load_frames
from .registry import CharacterRegistry, StyleDomain

MIN_COMPOSITE_FRAMES = 49
DEFAULT_IDENTITY_THRESHOLD = 0.75


@dataclass(frozen=True)
class MatteFrame:
    alpha: np.ndarray           # (H, W) float in [0,1]
    color: np.ndarray           # (H, W, 3) uint8
    bbox: Optional[tuple[int, int, int, int]]  # (x0, y0, x1, y1) exclusive, None when empty


@dataclass(frozen=True)
class MatteSequence:
    clip_id: str
    character: str
    frames: tuple[MatteFrame, ...]


@dataclass(frozen=True)
class PlacementPolicy:
    scale_range: tuple[float, float] = (0.3, 0.6)


@dataclass(frozen=True)
class CompositeSpec:
    background_clip: str
    foreground_clip: str
    character: str
    scale: float                 # scaled character height as a fraction of background height
    anchor: tuple[float, float]  # normalized frame-0 bbox centroid position
    length: int
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class CompositeRecord:
    clip: ClipRecord
    spec: CompositeSpec
    filter_verdict: str = "kept"  # kept | rejected_identity | rejected_detection


def bbox_of(alpha: np.ndarray) -> Optional[tuple[int, int, int, int]]:
    """Tight integer bbox enclosing every pixel with alpha > 0."""
    ys, xs = np.nonzero(alpha > 0)
    if ys.size == 0:
        return None
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def matte_from_arrays(alphas: np.ndarray, colors: np.ndarray,
                      clip_id: str, character: str) -> MatteSequence:
    """Build a matte sequence from per-frame alpha (T,H,W) and color (T,H,W,3)."""
    frames = []
    any_coverage = False
    for alpha, color in zip(alphas, colors):
        box = bbox_of(alpha)
        any_coverage = any_coverage or box is not None
        frames.append(MatteFrame(alpha=alpha, color=color, bbox=box))
    if not any_coverage:
        raise EmptyMatte(f"{clip_id}/{character}: no frame has alpha coverage")
    return MatteSequence(clip_id=clip_id, character=character, frames=tuple(frames))


def extract_matte(clip: ClipRecord, character: str, seg_client) -> MatteSequence:
    """Fetch per-frame alpha mattes from the segmentation client.

    The client returns a directory of grayscale alpha images parallel to the
    clip's color frames; bboxes are computed here from the alphas.
    """
    if character not in clip.characters:
        raise ValueError(f"{character!r} not among clip characters {clip.characters}")
    matte_dir = Path(seg_client.segment(clip.path, character))
    alpha_paths = sorted(matte_dir.glob("*.png"))
    colors = load_frames(clip.path)
    alphas = np.stack([
        np.asarray(Image.open(p).convert("L"), dtype=np.float64) / 255.0
        for p in alpha_paths
    ])
    if alphas.shape[0] != colors.shape[0] or alphas.shape[1:] != colors.shape[1:3]:
        raise ValueError(f"matte dimensions {alphas.shape} do not match clip {colors.shape[:3]}")
    return matte_from_arrays(alphas, colors, clip.clip_id, character)


def _check_domains(background: ClipRecord, character: str,
                   registry: CharacterRegistry) -> StyleDomain:
    fg_style = registry.style_of(character)
    bg_style = registry.show(background.show_id).style
    if fg_style == bg_style:
        raise DomainMismatch(
            f"{character} ({fg_style}) must be placed in the opposite domain, "
            f"background show {background.show_id} is also {bg_style}"
        )
    return bg_style


def plan_composite(background: ClipRecord, matte: MatteSequence,
                   registry: CharacterRegistry, rng_seed: int,
                   policy: PlacementPolicy = PlacementPolicy()) -> CompositeSpec:
    """Draw a deterministic placement for pasting the matte into the background."""
    _check_domains(background, matte.character, registry)
    length = min(81, background.frames, len(matte.frames))
    if length < MIN_COMPOSITE_FRAMES:
        raise TooShort(f"composite would be {length} frames, need >= {MIN_COMPOSITE_FRAMES}")
    ref_bbox = matte.frames[0].bbox
    if ref_bbox is None:
        raise NoValidPlacement(f"{matte.clip_id}: character not visible in frame 0")
    x0, y0, x1, y1 = ref_bbox
    bw, bh = x1 - x0, y1 - y0
    bg_w, bg_h = background.width, background.height

    smin, smax = policy.scale_range
    rng = np.random.default_rng(rng_seed)
    scale = float(rng.uniform(smin, smax))
    # clamp so the scaled frame-0 bbox fits; if even the minimum scale
    # overflows the frame there is no valid placement
    fit_limit = min(bg_w * bh / (bw * bg_h), 1.0)
    if smin > fit_limit:
        raise NoValidPlacement(
            f"scaled bbox exceeds background frame even at minimum scale {smin}"
        )
    scale = min(scale, fit_limit)

    factor = scale * bg_h / bh
    half_w = bw * factor / 2 / bg_w
    half_h = bh * factor / 2 / bg_h
    ax = float(rng.uniform(half_w, 1 - half_w))
    ay = float(rng.uniform(half_h, 1 - half_h))
    return CompositeSpec(
        background_clip=background.clip_id,
        foreground_clip=matte.clip_id,
        character=matte.character,
        scale=scale,
        anchor=(ax, ay),
        length=length,
        seed=rng_seed,
    )


def _resize_nearest(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = arr.shape[:2]
    ys = np.minimum((np.arange(out_h) + 0.5) * h / out_h, h - 1).astype(int)
    xs = np.minimum((np.arange(out_w) + 0.5) * w / out_w, w - 1).astype(int)
    return arr[np.ix_(ys, xs)]


def composite_clip(spec: CompositeSpec, bg_frames: np.ndarray,
                   matte: MatteSequence) -> tuple[np.ndarray, list[Optional[tuple[int, int, int, int]]]]:
    """Render the composite frames.

    The foreground keeps its own per-frame motion: each frame's offset
    relative to the frame-0 bbox centroid is preserved (scaled), then clamped
    so the pasted bbox stays inside the background. Background pixels with
    alpha 0 are bit-identical to the source. Returns (frames, per-frame
    placed bbox in background coordinates).
    """
    bg_h, bg_w = bg_frames.shape[1:3]
    ref_bbox = matte.frames[0].bbox
    if ref_bbox is None:
        raise NoValidPlacement("character not visible in frame 0")
    rx0, ry0, rx1, ry1 = ref_bbox
    factor = spec.scale * bg_h / (ry1 - ry0)
    ref_cx = (rx0 + rx1) / 2
    ref_cy = (ry0 + ry1) / 2
    anchor_x = spec.anchor[0] * bg_w
    anchor_y = spec.anchor[1] * bg_h

    out = bg_frames[:spec.length].copy()
    placed: list[Optional[tuple[int, int, int, int]]] = []
    for t in range(spec.length):
        mf = matte.frames[t]
        if mf.bbox is None:
            placed.append(None)
            continue
        x0, y0, x1, y1 = mf.bbox
        crop_a = mf.alpha[y0:y1, x0:x1]
        crop_c = mf.color[y0:y1, x0:x1]
        out_h = max(1, int(np.floor((y1 - y0) * factor + 0.5)))
        out_w = max(1, int(np.floor((x1 - x0) * factor + 0.5)))
        out_h, out_w = min(out_h, bg_h), min(out_w, bg_w)
        a = _resize_nearest(crop_a, out_h, out_w)
        c = _resize_nearest(crop_c, out_h, out_w)

        cx = (x0 + x1) / 2
        cy = (y0 + y1) / 2
        target_cx = anchor_x + (cx - ref_cx) * factor
        target_cy = anchor_y + (cy - ref_cy) * factor
        left = int(np.floor(target_cx - out_w / 2 + 0.5))
        top = int(np.floor(target_cy - out_h / 2 + 0.5))
        left = min(max(left, 0), bg_w - out_w)
        top = min(max(top, 0), bg_h - out_h)

        region = out[t, top:top + out_h, left:left + out_w]
        alpha = a[..., None]
        blended = np.floor(alpha * c.astype(np.float64)
                           + (1 - alpha) * region.astype(np.float64) + 0.5).astype(np.uint8)
        mask = (a > 0)
        region[mask] = blended[mask]
        placed.append((left, top, left + out_w, top + out_h))
    return out, placed


def filter_composite(record: CompositeRecord, composite_frames: np.ndarray,
                     placed_bboxes: list, registry: CharacterRegistry,
                     embed_client, vlm_client,
                     threshold: float = DEFAULT_IDENTITY_THRESHOLD) -> str:
    """Keep/reject a composite.

    Realistic characters: cosine similarity between the composited crop
    embedding (middle frame) and the best registry reference-image
    embedding. Cartoon characters: a VLM yes/no visibility check.
    """
    character = registry.character(record.spec.character)
    style = registry.style_of(character.canonical_name)
    if style is StyleDomain.REALISTIC:
        if not character.reference_images:
            raise MissingReferenceImages(character.canonical_name)
        mid = record.spec.length // 2
        box = placed_bboxes[mid] or placed_bboxes[0]
        if box is None:
            return "rejected_identity"
        x0, y0, x1, y1 = box
        crop = composite_frames[mid, y0:y1, x0:x1]
        with tempfile.TemporaryDirectory() as tmp:
            crop_path = Path(tmp) / "crop.png"
            Image.fromarray(crop).save(crop_path)
            crop_vec = np.asarray(embed_client.embed_image(str(crop_path)))
        best = -1.0
        for ref in character.reference_images:
            ref_vec = np.asarray(embed_client.embed_image(ref))
            denom = np.linalg.norm(crop_vec) * np.linalg.norm(ref_vec)
            sim = float(crop_vec @ ref_vec / denom) if denom > 0 else 0.0
            best = max(best, sim)
        return "kept" if best >= threshold else "rejected_identity"

    prompt = (
        f"Is {character.canonical_name} clearly visible and recognizable in these "
        f"frames? Answer yes or no."
    )
    mid = record.spec.length // 2
    answer = vlm_client.vlm(prompt, [f"{record.clip.path}/frame_{mid:05d}.png"])
    return "kept" if answer.strip().lower().startswith("y") else "rejected_detection"


_INSERT_TEMPLATE = ", appears in the scene. "


def caption_composite(record: CompositeRecord, background_caption: TaggedCaption,
                      registry: CharacterRegistry, vlm_client=None) -> TaggedCaption:
    """Background caption content + inserted-character clause + style tag.

    The trailing scene-style tag always matches the background show's style,
    replacing any existing tag. With a VLM client the action clause is asked
    for; otherwise a deterministic template is used.
    """
    bg_style = registry.show(record.clip.show_id).style
    segments = [
        s for s in background_caption.segments if s.kind is not SegmentKind.SCENE_STYLE_TAG
    ]
    if segments and segments[-1].kind is SegmentKind.TEXT and not segments[-1].text.endswith(" "):
        segments[-1] = CaptionSegment.of_text(segments[-1].text + " ")
    clause = _INSERT_TEMPLATE
    if vlm_client is not None:
        prompt = (
            f"In one short clause, describe what {record.spec.character} does in "
            f"this scene. Start with a comma and end with a period."
        )
        text = vlm_client.vlm(prompt, []).strip()
        if text:
            if not text.startswith(","):
                text = ", " + text
            if not text.endswith("."):
                text += "."
            clause = text + " "
    segments.append(CaptionSegment.of_character(record.spec.character))
    segments.append(CaptionSegment.of_text(clause))
    segments.append(CaptionSegment.of_style(SceneStyle(bg_style.value)))
    return make_caption(segments)
