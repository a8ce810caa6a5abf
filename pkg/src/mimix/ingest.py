"""Turn raw source videos into standardized 81-frame clips at 16 fps.

A "source video" is a directory of numbered frame images plus a small
``meta.json`` sidecar ({"fps": ..., "show_id": ...}); actual codec work
happens outside the toolkit. Frames are numpy uint8 arrays of shape
(T, H, W, 3).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import CropTooLarge, DecodeError

CLIP_FRAMES = 81
CLIP_FPS = 16
DEFAULT_CROP_FRACTION = 0.12
DEFAULT_SCENE_THRESHOLD = 0.3


@dataclass(frozen=True)
class SourceVideo:
    path: Path
    show_id: str
    frame_count: int
    fps: Fraction
    width: int
    height: int


@dataclass(frozen=True)
class SceneBoundary:
    start_frame: int  # inclusive
    end_frame: int    # exclusive

    def __post_init__(self):
        if not (0 <= self.start_frame < self.end_frame):
            raise ValueError(f"bad boundary [{self.start_frame}, {self.end_frame})")

    def __len__(self) -> int:
        return self.end_frame - self.start_frame


@dataclass
class ClipRecord:
    clip_id: str
    path: str
    show_id: str
    frames: int = CLIP_FRAMES
    fps: int = CLIP_FPS
    width: int = 0
    height: int = 0
    provenance: str = "real"
    characters: list[str] = field(default_factory=list)
    caption: Optional[str] = None  # canonical rendered caption string

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(data: dict) -> "ClipRecord":
        return ClipRecord(**data)


def load_frames(video_dir: str | Path) -> np.ndarray:
    """Read the sorted frame images of a video/clip directory into (T,H,W,3)."""
    video_dir = Path(video_dir)
    paths = sorted(video_dir.glob("*.png")) + sorted(video_dir.glob("*.jpg"))
    if not paths:
        raise DecodeError(f"no frame images in {video_dir}")
    frames = []
    first_shape = None
    for p in paths:
        try:
            arr = np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8)
        except OSError as exc:
            raise DecodeError(f"cannot decode {p}: {exc}") from exc
        if first_shape is None:
            first_shape = arr.shape
        elif arr.shape != first_shape:
            raise DecodeError(f"frame size mismatch in {video_dir} at {p.name}")
        frames.append(arr)
    return np.stack(frames)


def write_frames(frames: np.ndarray, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(frame).save(out_dir / f"frame_{i:05d}.png")


def read_source_video(video_dir: str | Path, show_id: Optional[str] = None) -> SourceVideo:
    video_dir = Path(video_dir)
    meta_path = video_dir / "meta.json"
    meta = json.loads(meta_path.read_text("utf-8")) if meta_path.exists() else {}
    frame_paths = sorted(video_dir.glob("*.png")) + sorted(video_dir.glob("*.jpg"))
    if not frame_paths:
        raise DecodeError(f"no frames in {video_dir}")
    with Image.open(frame_paths[0]) as im:
        width, height = im.size
    fps = Fraction(str(meta.get("fps", CLIP_FPS)))
    return SourceVideo(
        path=video_dir,
        show_id=show_id or meta.get("show_id", ""),
        frame_count=len(frame_paths),
        fps=fps,
        width=width,
        height=height,
    )


def crop_overlays(frames: np.ndarray, crop_fraction: float) -> np.ndarray:
    """Remove the bottom crop_fraction of every frame (subtitle/credit band)."""
    if not (0 <= crop_fraction < 0.5):
        raise CropTooLarge(f"crop fraction {crop_fraction} outside [0, 0.5)")
    if crop_fraction == 0:
        return frames
    height = frames.shape[1]
    new_height = int(height * (1 - crop_fraction))
    return frames[:, :new_height]


def _luma(frames: np.ndarray) -> np.ndarray:
    # Rec.601 weights, normalized to [0,1]
    f = frames.astype(np.float64)
    return (0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]) / 255.0


def detect_scene_cuts(frames: np.ndarray, threshold: float = DEFAULT_SCENE_THRESHOLD) -> list[SceneBoundary]:
    """Thresholded mean-luma frame differencing.

    A cut is declared between consecutive frames whose mean absolute
    per-pixel luma difference exceeds threshold. Boundaries tile
    [0, frame_count) with no gaps or overlaps.
    """
    if not (0 < threshold <= 1):
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    n = frames.shape[0]
    luma = _luma(frames)
    deltas = np.abs(np.diff(luma, axis=0)).mean(axis=(1, 2))
    cut_points = [0] + [i + 1 for i in range(n - 1) if deltas[i] > threshold] + [n]
    return [SceneBoundary(a, b) for a, b in zip(cut_points, cut_points[1:])]


def standardize_clip(frames: np.ndarray, src_fps: Fraction | float | int,
                     target_fps: int = CLIP_FPS) -> np.ndarray:
    """Nearest-frame resample to target_fps.

    Output frame i takes source index round(i * src_fps / target_fps),
    clamped; the output count preserves source duration.
    """
    src_fps = Fraction(str(src_fps)) if not isinstance(src_fps, Fraction) else src_fps
    if src_fps <= 0:
        raise ValueError("src_fps must be positive")
    n = frames.shape[0]
    if src_fps == target_fps:
        return frames
    n_out = int(np.floor(n * target_fps / float(src_fps) + 0.5))
    idx = np.floor(np.arange(n_out) * float(src_fps) / target_fps + 0.5).astype(int)
    idx = np.clip(idx, 0, n - 1)
    return frames[idx]


def make_clip_id(show_id: str, source_stem: str, scene_start: int, clip_index: int) -> str:
    # pure function of its inputs: re-running ingest yields identical ids
    return f"{show_id}-{source_stem}-s{scene_start:06d}-c{clip_index:02d}"


def cut_clips(video: SourceVideo, boundaries: list[SceneBoundary]) -> list[ClipRecord]:
    """Plan the 81-frame clips for a scene-segmented, 16 fps video.

    Each scene yields floor(len/81) consecutive non-overlapping clips from
    its start; remainder frames are discarded. The record's path is the
    clip directory that write_clip will populate.
    """
    records = []
    stem = Path(video.path).name
    for boundary in boundaries:
        n_clips = len(boundary) // CLIP_FRAMES
        for k in range(n_clips):
            clip_id = make_clip_id(video.show_id, stem, boundary.start_frame, k)
            records.append(
                ClipRecord(
                    clip_id=clip_id,
                    path="",
                    show_id=video.show_id,
                    frames=CLIP_FRAMES,
                    fps=CLIP_FPS,
                    width=video.width,
                    height=video.height,
                )
            )
    return records


def clip_frame_ranges(boundaries: list[SceneBoundary]) -> list[tuple[int, int]]:
    """Frame ranges [start, start+81) of the clips cut_clips plans, in order."""
    ranges = []
    for boundary in boundaries:
        n_clips = len(boundary) // CLIP_FRAMES
        for k in range(n_clips):
            start = boundary.start_frame + k * CLIP_FRAMES
            ranges.append((start, start + CLIP_FRAMES))
    return ranges


def write_clip(record: ClipRecord, frames: np.ndarray, out_root: str | Path) -> ClipRecord:
    """Write a clip directory: zero-padded frame images plus clip.json."""
    clip_dir = Path(out_root) / record.clip_id
    write_frames(frames, clip_dir)
    record.path = str(clip_dir)
    record.width = int(frames.shape[2])
    record.height = int(frames.shape[1])
    (clip_dir / "clip.json").write_text(
        json.dumps(record.to_json(), indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return record


def load_clip(clip_dir: str | Path) -> ClipRecord:
    data = json.loads((Path(clip_dir) / "clip.json").read_text("utf-8"))
    return ClipRecord.from_json(data)
