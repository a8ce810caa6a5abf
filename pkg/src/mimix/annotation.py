"""Captioning: show-specific VLM prompts, frame sampling, and response parsing."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .captions import TaggedCaption, parse_caption, validate_caption
from .errors import CaptionError, MissingTemplate, UnparseableCaption
from .ingest import ClipRecord
from .registry import CharacterRegistry

DEFAULT_SAMPLE_COUNT = 10

_MR_BEAN_INSTRUCTIONS = """\
The video is from the comedy series Mr. Bean.

If multiple people appear, please refer to him as 'Mr. Bean' and make it clear who he is.

Do not use vague terms like 'a man' or 'someone' - always specify Mr. Bean for the main subject.

Do not mention the title or say 'this video is from Mr. Bean'.

Avoid phrases like 'seems to', 'suggests', 'may', or 'appears'."""

_TOM_AND_JERRY_INSTRUCTIONS = """\
This video clip is from the classic cartoon Tom and Jerry.

The main characters are:

- Tom: a gray cat who usually chases Jerry

- Jerry: a small brown mouse who outsmarts Tom

- Spike: a gray dog who is Tom's enemy

- Tuffy: a small white mouse who is Jerry's friend

- Quacker: a yellow duck who is Tom's rival

Always refer to them by their names 'Tom', 'Jerry', 'Spike', 'Tuffy', 'Quacker'.

Do not use vague terms like 'a cat', 'a mouse', or 'someone'.

Make it clear who is doing what in the video.

Do not mention the show's title or say 'this video is from Tom and Jerry'.

Avoid phrases like 'seems to', 'suggests', 'may', or 'appears'."""

_WE_BARE_BEARS_INSTRUCTIONS = """\
This video clip is from the cartoon We Bare Bears, which features three main characters:

- Grizzly (or Grizz): a brown bear who is outgoing and energetic

- Panda: a black-and-white panda bear who is shy and loves technology

- Ice Bear: a white polar bear who speaks in third person and is very calm and skilled

If multiple bears appear in the video, always refer to them by their character names:

'Grizzly', 'Panda', or 'Ice Bear'. Do not use vague terms like 'a bear', 'a white bear', or 'someone'.

Make it clear who is doing what in the video. Your job is to describe what happens in the video clip in a clear and detailed way using these character identities.

Do not mention the show's title or say 'this video is from We Bare Bears'.

Avoid phrases like 'seems to', 'suggests', 'may', or 'indicating'."""

_YOUNG_SHELDON_INSTRUCTIONS = """\
This video clip is from the comedy series Young Sheldon, which features three main characters:

- Sheldon: a young boy who is very smart and has a unique way of thinking

- Penny: a girl who is Sheldon's best friend and has a crush on him

- Leonard: a boy who is Sheldon's best friend and has a crush on Penny

- Mary Cooper: a woman who is Sheldon's mother

- George Cooper: a man who is Sheldon's father

- Georgie: a boy who is Sheldon's younger brother

- Missy: a girl who is Sheldon's younger sister

If multiple people appear, please refer to them as 'Sheldon', 'Penny', or 'Leonard'. Do not use vague terms like 'a boy', 'a girl', or 'someone'.

Make it clear who is doing what in the video. Your job is to describe what happens in the video clip in a clear and detailed way using these character identities."""

_OUTPUT_FORMAT_INSTRUCTIONS = """\
Write one sentence per character action, in exactly this format:
[character:<name>], <action>.
End the caption with exactly one scene style tag: [scene-style:cartoon] or [scene-style:realistic]."""

_CORRECTION_INSTRUCTIONS = """\
Your previous caption did not follow the required format or used names outside the character list. \
Rewrite it using only the listed character names inside [character:<name>] tags."""


@dataclass(frozen=True)
class ShowPromptTemplate:
    show_id: str
    instruction_text: str
    roster_lines: tuple[str, ...] = ()


def default_templates(registry: CharacterRegistry) -> dict[str, ShowPromptTemplate]:
    """The built-in captioning templates for the four seed shows.

    Roster lines come from the registry so the prompts always carry an
    explicit name list, even for single-protagonist shows.
    """
    instructions = {
        "mr_bean": _MR_BEAN_INSTRUCTIONS,
        "tom_and_jerry": _TOM_AND_JERRY_INSTRUCTIONS,
        "we_bare_bears": _WE_BARE_BEARS_INSTRUCTIONS,
        "young_sheldon": _YOUNG_SHELDON_INSTRUCTIONS,
    }
    templates = {}
    for show_id, text in instructions.items():
        try:
            show = registry.show(show_id)
        except Exception:
            continue
        roster = tuple(
            f"- {name}: {registry.character(name).description}"
            for name in show.characters
        )
        templates[show_id] = ShowPromptTemplate(show_id, text, roster)
    return templates


@dataclass(frozen=True)
class AnnotationRequest:
    clip_id: str
    frame_paths: tuple[str, ...]
    transcript: str
    source_metadata: str  # "cartoon" | "TV series"
    template: ShowPromptTemplate
    plot_summary: str = ""


@dataclass(frozen=True)
class AnnotatedCaption:
    caption: TaggedCaption
    flags: tuple[str, ...] = ()


def sample_frames(clip: ClipRecord | int, k: int = DEFAULT_SAMPLE_COUNT) -> list[int]:
    """Uniformly spaced frame indices over a clip, endpoints included.

    Accepts a ClipRecord or a raw frame count. Indices are strictly
    increasing; shorter clips yield every frame.
    """
    total = clip if isinstance(clip, int) else clip.frames
    if k < 1:
        raise ValueError("k must be >= 1")
    if total <= 0:
        return []
    if k == 1 or total == 1:
        return [0]
    raw = (int(i * (total - 1) / (k - 1) + 0.5) for i in range(k))
    out: list[int] = []
    for idx in raw:
        if not out or idx > out[-1]:
            out.append(idx)
    return out


def build_caption_prompt(request: AnnotationRequest) -> str:
    """Assemble the deterministic captioning prompt for one clip."""
    if request.template is None:
        raise MissingTemplate(request.clip_id)
    parts = [request.template.instruction_text]
    if request.template.roster_lines:
        parts.append("Characters:\n" + "\n".join(request.template.roster_lines))
    parts.append(f"Source: {request.source_metadata}")
    transcript = request.transcript.strip()
    parts.append("Transcript:\n" + (transcript if transcript else "(no dialogue)"))
    if request.plot_summary.strip():
        parts.append("Plot summary:\n" + request.plot_summary.strip())
    parts.append(_OUTPUT_FORMAT_INSTRUCTIONS)
    return "\n\n".join(parts)


def caption_clip(request: AnnotationRequest, client,
                 registry: CharacterRegistry) -> AnnotatedCaption:
    """Caption one clip via the VLM client, with one corrective retry.

    Captions failing parse or registry validation are retried once with an
    appended correction instruction; persistent parse failures raise
    UnparseableCaption, persistent validation issues are flagged so the
    batch never stalls on a bad caption.
    """
    prompt = build_caption_prompt(request)
    frame_paths = list(request.frame_paths)

    def attempt(p: str):
        text = client.vlm(p, frame_paths)
        caption = parse_caption(text)
        return caption, validate_caption(caption, registry)

    parse_failure = None
    caption = report = None
    try:
        caption, report = attempt(prompt)
    except CaptionError as exc:
        parse_failure = exc
    if parse_failure is not None or not report.valid:
        retry_prompt = prompt + "\n\n" + _CORRECTION_INSTRUCTIONS
        try:
            caption, report = attempt(retry_prompt)
        except CaptionError as exc:
            raise UnparseableCaption(f"{request.clip_id}: {exc}") from exc

    flags = tuple(str(issue) for issue in report.issues)
    if not caption.character_tags:
        flags = flags + ("NoCharacterTags",)
    return AnnotatedCaption(caption, flags)


def read_transcript(source_video_dir: str | Path) -> str:
    """Transcript text stored as <source stem>.txt next to the source video."""
    source_video_dir = Path(source_video_dir)
    candidate = source_video_dir.parent / f"{source_video_dir.name}.txt"
    if candidate.exists():
        return candidate.read_text("utf-8")
    return ""
