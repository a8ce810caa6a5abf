"""Dataset curation, cross-style augmentation, and evaluation toolkit
for multi-character text-to-video training."""

__version__ = "0.1.0"

from .captions import (
    SceneStyle,
    TagAblation,
    TaggedCaption,
    apply_ablation,
    mentioned_characters,
    parse_caption,
    render_caption,
    validate_caption,
)
from .registry import CharacterRegistry, default_registry, load_registry

__all__ = [
    "SceneStyle",
    "TagAblation",
    "TaggedCaption",
    "apply_ablation",
    "mentioned_characters",
    "parse_caption",
    "render_caption",
    "validate_caption",
    "CharacterRegistry",
    "default_registry",
    "load_registry",
]
