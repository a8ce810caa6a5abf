import random

import numpy as np
import pytest

from mimix.captions import (
    CaptionSegment,
    SceneStyle,
    TaggedCaption,
    make_caption,
)
from mimix.registry import default_registry

NAMES = ["Tom", "Jerry", "Mr Bean", "Ice Bear", "Panda", "Sheldon", "Grizzly"]
ACTIONS = [
    "chases a mouse", "hides under a cup", "naps on the couch",
    "paints a picture", "eats a sandwich", "reads a book", "juggles plates",
]


@pytest.fixture(scope="session")
def registry():
    return default_registry()


def random_caption(rng: random.Random, with_style: bool = None) -> TaggedCaption:
    """A fuzz-generated canonical caption: tag/action pairs, optional style."""
    segments = []
    for _ in range(rng.randint(1, 4)):
        segments.append(CaptionSegment.of_character(rng.choice(NAMES)))
        segments.append(CaptionSegment.of_text(f", {rng.choice(ACTIONS)}. "))
    if with_style is None:
        with_style = rng.random() < 0.5
    if with_style:
        segments.append(CaptionSegment.of_style(rng.choice(list(SceneStyle))))
    elif segments and segments[-1].kind.value == "text":
        # trim trailing space so render output is a parse fixed point
        text = segments[-1].text.rstrip()
        segments[-1] = CaptionSegment.of_text(text)
    return make_caption(segments)


def solid_frames(n: int, h: int, w: int, value) -> np.ndarray:
    """n frames of constant color; value is an int or an (r, g, b) triple."""
    frames = np.zeros((n, h, w, 3), dtype=np.uint8)
    frames[:] = value
    return frames
