"""Model client boundary: a deterministic native stub and a sidecar client.

All model-bound operations (segmentation, embeddings, optical flow, VLM
calls) go through one client interface:

    segment(clip_dir, character) -> matte_dir
    embed_image(path) -> list[float]
    embed_text(text) -> list[float]
    flow(clip_dir) -> list[float]       # per-frame-pair mean magnitudes
    vlm(prompt, frame_paths) -> str
    health() -> dict

StubSidecarClient computes every result as a pure function of a stable hash
of the request parameters, so pipelines run model-free and byte-identically.
SidecarProcessClient speaks the same operations over newline-delimited JSON
to an external sidecar process.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import subprocess
import threading
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ClientError

EMBED_DIM = 64
SIDECAR_ENV = "MIMIX_SIDECAR"


def _param_hash(op: str, params: dict) -> int:
    payload = json.dumps({"op": op, "params": params}, sort_keys=True).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


_ROSTER_LINE_RE = re.compile(r"^- ([^:\n]+):", re.MULTILINE)


class StubSidecarClient:
    """Deterministic, model-free stand-in for every model operation."""

    def __init__(self, matte_root: str | Path | None = None):
        self._matte_root = Path(matte_root) if matte_root else None
        self._tmp = None

    def _matte_dir_for(self, clip_dir: str, character: str) -> Path:
        if self._matte_root is None:
            import tempfile

            self._tmp = self._tmp or tempfile.TemporaryDirectory(prefix="mimix-matte-")
            self._matte_root = Path(self._tmp.name)
        safe = character.replace(" ", "_")
        return self._matte_root / f"{Path(clip_dir).name}__{safe}"

    def health(self) -> dict:
        return {"mode": "stub"}

    def segment(self, clip_dir: str, character: str) -> str:
        """Write a deterministic moving-square matte parallel to the clip frames."""
        frame_paths = sorted(Path(clip_dir).glob("frame_*.png"))
        if not frame_paths:
            raise ClientError(f"no frames in {clip_dir}")
        with Image.open(frame_paths[0]) as im:
            width, height = im.size
        out_dir = self._matte_dir_for(clip_dir, character)
        out_dir.mkdir(parents=True, exist_ok=True)
        side = max(4, min(width, height) // 4)
        span_x = max(1, width - side)
        span_y = max(1, height - side)
        for t in range(len(frame_paths)):
            alpha = np.zeros((height, width), dtype=np.uint8)
            x = (t * 2) % span_x
            y = (t * 2) % span_y
            alpha[y:y + side, x:x + side] = 255
            Image.fromarray(alpha, mode="L").save(out_dir / f"frame_{t:05d}.png")
        return str(out_dir)

    def _unit_vector(self, op: str, params: dict) -> list[float]:
        rng = np.random.default_rng(_param_hash(op, params))
        vec = rng.standard_normal(EMBED_DIM)
        vec /= np.linalg.norm(vec)
        return vec.tolist()

    def embed_image(self, path: str) -> list[float]:
        return self._unit_vector("embed_image", {"path": str(path)})

    def embed_text(self, text: str) -> list[float]:
        return self._unit_vector("embed_text", {"text": text})

    def flow(self, clip_dir: str) -> list[float]:
        n = len(sorted(Path(clip_dir).glob("frame_*.png")))
        pairs = max(1, n - 1)
        rng = np.random.default_rng(_param_hash("flow", {"clip_dir": Path(clip_dir).name}))
        return rng.uniform(0.0, 4.0, pairs).tolist()

    def vlm(self, prompt: str, frame_paths: list[str]) -> str:
        if "answer with a single integer" in prompt.lower():
            return "7"
        if "answer yes or no" in prompt.lower():
            return "yes"
        if "[character:" in prompt:
            # captioning request: echo a minimal canonical caption built from
            # the prompt's roster block and source line
            match = _ROSTER_LINE_RE.search(prompt)
            name = match.group(1).strip() if match else "someone"
            style = "cartoon" if "Source: cartoon" in prompt else "realistic"
            return f"[character:{name}], moves through the scene. [scene-style:{style}]"
        return "ok"


class ScriptedVlmClient:
    """Test helper: replays a fixed sequence of VLM responses."""

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self.prompts: list[str] = []

    def vlm(self, prompt: str, frame_paths: list[str]) -> str:
        self.prompts.append(prompt)
        if not self._responses:
            raise ClientError("scripted client exhausted")
        if len(self._responses) == 1:
            return self._responses[0]
        return self._responses.pop(0)


class SidecarProcessClient:
    """Line-delimited JSON client for an external sidecar process.

    The sidecar is either spawned as a child (command string) or taken from
    the MIMIX_SIDECAR environment variable. Requests carry monotonically
    increasing ids; responses may arrive out of order.
    """

    def __init__(self, command: str | None = None):
        command = command or os.environ.get(SIDECAR_ENV)
        if not command:
            raise ClientError("no sidecar command configured")
        self._proc = subprocess.Popen(
            command, shell=True, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1,
        )
        self._lock = threading.Lock()
        self._next_id = 0
        self._pending: dict[int, threading.Event] = {}
        self._results: dict[int, dict] = {}
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                continue
            rid = msg.get("id")
            with self._lock:
                self._results[rid] = msg
                event = self._pending.get(rid)
            if event is not None:
                event.set()

    def _call(self, op: str, params: dict, timeout: float = 60.0) -> dict:
        if self._proc.poll() is not None:
            raise ClientError("sidecar process exited")
        event = threading.Event()
        with self._lock:
            rid = self._next_id
            self._next_id += 1
            self._pending[rid] = event
        request = json.dumps({"id": rid, "op": op, "params": params})
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ClientError(f"sidecar write failed: {exc}") from exc
        if not event.wait(timeout):
            raise ClientError(f"sidecar timed out on op {op!r}")
        with self._lock:
            msg = self._results.pop(rid)
            del self._pending[rid]
        if not msg.get("ok"):
            err = msg.get("error", {})
            raise ClientError(f"{err.get('code', 'error')}: {err.get('message', '')}")
        return msg.get("result", {})

    def health(self) -> dict:
        return self._call("health", {})

    def segment(self, clip_dir: str, character: str) -> str:
        result = self._call("segment", {"clip_dir": str(clip_dir), "character": character})
        return result["matte_dir"]

    def embed_image(self, path: str) -> list[float]:
        return self._call("embed_image", {"path": str(path)})["vector"]

    def embed_text(self, text: str) -> list[float]:
        return self._call("embed_text", {"text": text})["vector"]

    def flow(self, clip_dir: str) -> list[float]:
        return self._call("flow", {"clip_dir": str(clip_dir)})["mean_magnitudes"]

    def vlm(self, prompt: str, frame_paths: list[str]) -> str:
        return self._call("vlm", {"prompt": prompt, "frame_paths": list(frame_paths)})["text"]

    def close(self):
        if self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
