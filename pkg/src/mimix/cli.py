"""Pipeline orchestrator: ingest, annotate, composite, assemble, evaluate, ablate, stats.

Stages run sequentially; items within a stage run on a bounded worker pool.
Primary outputs (manifests, configs, reports) are byte-identical across
re-runs with unchanged inputs and seeds. Exit codes: 0 success, 1 partial
failures with flags, 2 fatal.
"""
from __future__ import annotations

import json
import os
import sys
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import annotation, assembly, cca, evaluation, ingest
from .captions import TagAblation, apply_ablation, parse_caption, render_caption
from .clients import SIDECAR_ENV, SidecarProcessClient, StubSidecarClient
from .errors import (
    CaptionError,
    InsufficientSynthetic,
    MimixError,
    MissingUpstream,
    UnparseableCaption,
)
from .registry import CharacterRegistry, default_registry, load_registry

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2

CAPTION_ABLATIONS = {
    "none": TagAblation.NONE,
    "no-style": TagAblation.STRIP_SCENE_STYLE,
    "no-character": TagAblation.STRIP_CHARACTER,
    "both": TagAblation.STRIP_BOTH,
}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _registry_from(path: str | None) -> CharacterRegistry:
    return load_registry(path) if path else default_registry()


def _make_client(stub: bool, matte_root: str | None = None):
    if stub:
        return StubSidecarClient(matte_root=matte_root)
    return SidecarProcessClient(os.environ.get(SIDECAR_ENV))


def _write_stage_report(out_dir: Path, stage: str, counts: dict,
                        rejects: list[dict], started: float) -> None:
    # rejected/flagged items are always enumerated with reasons
    report = {
        "stage": stage,
        "counts": counts,
        "rejected": rejects,
        "duration_s": round(time.monotonic() - started, 3),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stage}_report.json").write_text(
        json.dumps(report, indent=2) + "\n", "utf-8"
    )


def _clip_to_entry(record: ingest.ClipRecord, style: str | None,
                   source: dict | None = None) -> assembly.ManifestEntry:
    return assembly.ManifestEntry(
        id=record.clip_id,
        path=record.path,
        show=record.show_id,
        characters=tuple(record.characters),
        caption=record.caption,
        style=style,
        provenance=record.provenance,
        frames=record.frames,
        fps=record.fps,
        width=record.width,
        height=record.height,
        source=source,
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML config file; CLI flags override its values.")
@click.pass_context
def main(ctx, config_path):
    """Dataset curation and evaluation toolkit for multi-character T2V training."""
    config = _load_config(config_path)
    ctx.default_map = config
    ctx.obj = config


@main.command("ingest")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--show", "show_id", default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--crop", "crop_fraction", default=ingest.DEFAULT_CROP_FRACTION, show_default=True)
@click.option("--scene-threshold", default=ingest.DEFAULT_SCENE_THRESHOLD, show_default=True)
@click.option("--jobs", default=None, type=int)
def ingest_cmd(in_dir, show_id, out_dir, crop_fraction, scene_threshold, jobs):
    """Standardize source videos into scene-segmented 81-frame clips."""
    started = time.monotonic()
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    video_dirs = sorted(d for d in in_dir.iterdir() if d.is_dir() and
                        (any(d.glob("*.png")) or any(d.glob("*.jpg"))))
    if not video_dirs:
        raise click.ClickException(f"no source videos under {in_dir}")

    def process(video_dir: Path) -> list[ingest.ClipRecord]:
        video = ingest.read_source_video(video_dir, show_id)
        frames = ingest.load_frames(video_dir)
        frames = ingest.crop_overlays(frames, crop_fraction)
        frames = ingest.standardize_clip(frames, video.fps)
        video = ingest.SourceVideo(
            path=video.path, show_id=video.show_id, frame_count=frames.shape[0],
            fps=video.fps, width=frames.shape[2], height=frames.shape[1],
        )
        boundaries = ingest.detect_scene_cuts(frames, scene_threshold)
        records = ingest.cut_clips(video, boundaries)
        ranges = ingest.clip_frame_ranges(boundaries)
        written = []
        for record, (a, b) in zip(records, ranges):
            clip_json = out_dir / record.clip_id / "clip.json"
            if clip_json.exists():  # done-marker: stage is resumable
                written.append(ingest.load_clip(clip_json.parent))
                continue
            written.append(ingest.write_clip(record, frames[a:b], out_dir))
        return written

    workers = jobs or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(process, video_dirs))
    records = sorted((r for batch in results for r in batch), key=lambda r: r.clip_id)
    _write_stage_report(out_dir, "ingest",
                        {"videos": len(video_dirs), "clips": len(records)}, [], started)
    click.echo(f"ingested {len(records)} clips from {len(video_dirs)} videos")


@main.command("annotate")
@click.option("--clips", "clips_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_manifest", required=True, type=click.Path())
@click.option("--registry", "registry_path", default=None, type=click.Path(exists=True))
@click.option("--stub", is_flag=True, default=False)
@click.option("--force", is_flag=True, default=False, help="Re-caption already annotated clips.")
@click.option("--jobs", default=4, show_default=True, type=int)
def annotate_cmd(clips_dir, out_manifest, registry_path, stub, force, jobs):
    """Caption every clip via the VLM client and emit a real-clip manifest."""
    started = time.monotonic()
    clips_dir = Path(clips_dir)
    registry = _registry_from(registry_path)
    client = _make_client(stub)
    templates = annotation.default_templates(registry)
    clip_dirs = sorted(d for d in clips_dir.iterdir() if (d / "clip.json").exists())
    if not clip_dirs:
        raise MissingUpstream(f"no ingested clips under {clips_dir}")
    flagged: list[dict] = []

    def process(clip_dir: Path):
        record = ingest.load_clip(clip_dir)
        if record.caption is not None and not force:
            return record, ()
        template = templates.get(record.show_id)
        if template is None:
            return record, (f"MissingTemplate({record.show_id})",)
        frame_paths = sorted(str(p) for p in clip_dir.glob("frame_*.png"))
        indices = annotation.sample_frames(len(frame_paths), annotation.DEFAULT_SAMPLE_COUNT)
        style = registry.show(record.show_id).style.value
        request = annotation.AnnotationRequest(
            clip_id=record.clip_id,
            frame_paths=tuple(frame_paths[i] for i in indices),
            transcript=annotation.read_transcript(clip_dir),
            source_metadata="cartoon" if style == "cartoon" else "TV series",
            template=template,
        )
        try:
            result = annotation.caption_clip(request, client, registry)
        except UnparseableCaption as exc:
            return record, (f"UnparseableCaption({exc})",)
        record.caption = render_caption(result.caption)
        record.characters = [
            registry.resolve_alias(n) or n for n in result.caption.character_tags
        ]
        # dedup, preserving first-mention order
        record.characters = list(dict.fromkeys(record.characters))
        (clip_dir / "clip.json").write_text(
            json.dumps(record.to_json(), indent=2, sort_keys=True) + "\n", "utf-8"
        )
        return record, result.flags

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(process, clip_dirs))

    entries = []
    for record, flags in sorted(results, key=lambda pair: pair[0].clip_id):
        style = registry.show(record.show_id).style.value if record.show_id else None
        entries.append(_clip_to_entry(record, style))
        for flag in flags:
            flagged.append({"id": record.clip_id, "reason": flag})
    manifest = assembly.DatasetManifest(entries=entries)
    assembly.emit_manifest(manifest, out_manifest)
    _write_stage_report(Path(out_manifest).parent, "annotate",
                        {"clips": len(entries), "flagged": len(flagged)}, flagged, started)
    click.echo(f"annotated {len(entries)} clips ({len(flagged)} flagged)")
    if any("UnparseableCaption" in f["reason"] for f in flagged):
        sys.exit(EXIT_PARTIAL)


@main.command("composite")
@click.option("--bg-manifest", required=True, type=click.Path(exists=True))
@click.option("--fg-manifest", required=True, type=click.Path(exists=True))
@click.option("--ratio-target", "target", required=True, type=int,
              help="Number of kept composites to aim for.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--registry", "registry_path", default=None, type=click.Path(exists=True))
@click.option("--stub", is_flag=True, default=False)
@click.option("--identity-threshold", default=cca.DEFAULT_IDENTITY_THRESHOLD, show_default=True)
def composite_cmd(bg_manifest, fg_manifest, target, seed, out_dir, registry_path,
                  stub, identity_threshold):
    """Composite foreground characters into opposite-style backgrounds."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    registry = _registry_from(registry_path)
    client = _make_client(stub, matte_root=str(out_dir / "mattes"))
    backgrounds = assembly.load_manifest(bg_manifest).entries
    foregrounds = [e for e in assembly.load_manifest(fg_manifest).entries if e.characters]
    if not backgrounds or not foregrounds:
        raise MissingUpstream("composite needs non-empty background and foreground manifests")

    # candidate (fg, character, bg) pairs under the opposite-domain constraint
    pairs = []
    for fg in foregrounds:
        for character in fg.characters:
            fg_style = registry.style_of(character).value
            for bg in backgrounds:
                if bg.id == fg.id:
                    continue
                bg_style = registry.show(bg.show).style.value
                if bg_style != fg_style:
                    pairs.append((fg, character, bg))
    pairs.sort(key=lambda p: (p[0].id, p[1], p[2].id))

    kept_entries = []
    rejects: list[dict] = []
    for index, (fg, character, bg) in enumerate(pairs):
        if len(kept_entries) >= target:
            break
        pair_seed = seed + index
        try:
            fg_record = ingest.load_clip(fg.path)
            bg_record = ingest.load_clip(bg.path)
            matte = cca.extract_matte(fg_record, character, client)
            spec = cca.plan_composite(bg_record, matte, registry, pair_seed)
            bg_frames = ingest.load_frames(bg.path)
            frames, placed = cca.composite_clip(spec, bg_frames, matte)
            clip_id = f"cmp-{bg.id}-{character.replace(' ', '_')}-{pair_seed}"
            record = ingest.ClipRecord(
                clip_id=clip_id, path="", show_id=bg.show,
                frames=spec.length, fps=ingest.CLIP_FPS,
                provenance="composited",
                characters=list(dict.fromkeys(list(bg.characters) + [character])),
            )
            comp = cca.CompositeRecord(clip=record, spec=spec)
            record.path = str(out_dir / "clips" / clip_id)
            ingest.write_frames(frames, record.path)
            verdict = cca.filter_composite(
                comp, frames, placed, registry, client, client,
                threshold=identity_threshold,
            )
            comp.filter_verdict = verdict
            if verdict != "kept":
                rejects.append({"id": clip_id, "reason": verdict})
                continue
            bg_caption = parse_caption(bg.caption or "")
            caption = cca.caption_composite(comp, bg_caption, registry)
            record.caption = render_caption(caption)
            record.frames = int(frames.shape[0])
            record.width = int(frames.shape[2])
            record.height = int(frames.shape[1])
            (Path(record.path) / "clip.json").write_text(
                json.dumps(record.to_json(), indent=2, sort_keys=True) + "\n", "utf-8"
            )
            style = registry.show(bg.show).style.value
            kept_entries.append(_clip_to_entry(
                record, style,
                source={"bg_clip": bg.id, "fg_clip": fg.id, "seed": pair_seed},
            ))
        except MimixError as exc:
            rejects.append({"id": f"{fg.id}/{character}->{bg.id}", "reason": type(exc).__name__})

    manifest = assembly.DatasetManifest(entries=sorted(kept_entries, key=lambda e: e.id))
    assembly.emit_manifest(manifest, out_dir / "synthetic_manifest.jsonl")
    _write_stage_report(out_dir, "composite",
                        {"candidates": len(pairs), "kept": len(kept_entries),
                         "rejected": len(rejects)}, rejects, started)
    click.echo(f"kept {len(kept_entries)} composites ({len(rejects)} rejected)")


@main.command("assemble")
@click.option("--real", "real_manifest", required=True, type=click.Path(exists=True))
@click.option("--synthetic", "synthetic_manifest", required=True, type=click.Path(exists=True))
@click.option("--ratio", default=0.10, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--stratify", is_flag=True, default=False)
@click.option("--out", "out_dir", required=True, type=click.Path())
def assemble_cmd(real_manifest, synthetic_manifest, ratio, seed, stratify, out_dir):
    """Mix real and synthetic manifests and emit the training config."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    real = assembly.load_manifest(real_manifest).entries
    synthetic = assembly.load_manifest(synthetic_manifest).entries
    policy = assembly.MixPolicy(ratio=ratio, seed=seed, stratify_by_show=stratify)
    try:
        mixed = assembly.mix_datasets(real, synthetic, policy)
    except InsufficientSynthetic as exc:
        raise click.ClickException(str(exc))
    assembly.emit_manifest(mixed, out_dir / "train_manifest.jsonl")
    assembly.emit_training_config(out_dir / "training_config.txt")
    _write_stage_report(out_dir, "assemble", mixed.counts, [], started)
    click.echo(f"assembled {len(mixed.entries)} entries "
               f"({mixed.counts['real']} real + {mixed.counts['synthetic']} synthetic)")


@main.command("ablate")
@click.option("--real", "real_manifest", default=None, type=click.Path(exists=True))
@click.option("--synthetic", "synthetic_manifest", default=None, type=click.Path(exists=True))
@click.option("--ratios", default=None, help="Comma-separated mix ratios, e.g. 0,0.05,0.10,0.20")
@click.option("--manifest", "caption_manifest", default=None, type=click.Path(exists=True))
@click.option("--captions", "caption_modes", default=None,
              help="Comma-separated caption variants: none,no-style,no-character,both")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def ablate_cmd(real_manifest, synthetic_manifest, ratios, caption_manifest,
               caption_modes, seed, out_dir):
    """Emit the ratio-sweep manifests and/or caption-variant manifests."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    counts: dict = {}
    if ratios:
        if not (real_manifest and synthetic_manifest):
            raise click.ClickException("--ratios needs --real and --synthetic")
        real = assembly.load_manifest(real_manifest).entries
        synthetic = assembly.load_manifest(synthetic_manifest).entries
        for ratio_str in ratios.split(","):
            ratio = float(ratio_str)
            policy = assembly.MixPolicy(ratio=ratio, seed=seed)
            try:
                mixed = assembly.mix_datasets(real, synthetic, policy)
            except InsufficientSynthetic as exc:
                raise click.ClickException(str(exc))
            tag = f"ratio_{ratio_str.strip()}"
            assembly.emit_manifest(mixed, out_dir / f"train_manifest_{tag}.jsonl")
            assembly.emit_training_config(out_dir / f"training_config_{tag}.txt")
            counts[tag] = mixed.counts
    if caption_modes:
        if not caption_manifest:
            raise click.ClickException("--captions needs --manifest")
        entries = assembly.load_manifest(caption_manifest).entries
        for mode_name in caption_modes.split(","):
            mode_name = mode_name.strip()
            mode = CAPTION_ABLATIONS.get(mode_name)
            if mode is None:
                raise click.ClickException(f"unknown caption variant {mode_name!r}")
            variant = []
            for e in entries:
                caption = e.caption
                if caption is not None:
                    try:
                        ablated = apply_ablation(parse_caption(caption), mode)
                        caption = render_caption(ablated)
                    except CaptionError:
                        pass  # keep the original caption, reported below
                variant.append(assembly.ManifestEntry(
                    id=e.id, path=e.path, show=e.show, characters=e.characters,
                    caption=caption, style=e.style, provenance=e.provenance,
                    frames=e.frames, fps=e.fps, width=e.width, height=e.height,
                    source=e.source,
                ))
            assembly.emit_manifest(
                assembly.DatasetManifest(entries=variant),
                out_dir / f"captions_{mode_name}.jsonl",
            )
            counts[f"captions_{mode_name}"] = {"entries": len(variant)}
    if not counts:
        raise click.ClickException("nothing to do: pass --ratios and/or --captions")
    _write_stage_report(out_dir, "ablate", counts, [], started)
    click.echo(f"wrote {len(counts)} ablation outputs to {out_dir}")


@main.command("benchmark")
@click.option("--registry", "registry_path", default=None, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def benchmark_cmd(registry_path, seed, out_path):
    """Build the 50+50 prompt benchmark suite."""
    registry = _registry_from(registry_path)
    suite = evaluation.build_benchmark(registry, seed)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    evaluation.save_suite(suite, out_path)
    click.echo(f"wrote {len(suite.single_prompts)} single + "
               f"{len(suite.multi_prompts)} multi prompts")


@main.command("evaluate")
@click.option("--videos", "videos_dir", required=True, type=click.Path(exists=True))
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--method", default="ours", show_default=True)
@click.option("--registry", "registry_path", default=None, type=click.Path(exists=True))
@click.option("--stub", is_flag=True, default=False)
@click.option("--dynamic-threshold", default=evaluation.DEFAULT_DYNAMIC_THRESHOLD, show_default=True)
def evaluate_cmd(videos_dir, suite_path, out_dir, method, registry_path, stub,
                 dynamic_threshold):
    """Score generated videos against the benchmark suite."""
    started = time.monotonic()
    videos_dir, out_dir = Path(videos_dir), Path(out_dir)
    registry = _registry_from(registry_path)
    client = _make_client(stub)
    suite = evaluation.load_suite(suite_path, registry)

    collected = {
        "single": evaluation.MethodScores(method=method, subject_mode="single"),
        "multiple": evaluation.MethodScores(method=method, subject_mode="multiple"),
    }
    flagged: list[dict] = []
    score_lines: list[str] = []
    scored = 0
    for entry in suite.all_entries():
        video_dir = videos_dir / entry.prompt_id
        if not video_dir.is_dir():
            continue
        mode = "single" if len(entry.characters) == 1 else "multiple"
        frame_paths = sorted(str(p) for p in video_dir.glob("frame_*.png"))
        if not frame_paths:
            flagged.append({"id": entry.prompt_id, "reason": "NoFrames"})
            continue
        try:
            scores = evaluation.score_video(
                entry.prompt_id, frame_paths, entry, registry, client,
            )
        except MimixError as exc:
            flagged.append({"id": entry.prompt_id, "reason": type(exc).__name__})
            continue
        bucket = collected[mode]
        bucket.metric_scores.extend(scores)
        score_lines.extend(s.to_json_line() for s in scores)

        flow = client.flow(str(video_dir))
        mean_flow = sum(flow) / len(flow) if flow else 0.0
        text_vec = client.embed_text(render_caption(entry.prompt))
        sampled = [frame_paths[i] for i in evaluation.sample_frames(len(frame_paths), 10)]
        sims = []
        for fp in sampled:
            frame_vec = client.embed_image(fp)
            dot = sum(a * b for a, b in zip(text_vec, frame_vec))
            sims.append(max(0.0, min(1.0, dot)))
        if len(flow) > 1:
            jitter = sum(abs(b - a) for a, b in zip(flow, flow[1:])) / (len(flow) - 1)
        else:
            jitter = 0.0
        quality = evaluation.parse_judge_response(client.vlm(
            "Rate the imaging quality of these frames (distortion, noise, blur). "
            "Answer with a single integer 1-10.", sampled)) / 10
        aesthetic = evaluation.parse_judge_response(client.vlm(
            "Rate the aesthetic value of these frames. "
            "Answer with a single integer 1-10.", sampled)) / 10
        proxies = bucket.proxy_values
        proxies.setdefault("consistency", []).append(sum(sims) / len(sims))
        proxies.setdefault("motion", []).append(max(0.0, 1.0 - jitter / 4.0))
        proxies.setdefault("dynamic", []).append(1.0 if mean_flow > dynamic_threshold else 0.0)
        proxies.setdefault("quality", []).append(quality)
        proxies.setdefault("aesthetic", []).append(aesthetic)
        scored += 1

    report = evaluation.aggregate_report(
        [ms for ms in collected.values() if ms.metric_scores]
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scores.jsonl").write_text("\n".join(score_lines) + ("\n" if score_lines else ""), "utf-8")
    (out_dir / "report.txt").write_text(evaluation.render_report(report) + "\n", "utf-8")
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, ensure_ascii=False) + "\n", "utf-8"
    )
    _write_stage_report(out_dir, "evaluate",
                        {"scored": scored, "flagged": len(flagged)}, flagged, started)
    click.echo(f"scored {scored} videos ({len(flagged)} flagged)")
    if flagged:
        sys.exit(EXIT_PARTIAL)


@main.command("stats")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
def stats_cmd(manifest_path, out_path):
    """Character distribution statistics for a manifest."""
    entries = assembly.load_manifest(manifest_path).entries
    stats = assembly.compute_stats(entries)
    table = assembly.render_stats(stats)
    if out_path:
        Path(out_path).write_text(table + "\n", "utf-8")
    click.echo(table)


def entrypoint():  # console script shim keeping exit-code semantics
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_FATAL)
    except MimixError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FATAL)


if __name__ == "__main__":
    entrypoint()
