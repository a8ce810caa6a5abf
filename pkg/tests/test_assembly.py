import random

import pytest

from mimix.assembly import (
    MANIFEST_HEADER,
    DatasetManifest,
    ManifestEntry,
    MixPolicy,
    TrainingConfig,
    compute_stats,
    emit_manifest,
    emit_training_config,
    load_manifest,
    load_training_config,
    mix_datasets,
    render_stats,
    synthetic_count,
)
from mimix.errors import InsufficientSynthetic


def make_entries(n, prefix="real", provenance="real", show="tom_and_jerry",
                 characters=("Tom",)):
    return [
        ManifestEntry(id=f"{prefix}-{i:04d}", path=f"{prefix}/{i}",
                      show=show, characters=tuple(characters),
                      provenance=provenance)
        for i in range(n)
    ]


class TestSyntheticCount:
    def test_exact_ratios(self):
        assert synthetic_count(0.0, 1000) == 0
        assert synthetic_count(0.05, 1000) == 50
        assert synthetic_count(0.10, 1000) == 100
        assert synthetic_count(0.20, 1000) == 200

    def test_half_rounds_to_even(self):
        assert synthetic_count(0.05, 30) == 2  # 1.5 -> 2
        assert synthetic_count(0.05, 50) == 2  # 2.5 -> 2

    def test_proportional(self):
        for real in (0, 17, 300, 24447):
            assert synthetic_count(0.2, real) == round(0.2 * real)


class TestMixDatasets:
    def test_counts_per_ratio(self):
        real = make_entries(1000)
        synth = make_entries(300, prefix="cmp", provenance="composited")
        for ratio, expected in [(0.0, 0), (0.05, 50), (0.10, 100), (0.20, 200)]:
            manifest = mix_datasets(real, synth, MixPolicy(ratio=ratio, seed=1))
            assert manifest.counts == {"real": 1000, "synthetic": expected}

    def test_all_real_entries_retained(self):
        real = make_entries(40)
        synth = make_entries(20, prefix="cmp", provenance="composited")
        manifest = mix_datasets(real, synth, MixPolicy(ratio=0.2, seed=0))
        kept = {e.id for e in manifest.entries if e.provenance == "real"}
        assert kept == {e.id for e in real}

    def test_insufficient_synthetic(self):
        real = make_entries(1000)
        synth = make_entries(150, prefix="cmp", provenance="composited")
        with pytest.raises(InsufficientSynthetic) as err:
            mix_datasets(real, synth, MixPolicy(ratio=0.2, seed=0))
        assert err.value.needed == 200
        assert err.value.available == 150

    def test_seed_determinism(self):
        real = make_entries(100)
        synth = make_entries(80, prefix="cmp", provenance="composited")
        a = mix_datasets(real, synth, MixPolicy(ratio=0.2, seed=9))
        b = mix_datasets(real, synth, MixPolicy(ratio=0.2, seed=9))
        c = mix_datasets(real, synth, MixPolicy(ratio=0.2, seed=10))
        assert [e.id for e in a.entries] == [e.id for e in b.entries]
        assert [e.id for e in a.entries] != [e.id for e in c.entries]

    def test_selection_independent_of_pool_order(self):
        real = make_entries(100)
        synth = make_entries(80, prefix="cmp", provenance="composited")
        shuffled = list(synth)
        random.Random(4).shuffle(shuffled)
        a = mix_datasets(real, synth, MixPolicy(ratio=0.2, seed=9))
        b = mix_datasets(real, shuffled, MixPolicy(ratio=0.2, seed=9))
        assert [e.id for e in a.entries] == [e.id for e in b.entries]

    def test_stratified_split_across_shows(self):
        real = make_entries(100)
        synth = (make_entries(60, prefix="cmp-a", provenance="composited",
                              show="tom_and_jerry")
                 + make_entries(60, prefix="cmp-b", provenance="composited",
                                show="mr_bean"))
        manifest = mix_datasets(real, synth,
                                MixPolicy(ratio=0.2, seed=0, stratify_by_show=True))
        chosen = [e for e in manifest.entries if e.provenance == "composited"]
        by_show = {s: sum(1 for e in chosen if e.show == s)
                   for s in ("tom_and_jerry", "mr_bean")}
        assert by_show == {"tom_and_jerry": 10, "mr_bean": 10}


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        entries = make_entries(5) + make_entries(
            2, prefix="cmp", provenance="composited",
            characters=("Mr Bean", "Tom"))
        manifest = DatasetManifest(entries=sorted(entries, key=lambda e: e.id))
        path = tmp_path / "train_manifest.jsonl"
        emit_manifest(manifest, path)
        loaded = load_manifest(path)
        assert loaded.entries == manifest.entries

    def test_header_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        emit_manifest(DatasetManifest(entries=[]), path)
        assert path.read_text().splitlines()[0] == MANIFEST_HEADER

    def test_byte_identical_rewrites(self, tmp_path):
        manifest = DatasetManifest(entries=make_entries(10))
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        emit_manifest(manifest, a)
        emit_manifest(manifest, b)
        assert a.read_bytes() == b.read_bytes()

    def test_source_field_survives(self, tmp_path):
        entry = ManifestEntry(id="cmp-1", path="p", show="mr_bean",
                              provenance="composited",
                              source={"bg_clip": "b", "fg_clip": "f", "seed": 3})
        path = tmp_path / "m.jsonl"
        emit_manifest(DatasetManifest(entries=[entry]), path)
        assert load_manifest(path).entries[0].source == {
            "bg_clip": "b", "fg_clip": "f", "seed": 3}


class TestTrainingConfig:
    def test_defaults(self):
        cfg = TrainingConfig()
        assert cfg.lora_rank == 32
        assert cfg.epochs == 5
        assert cfg.optimizer == "adam"
        assert cfg.learning_rate == 1e-4
        assert cfg.batch_size == 64
        assert cfg.gradient_clipping is True
        assert cfg.precision == "fp16"

    def test_emitted_file_exact(self, tmp_path):
        path = tmp_path / "training_config.txt"
        emit_training_config(path)
        assert path.read_text() == (
            "lora_rank=32\n"
            "epochs=5\n"
            "optimizer=adam\n"
            "learning_rate=0.0001\n"
            "batch_size=64\n"
            "gradient_clipping=true\n"
            "precision=fp16\n"
        )

    def test_round_trip_with_overrides(self, tmp_path):
        path = tmp_path / "cfg.txt"
        written = emit_training_config(path, lora_rank=16, gradient_clipping=False)
        assert load_training_config(path) == written


class TestStats:
    def test_percentages(self):
        entries = (make_entries(3, show="young_sheldon", characters=("Sheldon",))
                   + make_entries(1, prefix="other", show="young_sheldon",
                                  characters=("Missy",)))
        stats = compute_stats(entries)
        by_char = {s.character: s for s in stats.per_character}
        assert by_char["Sheldon"].count == 3
        assert by_char["Sheldon"].total == 4
        assert by_char["Sheldon"].percentage == 75.0
        assert by_char["Missy"].percentage == 25.0

    def test_one_decimal_rounding(self):
        # 16440 of 24447 is 67.2% to one decimal
        assert round(100 * 16440 / 24447, 1) == 67.2
        entries = (make_entries(16440, show="young_sheldon",
                                characters=("Sheldon",))
                   + make_entries(24447 - 16440, prefix="o",
                                  show="young_sheldon", characters=()))
        stats = compute_stats(entries)
        assert stats.per_character[0].percentage == 67.2

    def test_render_contains_rows(self):
        entries = make_entries(2, characters=("Tom", "Jerry"))
        text = render_stats(compute_stats(entries))
        assert "Tom" in text and "Jerry" in text and "100.0%" in text

    def test_multi_character_entries_count_once_per_character(self):
        entries = make_entries(4, characters=("Tom", "Jerry"))
        stats = compute_stats(entries)
        assert all(s.count == 4 and s.total == 4 for s in stats.per_character)
        assert stats.show_totals == {"tom_and_jerry": 4}
