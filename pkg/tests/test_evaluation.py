import json

import pytest

from mimix.captions import render_caption
from mimix.clients import ScriptedVlmClient
from mimix.errors import EmptyInput, NoScoreFound, ScoreOutOfRange
from mimix.evaluation import (
    InteractionCategory,
    JudgeRubric,
    MethodScores,
    Metric,
    MetricScore,
    SCENE_CHARACTER,
    aggregate_report,
    build_benchmark,
    build_judge_prompt,
    categorize,
    category_axes,
    compute_dynamic_degree,
    load_suite,
    parse_judge_response,
    render_report,
    save_suite,
    score_video,
)


class TestCategorize:
    def test_same_show(self, registry):
        assert categorize(["Tom", "Jerry"], registry) is InteractionCategory.INTRA_SERIES

    def test_mixed_styles(self, registry):
        assert categorize(["Tom", "Sheldon"], registry) is InteractionCategory.INTER_STYLE

    def test_cross_show_same_style(self, registry):
        assert categorize(["Tom", "Panda"], registry) is InteractionCategory.INTER_SERIES

    def test_axes_consistency(self, registry):
        # intra_series implies intra_style; inter_style implies inter_series
        groups = [["Tom", "Jerry"], ["Tom", "Sheldon"], ["Tom", "Panda"],
                  ["Mr Bean", "Penny"], ["Tom", "Jerry", "Ice Bear"]]
        for group in groups:
            style_axis, series_axis = category_axes(group, registry)
            primary = categorize(group, registry)
            if primary is InteractionCategory.INTRA_SERIES:
                assert (style_axis, series_axis) == ("intra_style", "intra_series")
            if style_axis == "inter_style":
                assert series_axis == "inter_series"


class TestBuildBenchmark:
    def test_prompt_counts(self, registry):
        suite = build_benchmark(registry, seed=0)
        assert len(suite.single_prompts) == 50
        assert len(suite.multi_prompts) == 50

    def test_five_singles_per_eval_character(self, registry):
        suite = build_benchmark(registry, seed=0)
        counts = {}
        for entry in suite.single_prompts:
            assert len(entry.characters) == 1
            counts[entry.characters[0]] = counts.get(entry.characters[0], 0) + 1
        assert set(counts.values()) == {5}
        assert len(counts) == 10

    def test_multi_group_sizes(self, registry):
        suite = build_benchmark(registry, seed=0)
        for entry in suite.multi_prompts:
            assert len(entry.characters) in (2, 3)
            assert len(set(entry.characters)) == len(entry.characters)
            assert entry.category is not None

    def test_seed_determinism(self, registry):
        a = build_benchmark(registry, seed=3).to_json()
        b = build_benchmark(registry, seed=3).to_json()
        c = build_benchmark(registry, seed=4).to_json()
        assert a == b
        assert a != c

    def test_prompts_parse_canonically(self, registry):
        from mimix.captions import parse_caption
        suite = build_benchmark(registry, seed=1)
        for entry in suite.all_entries():
            rendered = render_caption(entry.prompt)
            assert parse_caption(rendered) == entry.prompt
            assert entry.prompt.style is not None

    def test_save_load_round_trip(self, registry, tmp_path):
        suite = build_benchmark(registry, seed=2)
        path = tmp_path / "suite.json"
        save_suite(suite, path)
        loaded = load_suite(path, registry)
        assert loaded.to_json() == suite.to_json()


class TestJudgePrompt:
    def test_ends_with_integer_instruction(self, registry):
        rubric = JudgeRubric.for_metric(Metric.IDENTITY_P)
        prompt = build_judge_prompt(["f0.png"], rubric, registry.character("Tom"))
        assert prompt.endswith("Answer with a single integer 1-10.")
        assert "Tom" in prompt

    def test_interaction_prompt_has_no_character_block(self, registry):
        rubric = JudgeRubric.for_metric(Metric.INTERACTION_P)
        prompt = build_judge_prompt(["f0.png"], rubric, registry.character("Tom"))
        assert "Character under evaluation" not in prompt


class TestParseJudgeResponse:
    def test_bare_integer(self):
        assert parse_judge_response("7") == 7

    def test_first_number_in_prose(self):
        assert parse_judge_response("I would rate this 8 out of 10.") == 8

    def test_fractional_floors(self):
        assert parse_judge_response("8.7") == 8

    def test_no_number(self):
        with pytest.raises(NoScoreFound):
            parse_judge_response("excellent work")

    def test_out_of_range(self):
        with pytest.raises(ScoreOutOfRange):
            parse_judge_response("42")

    def test_score_dataclass_rejects_out_of_range(self):
        with pytest.raises(ScoreOutOfRange):
            MetricScore(video_id="v", metric=Metric.IDENTITY_P,
                        character="Tom", score=0)


class TestDynamicDegree:
    def test_all_above(self):
        assert compute_dynamic_degree([1.5, 2.0, 3.0]) == 1.0

    def test_half(self):
        assert compute_dynamic_degree([0.5, 2.0]) == 0.5

    def test_at_threshold_not_counted(self):
        assert compute_dynamic_degree([1.0]) == 0.0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            compute_dynamic_degree([])

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            compute_dynamic_degree([1.0], threshold=0)


class TestScoreVideo:
    def test_score_count_single(self, registry):
        suite = build_benchmark(registry, seed=0)
        entry = suite.single_prompts[0]
        client = ScriptedVlmClient(["7"])
        scores = score_video("v0", [f"f{i}.png" for i in range(81)], entry,
                             registry, client)
        assert len(scores) == 4  # 3 per character + 1 interaction
        assert scores[-1].character == SCENE_CHARACTER

    def test_score_count_pair(self, registry):
        entry = next(e for e in build_benchmark(registry, seed=0).multi_prompts
                     if len(e.characters) == 2)
        client = ScriptedVlmClient(["9"])
        scores = score_video("v1", [f"f{i}.png" for i in range(81)], entry,
                             registry, client)
        assert len(scores) == 7

    def test_parse_failure_retried_once(self, registry):
        entry = build_benchmark(registry, seed=0).single_prompts[0]
        client = ScriptedVlmClient(["no idea", "6", "6", "6", "6"])
        scores = score_video("v2", [f"f{i}.png" for i in range(81)], entry,
                             registry, client)
        assert all(s.score == 6 for s in scores)

    def test_double_failure_propagates(self, registry):
        entry = build_benchmark(registry, seed=0).single_prompts[0]
        client = ScriptedVlmClient(["nope", "still nope"])
        with pytest.raises(NoScoreFound):
            score_video("v3", [f"f{i}.png" for i in range(81)], entry,
                        registry, client)


def scores_with_mean(metric, mean, n=100):
    # integer scores averaging exactly to `mean` over n samples
    total = round(mean * n)
    base = total // n
    extra = total - base * n
    values = [base] * (n - extra) + [base + 1] * extra
    return [MetricScore(video_id=f"v{i}", metric=metric, character="Tom",
                        score=v) for i, v in enumerate(values)]


class TestAggregateReport:
    def test_means_and_rounding(self):
        ms = MethodScores(method="ours", subject_mode="single")
        for metric, mean in [(Metric.IDENTITY_P, 6.12), (Metric.MOTION_P, 5.41),
                             (Metric.STYLE_P, 8.06), (Metric.INTERACTION_P, 7.24)]:
            ms.metric_scores.extend(scores_with_mean(metric, mean))
        ms.proxy_values["dynamic"] = [1.0, 1.0, 1.0]
        report = aggregate_report([ms])
        cells = report.rows[0].cells
        assert cells["identity_p"] == 6.12
        assert cells["motion_p"] == 5.41
        assert cells["style_p"] == 8.06
        assert cells["interaction_p"] == 7.24
        assert cells["dynamic"] == 1.0

    def test_empty_cells_render_em_dash(self):
        ms = MethodScores(method="baseline", subject_mode="multiple")
        ms.proxy_values["quality"] = [0.5]
        text = render_report(aggregate_report([ms]))
        assert "—" in text
        assert "0.5000" in text

    def test_proxy_four_decimals(self):
        ms = MethodScores(method="m", subject_mode="single")
        ms.proxy_values["consistency"] = [0.123456, 0.2]
        cells = aggregate_report([ms]).rows[0].cells
        assert cells["consistency"] == round((0.123456 + 0.2) / 2, 4)

    def test_report_json_round_trips(self):
        ms = MethodScores(method="m", subject_mode="single")
        ms.metric_scores = scores_with_mean(Metric.IDENTITY_P, 7.5, n=10)
        report = aggregate_report([ms])
        data = json.loads(json.dumps(report.to_json()))
        assert data["rows"][0]["cells"]["identity_p"] == 7.5
