from __future__ import annotations

import time

import pytest

from farmsense.evalharness import (
    DIMENSIONS,
    TIERS,
    Answerer,
    BenchmarkItem,
    ConstantJudge,
    EmptyAnswer,
    JudgeUnavailable,
    ShapeError,
    ci_half_width,
    default_jury,
    generate_benchmark,
    grounding_suite,
    load_benchmark,
    measure_latency,
    render_grounding_csv,
    render_jury_csv,
    render_jury_table,
    render_latency_csv,
    run_suite,
    score_faithfulness,
    score_relevance,
    write_benchmark,
)


@pytest.fixture(scope="module")
def items() -> list[BenchmarkItem]:
    return load_benchmark()


@pytest.fixture(scope="module")
def answerer() -> Answerer:
    return Answerer()


def simple_item(item_id="maize-easy-01", tier="easy", facets=("maize", "moisture")) -> BenchmarkItem:
    return BenchmarkItem(
        id=item_id,
        crop="maize",
        tier=tier,
        query="What is the soil moisture?",
        sensor_context={"readings": [], "forecast": None},
        expected_facets=tuple(facets),
    )


class TestLoadBenchmark:
    def test_shipped_fixture_has_99_items(self, items):
        assert len(items) == 99
        per_cell = {}
        for item in items:
            per_cell[(item.crop, item.tier)] = per_cell.get((item.crop, item.tier), 0) + 1
        assert set(per_cell.values()) == {11}
        assert len(per_cell) == 9

    def test_98_items_rejected(self, tmp_path, items):
        path = tmp_path / "bench.ndjson"
        write_benchmark(items[:-1], path)
        with pytest.raises(ShapeError):
            load_benchmark(path)

    def test_duplicate_id_rejected(self, tmp_path, items):
        bad = items[:-1] + [items[0]]
        path = tmp_path / "bench.ndjson"
        write_benchmark(bad, path)
        with pytest.raises(ShapeError):
            load_benchmark(path)

    def test_generator_is_deterministic(self):
        first = [i.to_record() for i in generate_benchmark()]
        second = [i.to_record() for i in generate_benchmark()]
        assert first == second


class MiniAnswer:
    def __init__(self, text):
        self.text = text


def static_answer_fn(text="the moisture is 48 percent for maize"):
    return lambda item: MiniAnswer(text)


class TestRunSuite:
    def test_constant_judge_gives_flat_90_and_zero_ci(self, items):
        report = run_suite(static_answer_fn(), items, [ConstantJudge(90.0)], runs=3)
        for tier in TIERS:
            for dim in DIMENSIONS:
                stats = report.cells[(tier, dim)]
                assert stats.mean == 90.0
                assert stats.ci_half_width == 0.0

    def test_run_means_80_90_100_give_t_interval(self, items):
        class RunVaryingJudge:
            name = "varying"

            def __init__(self):
                self.calls = 0
                self.per_run = [80.0, 90.0, 100.0]
                self.items_per_run = len(items)

            def score(self, item, answer):
                run = min(self.calls // self.items_per_run, 2)
                self.calls += 1
                return {dim: self.per_run[run] for dim in DIMENSIONS}

        report = run_suite(static_answer_fn(), items, [RunVaryingJudge()], runs=3)
        stats = report.cells[("easy", "correctness")]
        assert stats.run_means == [80.0, 90.0, 100.0]
        assert stats.mean == pytest.approx(90.0)
        assert stats.ci_half_width == pytest.approx(24.84, abs=0.01)

    def test_ci_helper_matches_t_oracle(self):
        # t(0.975, df=2) = 4.302653; sd = 10; hw = t * 10 / sqrt(3)
        assert ci_half_width([80.0, 90.0, 100.0]) == pytest.approx(24.8414, abs=1e-3)
        assert ci_half_width([90.0, 90.0, 90.0]) == 0.0
        assert ci_half_width([42.0]) == 0.0

    def test_record_count_four_judges_three_runs(self, items):
        report = run_suite(static_answer_fn(), items, default_jury(), runs=3)
        assert report.records_per_dimension() == 99 * 4 * 3

    def test_judge_unavailable_marks_skipped(self, items):
        class FlakyJudge:
            name = "flaky"

            def score(self, item, answer):
                if item.id.endswith("-01"):
                    raise JudgeUnavailable("offline")
                return {dim: 70.0 for dim in DIMENSIONS}

        report = run_suite(static_answer_fn(), items[:22], [FlakyJudge()], runs=1)
        assert len(report.skipped) == 2  # easy-01 and medium-01 in the slice
        assert all(name == "flaky" for _, name, _, _ in report.skipped)

    def test_full_suite_deterministic_under_mock(self, items, answerer):
        subset = items[:9]
        first = run_suite(answerer, subset, default_jury(), runs=2)
        second = run_suite(answerer, subset, default_jury(), runs=2)
        assert render_jury_csv(first) == render_jury_csv(second)


class TestFaithfulness:
    CONTEXTS = [
        "Latest moisture: 30 %RH (reading n1:7).",
        "Rain expected over the next 5 day(s): 0 mm total.",
    ]

    def test_verbatim_copy_scores_one(self):
        answer = " ".join(self.CONTEXTS)
        assert score_faithfulness(answer, self.CONTEXTS) == 1.0

    def test_zero_overlap_scores_zero(self):
        assert score_faithfulness("plant bananas under moonlight.", self.CONTEXTS) == 0.0

    def test_two_of_three_claims_supported(self):
        answer = (
            "Latest moisture reading is 30 %RH. "
            "Rain expected over the next 5 day(s) totals 0 mm. "
            "Mercury is in retrograde so delay sowing."
        )
        assert score_faithfulness(answer, self.CONTEXTS) == pytest.approx(2 / 3)

    def test_concatenation_of_contexts_is_always_one(self, items, answerer):
        # newline concatenation keeps claim units within one context
        answer = answerer(items[12])
        contexts = answer.context_texts()
        assert contexts
        assert score_faithfulness("\n".join(contexts), contexts) == 1.0

    def test_empty_answer_rejected(self):
        with pytest.raises(EmptyAnswer):
            score_faithfulness("   ", self.CONTEXTS)


class TestRelevance:
    def test_on_topic_answer_scores_high(self):
        score = score_relevance(
            "soil moisture is at 30 percent; irrigate tomorrow", "what is my soil moisture?"
        )
        assert score == 1.0

    def test_off_topic_answer_scores_low(self):
        assert score_relevance("sell your sugarcane next week", "what is my soil moisture?") < 0.5

    def test_monotone_in_overlap(self):
        query = "soil moisture irrigation cotton forecast"
        answers = [
            "nothing relevant here",
            "soil conditions look fine",
            "soil moisture is low",
            "soil moisture low; irrigation needed for cotton per forecast",
        ]
        scores = [score_relevance(a, query) for a in answers]
        assert scores == sorted(scores)


class TestLatency:
    def test_reports_percentiles_in_ms(self, items, answerer):
        report = measure_latency(answerer, items[:10])
        assert report.count == 10
        assert set(report.percentiles) == {50, 95, 99}
        assert report.percentiles[50] <= report.percentiles[99]
        assert report.mean_ms > 0

    def test_injected_stage_delay_shows_in_p50(self, items):
        slow = Answerer(stage_delay_s=0.05)
        report = measure_latency(slow, items[:5])
        assert report.percentiles[50] >= 50.0

    def test_empty_items_rejected(self, answerer):
        with pytest.raises(ValueError):
            measure_latency(answerer, [])


class TestRenderReport:
    def test_csv_has_tier_times_dimension_rows(self, items):
        report = run_suite(static_answer_fn(), items, [ConstantJudge(90.0)], runs=1)
        csv = render_jury_csv(report)
        lines = csv.strip().splitlines()
        assert len(lines) == 1 + len(TIERS) * len(DIMENSIONS)

    def test_tier_ordering_easy_medium_hard(self, items):
        report = run_suite(static_answer_fn(), items, [ConstantJudge(90.0)], runs=1)
        rows = render_jury_csv(report).strip().splitlines()[1:]
        tiers_seen = [row.split(",")[0] for row in rows[:: len(DIMENSIONS)]]
        assert tiers_seen == ["easy", "medium", "hard"]

    def test_byte_identical_for_identical_inputs(self, items):
        report = run_suite(static_answer_fn(), items, [ConstantJudge(88.5)], runs=2)
        assert render_jury_csv(report) == render_jury_csv(report)
        assert render_jury_table(report) == render_jury_table(report)

    def test_grounding_csv_rows(self, items, answerer):
        report = grounding_suite(answerer, items[:9])
        rows = render_grounding_csv(report).strip().splitlines()
        assert rows[0] == "tier,answer_relevance,faithfulness"
        assert len(rows) == 4

    def test_latency_csv(self, items, answerer):
        report = measure_latency(answerer, items[:5])
        csv = render_latency_csv(report)
        assert csv.startswith("metric,ms")
        assert "p99" in csv

    def test_render_report_dispatches_on_type_and_format(self, items, answerer):
        from farmsense.evalharness import render_report

        jury = run_suite(static_answer_fn(), items, [ConstantJudge(90.0)], runs=1)
        grounding = grounding_suite(answerer, items[:9])
        assert render_report(jury, "csv") == render_jury_csv(jury)
        assert render_report(grounding, "csv") == render_grounding_csv(grounding)
        assert render_report(jury, "table").startswith("tier")
        with pytest.raises(ValueError):
            render_report(jury, "pdf")


class TestFigures:
    def test_figures_save_png(self, tmp_path, items, answerer):
        from farmsense.evalharness import (
            save_grounding_figure,
            save_jury_figure,
            save_latency_figure,
        )

        jury = run_suite(static_answer_fn(), items, default_jury(), runs=2)
        grounding = grounding_suite(answerer, items[:9])
        latency = measure_latency(answerer, items[:5])
        save_jury_figure(jury, tmp_path / "jury.png")
        save_grounding_figure(grounding, tmp_path / "grounding.png")
        save_latency_figure(latency, tmp_path / "latency.png")
        for name in ("jury.png", "grounding.png", "latency.png"):
            assert (tmp_path / name).stat().st_size > 1000
