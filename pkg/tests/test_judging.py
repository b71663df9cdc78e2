from __future__ import annotations

import pytest

from evalforge.judging import (
    JudgeTemplate,
    Verdict,
    evaluator_labels,
    judge_pairwise,
    load_judge_template,
    order_pairs,
    parse_positional_winner,
)

TEMPLATE = load_judge_template()


def scripted_judge(outputs: list[str]):
    answers = iter(outputs)

    def judge_fn(prompt: str) -> str:
        return next(answers)

    return judge_fn


def test_prompt_renders_responses_in_given_order():
    text = TEMPLATE.render("q?", "FIRST_TEXT", "SECOND_TEXT")
    assert text.index("FIRST_TEXT") < text.index("SECOND_TEXT")
    assert "{question}" not in text


def test_position_dependent_judge_yields_inconsistent_pair():
    # "[[A]]" in both orders: original -> resp_a, swapped -> position one is
    # resp_b, so the two verdicts prefer different identities.
    verdicts = judge_pairwise(
        "p1", "q?", "alpha", "beta", scripted_judge(["[[A]]", "[[A]]"]), TEMPLATE
    )
    assert [v.order for v in verdicts] == ["original", "swapped"]
    assert verdicts[0].winner == "A"
    assert verdicts[1].winner == "B"


def test_position_independent_judge_yields_consistent_pair():
    # "[[A]]" then "[[B]]": both prefer resp_a's identity.
    verdicts = judge_pairwise(
        "p1", "q?", "alpha", "beta", scripted_judge(["[[A]]", "[[B]]"]), TEMPLATE
    )
    assert verdicts[0].winner == "A"
    assert verdicts[1].winner == "A"


def test_garbage_judge_output_degrades_to_tie():
    verdicts = judge_pairwise(
        "p1", "q?", "alpha", "beta", scripted_judge(["hmm", "hmm"]), TEMPLATE
    )
    assert all(v.winner == "tie" and v.unparsed_judge for v in verdicts)


def test_single_order_mode():
    verdicts = judge_pairwise(
        "p1", "q?", "alpha", "beta", scripted_judge(["[[B]]"]), TEMPLATE, both_orders=False
    )
    assert len(verdicts) == 1
    assert verdicts[0].winner == "B"
    assert verdicts[0].order == "original"


def test_response_ids_are_order_independent():
    verdicts = judge_pairwise(
        "p1", "q?", "alpha", "beta", scripted_judge(["[[C]]", "[[C]]"]), TEMPLATE,
        response_a_id="r-alpha", response_b_id="r-beta",
    )
    for v in verdicts:
        assert v.response_a_id == "r-alpha"
        assert v.response_b_id == "r-beta"


def test_parse_positional_winner_earliest_marker():
    assert parse_positional_winner("[[B]] not [[A]]", TEMPLATE) == "second"
    assert parse_positional_winner("verdict: [[C]]", TEMPLATE) == "tie"
    assert parse_positional_winner("nothing here", TEMPLATE) is None


def test_custom_markers():
    template = JudgeTemplate(
        template_id="x", prompt="{question}{response_a}{response_b}",
        marker_first="<one>", marker_second="<two>", marker_tie="<draw>",
    )
    assert parse_positional_winner("I pick <two>", template) == "second"


def _verdict(pair_id: str, winner: str, order: str = "original") -> Verdict:
    return Verdict(
        pair_id=pair_id, response_a_id=f"{pair_id}:a", response_b_id=f"{pair_id}:b",
        winner=winner, order=order,
    )


def test_evaluator_labels_agreement_and_conflict():
    verdicts = [
        _verdict("p1", "A"), _verdict("p1", "A", "swapped"),
        _verdict("p2", "A"), _verdict("p2", "B", "swapped"),
        _verdict("p3", "tie"),
    ]
    assert evaluator_labels(verdicts) == {"p1": "A", "p2": "tie", "p3": "tie"}


def test_order_pairs_groups_by_pair_id():
    verdicts = [
        _verdict("p1", "A"), _verdict("p2", "B"),
        _verdict("p1", "A", "swapped"), _verdict("p2", "B", "swapped"),
        _verdict("p3", "A"),  # no swapped counterpart
    ]
    pairs = order_pairs(verdicts)
    assert {orig.pair_id for orig, _ in pairs} == {"p1", "p2"}
    for orig, swap in pairs:
        assert orig.order == "original" and swap.order == "swapped"


def test_verdict_round_trips_through_dict():
    v = _verdict("p9", "B", "swapped")
    assert Verdict.from_dict(v.to_dict()) == v
