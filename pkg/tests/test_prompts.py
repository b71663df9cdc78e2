from __future__ import annotations

import pytest

from evalforge.data import EvalInstance
from evalforge.errors import TemplateError
from evalforge.prompts import (
    PromptTemplate,
    builtin_template,
    extract_answer,
    render_prompt,
    resolve_template,
    template_from_dict,
)

Q1 = EvalInstance(
    instance_id="q1",
    question="Which gas do plants absorb from the air?",
    options=["carbon dioxide", "oxygen", "nitrogen", "helium"],
    gold_index=0,
)
Q2 = EvalInstance(
    instance_id="q2",
    question="What is the largest planet in the solar system?",
    options=["Mars", "Jupiter", "Venus", "Mercury"],
    gold_index=1,
)


def test_mcp_zero_shot_snapshot():
    # Frozen once from the PromptA template definition.
    rendered = render_prompt(Q1, [], builtin_template("MCP", "PromptA"))
    expected = (
        "The following are multiple choice questions (with answers).\n\n"
        "Question: Which gas do plants absorb from the air?\n"
        "A. carbon dioxide\nB. oxygen\nC. nitrogen\nD. helium\n"
        "Answer:"
    )
    assert rendered.text == expected
    assert rendered.text.endswith("Answer:")


def test_mcp_two_shot_exemplars_end_with_gold_label():
    template = builtin_template("MCP", "PromptA")
    rendered = render_prompt(Q1, [Q2, Q1], template)
    text = rendered.text
    assert "Answer: B\n\n" in text  # q2's gold label
    assert "Answer: A\n\n" in text  # q1's gold label as exemplar
    assert text.endswith("Answer:")  # query slot stays empty
    assert rendered.shots == 2


def test_cp_pairs_share_identical_context():
    rendered = render_prompt(
        EvalInstance(instance_id="x", question="Cat or dog?", options=["cat", "dog"], gold_index=0),
        [],
        builtin_template("CP", "PromptA"),
    )
    assert rendered.option_pairs is not None
    assert len(rendered.option_pairs) == 2
    contexts = {ctx for ctx, _ in rendered.option_pairs}
    assert len(contexts) == 1
    assert [cont for _, cont in rendered.option_pairs] == ["cat", "dog"]
    assert rendered.option_pairs[0][0].endswith("Answer: ")


def test_cp_exemplars_use_gold_text():
    rendered = render_prompt(Q1, [Q2], builtin_template("CP", "PromptA"))
    context = rendered.option_pairs[0][0]
    assert "Answer: Jupiter\n\n" in context


def test_templates_differ_but_structure_matches():
    a = render_prompt(Q1, [], builtin_template("MCP", "PromptA"))
    b = render_prompt(Q1, [], builtin_template("MCP", "PromptB"))
    assert a.text != b.text


def test_too_many_options_for_labels():
    template = builtin_template("MCP", "PromptA")
    instance = EvalInstance(
        instance_id="big", question="q?", options=[f"o{i}" for i in range(9)], gold_index=0
    )
    with pytest.raises(TemplateError, match="labels"):
        render_prompt(instance, [], template)


def test_template_placeholder_validation():
    with pytest.raises(TemplateError, match="placeholders"):
        template_from_dict(
            {
                "template_id": "bad",
                "regime": "MCP",
                "preamble": "",
                "exemplar_format": "{question}\n{answer}\n",  # missing {options}
                "query_format": "{question}\n{options}\n",
            }
        )


def test_resolve_template_from_file(tmp_path):
    path = tmp_path / "tpl.json"
    path.write_text(
        '{"template_id": "Custom", "regime": "CP", "preamble": "",'
        ' "exemplar_format": "{question} => {answer}\\n",'
        ' "query_format": "{question} => "}',
        "utf-8",
    )
    tpl = resolve_template("CP", str(path))
    assert tpl.template_id == "Custom"
    with pytest.raises(TemplateError):
        resolve_template("MCP", str(path))  # regime mismatch


def test_resolve_unknown_template():
    with pytest.raises(TemplateError, match="unknown template"):
        resolve_template("MCP", "PromptZ")


LABELS = ["A", "B", "C", "D"]


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("B", 1),
        ("The answer is (c).", 2),  # tolerant matching rule, hand-checked
        ("I cannot decide", None),
        ("answer: D", 3),
        ("  a  ", 0),
        ("В этом нет буквы", None),  # Cyrillic B is not the label token
        ("A. carbon dioxide", 0),
        ("banana", None),  # labels inside words do not count
    ],
)
def test_extract_answer(raw, expected):
    assert extract_answer(raw, "MCP", LABELS) == expected


def test_extract_answer_earliest_occurrence_wins():
    assert extract_answer("C or maybe B", "MCP", LABELS) == 2


def test_extract_answer_cp_regime_is_none():
    assert extract_answer("anything", "CP", LABELS) is None
