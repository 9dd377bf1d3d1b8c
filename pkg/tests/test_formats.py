import json

import pytest

from btdiversity.formats import (ValidationError, atomic_write, parse_candidate_lines, parse_tsv_report,
                                 read_group_trees, render_report, write_candidate_groups, read_candidate_groups)
from btdiversity.lexdiv import CandidateGroup


def line(obj):
    return json.dumps(obj)


def test_candidate_round_trip(tmp_path):
    groups = [CandidateGroup("a", ("x\ty", "z"), "src"), CandidateGroup("b", ("p", "q"))]
    path = tmp_path / "c.jsonl"
    write_candidate_groups(groups, path)
    assert read_candidate_groups(path) == groups
    assert b"\r\n" not in path.read_bytes()


def test_candidate_validation_collects_problems():
    lines = [
        line({"id": "a", "candidates": ["x", "y"]}),
        "not json",
        line({"id": "a", "candidates": ["x", "y"]}),
        line({"id": "b", "candidates": "xy"}),
        line({"id": "", "candidates": ["x", "y"]}),
        line({"id": "c", "candidates": ["x", "y", "z"]}),
        line([1, 2]),
        line({"id": "d", "source": 5, "candidates": ["x", "y"]}),
    ]
    with pytest.raises(ValidationError) as info:
        parse_candidate_lines(lines)
    details = info.value.details
    assert len(details) == 7
    assert any("line 2" in d for d in details) and any("duplicate" in d for d in details)
    assert any("3 candidates" in d for d in details)
    assert info.value.to_dict()["kind"] == "validation"


def test_blank_lines_are_ignored():
    groups = parse_candidate_lines(["", line({"id": "a", "candidates": ["x", "y"]}), "  "])
    assert len(groups) == 1


def test_flat_tree_file(tmp_path):
    groups = [CandidateGroup("a", ("x", "y")), CandidateGroup("b", ("z", "w"))]
    path = tmp_path / "t.txt"
    path.write_text("(A (B b))\n\n(C (D d))\n(E (F\n")
    trees = read_group_trees(path, groups)
    assert trees["a"][1] is None and trees["b"][1] is None
    assert str(trees["b"][0]) == "(C (D d))"
    path.write_text("(A (B b))\n")
    with pytest.raises(ValidationError):
        read_group_trees(path, groups)


def test_jsonl_tree_file(tmp_path):
    groups = [CandidateGroup("a", ("x", "y"))]
    path = tmp_path / "t.jsonl"
    path.write_text(line({"id": "a", "trees": ["(A (B b))", ""]}) + "\n" + line({"id": "zz", "trees": []}) + "\n")
    trees = read_group_trees(path, groups)
    assert trees["a"][1] is None
    path.write_text(line({"id": "a", "trees": ["(A (B b))"]}) + "\n")
    with pytest.raises(ValidationError):
        read_group_trees(path, groups)


def test_report_round_trip_and_aggregate_consistency():
    rows = [("g1", {"i_bleu": 10.5, "i_chrf": None}), ("g2", {"i_bleu": 20.25, "i_chrf": 3.0})]
    text = render_report({"tool": "t"}, ["i_bleu", "i_chrf"], rows, {"i_bleu": {"mean": 15.375}})
    header, columns, parsed, aggregate = parse_tsv_report(text)
    assert header == {"tool": "t"} and columns == ["i_bleu", "i_chrf"] and parsed == rows
    assert aggregate["i_bleu"]["mean"] == (10.5 + 20.25) / 2
    jsonl = render_report({"tool": "t"}, ["i_bleu"], rows, {}, fmt="jsonl").splitlines()
    assert json.loads(jsonl[1]) == {"id": "g1", "i_bleu": 10.5}
    with pytest.raises(ValueError):
        render_report({}, [], [], {}, fmt="xml")


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.txt"
    atomic_write(target, "old\n")

    with pytest.raises(TypeError):
        atomic_write(target, 12345)
    assert target.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]
