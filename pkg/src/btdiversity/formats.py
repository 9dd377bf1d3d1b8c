"""File formats: candidate-group JSONL, tree files, reports, and atomic writes.

Candidate groups are stored one JSON object per line::

    {"id": "000017", "source": "optional input text", "candidates": ["...", "...", "..."]}

Trees for a candidate file come either as a flat text file with one
bracketed tree per candidate, in file order (group by group, blank line =
missing parse), or as JSONL ``{"id": ..., "trees": [...]}`` keyed by group.
"""

import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import __version__
from .lexdiv import CandidateGroup
from .treebank import ParseTree, parse_bracketed


class ValidationError(ValueError):
    """Bad user input; carries a list of per-line problems."""

    def __init__(self, message: str, details: Sequence[str] = ()):
        super().__init__(message)
        self.details = list(details)

    def to_dict(self) -> dict:
        return {"kind": "validation", "message": str(self), "details": self.details[:50]}


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, text: str):
    """Write ``text`` (UTF-8, LF) next to ``path`` and rename it into place."""
    path = Path(path)
    mode = 0o666 & ~_umask()
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with io.open(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, mode)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def read_lines(path) -> List[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [line.rstrip("\r\n") for line in fh]


# -- candidate groups -----------------------------------------------------------

def parse_candidate_lines(lines: Iterable[str], require_constant_k: bool = True) -> List[CandidateGroup]:
    groups, problems, seen = [], [], set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        if not isinstance(obj, dict):
            problems.append(f"line {lineno}: expected a JSON object")
            continue
        gid, cands, source = obj.get("id"), obj.get("candidates"), obj.get("source")
        if not isinstance(gid, str) or not gid:
            problems.append(f"line {lineno}: 'id' must be a non-empty string")
            continue
        if not isinstance(cands, list) or not all(isinstance(c, str) for c in cands):
            problems.append(f"line {lineno}: 'candidates' must be a list of strings")
            continue
        if source is not None and not isinstance(source, str):
            problems.append(f"line {lineno}: 'source' must be a string if present")
            continue
        if gid in seen:
            problems.append(f"line {lineno}: duplicate id {gid!r}")
            continue
        seen.add(gid)
        groups.append(CandidateGroup(gid, tuple(cands), source))
    if require_constant_k and groups:
        k = groups[0].k
        for g in groups:
            if g.k != k:
                problems.append(f"group {g.group_id!r}: {g.k} candidates, expected {k}")
    if problems:
        raise ValidationError(f"{len(problems)} problem(s) in candidate file", problems)
    return groups


def read_candidate_groups(path, require_constant_k: bool = True) -> List[CandidateGroup]:
    return parse_candidate_lines(read_lines(path), require_constant_k)


def candidate_record(group: CandidateGroup) -> str:
    obj = {"id": group.group_id}
    if group.source is not None:
        obj["source"] = group.source
    obj["candidates"] = list(group.candidates)
    return json.dumps(obj, ensure_ascii=False)


def write_candidate_groups(groups: Iterable[CandidateGroup], path):
    atomic_write(path, "".join(candidate_record(g) + "\n" for g in groups))


# -- trees ------------------------------------------------------------------------

def _parse_or_none(text: Optional[str]) -> Tuple[Optional[ParseTree], Optional[str]]:
    if text is None or not text.strip():
        return None, "missing parse"
    try:
        return parse_bracketed(text), None
    except ValueError as exc:
        return None, str(exc)


def read_group_trees(path, groups: Sequence[CandidateGroup]) -> Dict[str, List[Optional[ParseTree]]]:
    """Trees for each group, aligned with its candidates.

    Unparseable or missing entries become ``None``; structural mismatches
    (wrong line count, unknown ids, wrong tree count) raise ValidationError.
    """
    lines = read_lines(path)
    by_id: Dict[str, List[Optional[ParseTree]]] = {}
    if str(path).endswith(".jsonl"):
        known = {g.group_id: g.k for g in groups}
        problems = []
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                gid, trees = obj["id"], obj["trees"]
            except (json.JSONDecodeError, KeyError, TypeError):
                problems.append(f"line {lineno}: expected {{'id': ..., 'trees': [...]}}")
                continue
            if gid not in known:
                continue
            if not isinstance(trees, list) or len(trees) != known[gid]:
                problems.append(f"line {lineno}: group {gid!r} needs {known[gid]} trees")
                continue
            by_id[gid] = [_parse_or_none(t)[0] for t in trees]
        missing = [g.group_id for g in groups if g.group_id not in by_id]
        problems += [f"group {gid!r}: no trees" for gid in missing]
        if problems:
            raise ValidationError(f"{len(problems)} problem(s) in tree file", problems)
        return by_id

    # flat file: exactly one line per candidate
    expected = sum(g.k for g in groups)
    if len(lines) != expected:
        raise ValidationError(f"tree file has {len(lines)} lines, candidate file needs {expected}")
    pos = 0
    for g in groups:
        by_id[g.group_id] = [_parse_or_none(t)[0] for t in lines[pos:pos + g.k]]
        pos += g.k
    return by_id


# -- reports ----------------------------------------------------------------------

def format_value(value: Optional[float]) -> str:
    return "NA" if value is None else repr(float(value))


def mean_of(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def report_header(command: str, config: dict, inputs: Sequence) -> dict:
    return {
        "tool": "btdiversity",
        "version": __version__,
        "command": command,
        "config": config,
        "config_sha256": config_digest(config),
        "inputs": [{"name": Path(p).name, "sha256": file_digest(p)} for p in inputs],
    }


def render_report(header: dict, columns: Sequence[str], rows: Sequence[Tuple[str, Dict[str, Optional[float]]]],
                  aggregate: dict, fmt: str = "tsv") -> str:
    out = []
    if fmt == "tsv":
        out.append(f"# {canonical_json(header)}")
        out.append("\t".join(["id", *columns]))
        for gid, values in rows:
            out.append("\t".join([gid, *(format_value(values.get(c)) for c in columns)]))
        out.append(f"# aggregate {canonical_json(aggregate)}")
    elif fmt == "jsonl":
        out.append(canonical_json({"header": header}))
        for gid, values in rows:
            out.append(canonical_json({"id": gid, **{c: values.get(c) for c in columns}}))
        out.append(canonical_json({"aggregate": aggregate}))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return "\n".join(out) + "\n"


def parse_tsv_report(text: str) -> Tuple[dict, List[str], List[Tuple[str, Dict[str, Optional[float]]]], dict]:
    """Inverse of :func:`render_report` for the TSV layout."""
    lines = text.splitlines()
    header = json.loads(lines[0][2:])
    columns = lines[1].split("\t")[1:]
    rows = []
    aggregate = {}
    for line in lines[2:]:
        if line.startswith("# aggregate "):
            aggregate = json.loads(line[len("# aggregate "):])
            continue
        gid, *vals = line.split("\t")
        rows.append((gid, {c: None if v == "NA" else float(v) for c, v in zip(columns, vals)}))
    return header, columns, rows, aggregate
