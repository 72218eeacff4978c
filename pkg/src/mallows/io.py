"""Reading and writing ranking files.

Two line formats are supported, both UTF-8 with ``#`` comments and blank
lines ignored:

``counted``
    ``count;i1|i2|...|ik`` per line, one observation with multiplicity.
``lists``
    a header ``universe=<n|open>`` then one ``i1|i2|...|ik`` per line.

A ``universe=`` header is optional for the counted format.
"""

from __future__ import annotations

import os
from pathlib import Path

from .ranking import RankingDataset

FORMATS = ("counted", "lists")


class ParseError(ValueError):
    """Malformed ranking file; ``lineno`` is 1-based (0 for whole-file errors)."""

    def __init__(self, message: str, lineno: int = 0, path: str | None = None):
        where = f"{path or '<input>'}:{lineno}: " if lineno else f"{path or '<input>'}: "
        super().__init__(where + message)
        self.lineno = lineno
        self.path = path


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _parse_items(field: str, lineno: int, path) -> tuple[int, ...]:
    parts = [p.strip() for p in field.split("|")]
    try:
        items = tuple(int(p) for p in parts)
    except ValueError:
        raise ParseError(f"items must be positive integers, got {field!r}", lineno, path) from None
    for i in items:
        if i < 1:
            raise ParseError(f"item ids must be positive, got {i}", lineno, path)
    if len(set(items)) != len(items):
        dup = next(i for i in items if items.count(i) > 1)
        raise ParseError(f"duplicate item {dup}", lineno, path)
    return items


def _parse_header(line: str, lineno: int, path) -> int | None:
    value = line.split("=", 1)[1].strip()
    if value == "open":
        return None
    try:
        n = int(value)
    except ValueError:
        raise ParseError(f"universe must be a positive integer or 'open', got {value!r}", lineno, path) from None
    if n < 1:
        raise ParseError("universe must be positive", lineno, path)
    return n


def parse_text(text: str, fmt: str = "counted", path: str | None = None) -> RankingDataset:
    """Parse ranking text in one of the two formats."""
    if fmt not in FORMATS:
        raise ParseError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}", 0, path)
    obs: list[tuple[int, ...]] = []
    counts: list[int] = []
    universe = None
    header_seen = False
    for lineno, line in _content_lines(text):
        if line.startswith("universe="):
            if header_seen or obs:
                raise ParseError("universe header must come first and only once", lineno, path)
            universe = _parse_header(line, lineno, path)
            header_seen = True
            continue
        if fmt == "lists" and not header_seen:
            raise ParseError("lists format needs a 'universe=<n|open>' header", lineno, path)
        if fmt == "counted":
            if ";" not in line:
                raise ParseError("expected 'count;i1|i2|...'", lineno, path)
            head, body = line.split(";", 1)
            try:
                count = int(head.strip())
            except ValueError:
                raise ParseError(f"count must be an integer, got {head.strip()!r}", lineno, path) from None
            if count < 1:
                raise ParseError(f"count must be >= 1, got {count}", lineno, path)
        else:
            count, body = 1, line
        items = _parse_items(body, lineno, path)
        if universe is not None and max(items) > universe:
            raise ParseError(f"item {max(items)} outside universe 1..{universe}", lineno, path)
        obs.append(items)
        counts.append(count)
    if not obs:
        raise ParseError("empty dataset: no observations found", 0, path)
    return RankingDataset(obs, counts, universe=universe, source=path, fmt=fmt)


def parse_rankings(path, fmt: str = "counted") -> RankingDataset:
    """Read a ranking file (see module docstring for the formats)."""
    path = os.fspath(path)
    text = Path(path).read_text(encoding="utf-8")
    return parse_text(text, fmt, path=path)


def format_rankings(data: RankingDataset, fmt: str = "counted") -> str:
    """Serialise a dataset; ``parse_text`` of the result gives it back."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    lines = []
    if fmt == "lists" or data.universe is not None:
        lines.append(f"universe={data.universe if data.universe is not None else 'open'}")
    for o, c in data:
        body = "|".join(map(str, o))
        if fmt == "counted":
            lines.append(f"{c};{body}")
        else:
            lines.extend([body] * c)
    return "\n".join(lines) + "\n"


def write_rankings(data: RankingDataset, path, fmt: str = "counted") -> None:
    Path(path).write_text(format_rankings(data, fmt), encoding="utf-8")


def read_names(path) -> dict[int, str]:
    """Sidecar mapping: lines ``id<TAB>name``."""
    names: dict[int, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        if "\t" not in raw:
            raise ParseError("expected 'id<TAB>name'", lineno, os.fspath(path))
        key, name = raw.split("\t", 1)
        try:
            item = int(key)
        except ValueError:
            raise ParseError(f"bad item id {key!r}", lineno, os.fspath(path)) from None
        if item in names:
            raise ParseError(f"duplicate item id {item}", lineno, os.fspath(path))
        names[item] = name
    return names


def write_names(names: dict[int, str], path) -> None:
    lines = [f"{k}\t{names[k]}" for k in sorted(names)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def encode_names(lists_of_names) -> tuple[RankingDataset, dict[int, str]]:
    """Map string-labelled rankings to integer ids in order of first appearance."""
    ids: dict[str, int] = {}
    obs = []
    for names in lists_of_names:
        row = []
        for name in names:
            if name not in ids:
                ids[name] = len(ids) + 1
            row.append(ids[name])
        obs.append(tuple(row))
    return RankingDataset(obs, universe=None, fmt="lists"), {v: k for k, v in ids.items()}
