"""JSONL helpers with line-numbered parse errors and byte-stable output."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import ParseError


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_no, record) pairs; blank lines are skipped."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(path), line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ParseError(str(path), line_no, "expected a JSON object")
            yield line_no, record


def dumps_stable(obj: Any) -> str:
    """Serialize with sorted keys and fixed separators so reruns are byte-identical."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_stable(record))
            fh.write("\n")
            count += 1
    return count


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps_stable(obj) + "\n", encoding="utf-8")
