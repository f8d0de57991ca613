"""Report envelope shared by all CLI subcommands: JSON, CSV and aligned text."""
from __future__ import annotations

import csv
import io
import json
import shlex
from datetime import datetime, timezone
from typing import Any, Sequence

from . import __version__

REDACTED_FLAGS = ("--key",)


def command_line(argv: Sequence[str]) -> str:
    """Echoable command with key material removed (pass it again via the environment)."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in REDACTED_FLAGS:
            skip = True
            continue
        if any(a.startswith(f + "=") for f in REDACTED_FLAGS):
            continue
        out.append(a)
    return shlex.join(["macagg", *out])


def envelope(subcommand: str, argv: Sequence[str], config: dict, results: Any, seed: int | None) -> dict:
    return {
        "tool": "macagg",
        "version": __version__,
        "subcommand": subcommand,
        "generated": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "command": command_line(argv),
        "seed": seed,
        "config": config,
        "results": results,
    }


def header_lines(rep: dict) -> list[str]:
    return [
        f"# macagg {rep['version']} {rep['subcommand']}",
        f"# generated: {rep['generated']}",
        f"# command: {rep['command']}",
        f"# seed: {rep['seed']}",
        f"# config: {json.dumps(rep['config'], sort_keys=True)}",
    ]


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.5f}"
    if isinstance(v, bool):
        return "yes" if v else "no"
    return str(v)


def table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [list(columns)] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render(rep: dict, fmt: str, columns: Sequence[str] | None = None, rows: Sequence[Sequence[Any]] | None = None,
           text: str | None = None) -> str:
    if fmt == "json":
        return json.dumps(rep, indent=2) + "\n"
    head = "\n".join(header_lines(rep)) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if columns is not None:
            w.writerow(columns)
            for r in rows or ():
                w.writerow(["" if v is None else (f"{v:.6f}" if isinstance(v, float) else v) for v in r])
        return head + buf.getvalue()
    body = text if text is not None else table(columns or [], rows or [])
    return head + body
