"""CSV and manifest output.

Every CSV starts with '#'-prefixed lines echoing the config it came from,
then a fixed documented header row.  Reals are written with 17 significant
digits so a rerun with the same seed is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

VERSION = "0.1.0"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and float(x).is_integer() and abs(x) < 1e15:
        return f"{x:.1f}"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, header: list[str], rows, preamble: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if preamble:
        lines.extend("# " + ln for ln in preamble.rstrip("\n").split("\n"))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_event_log(path: Path, streams: dict, preamble: str = "") -> Path:
    """Merged event-log CSV: one row per epoch, columns time,stream_id,mark.

    ``streams`` maps a stream id to an EventStream; events are written in
    global time order with an empty mark field for unmarked streams.
    """
    rows = []
    for sid, ev in streams.items():
        marks = ev.marks if ev.marks is not None else [None] * len(ev)
        for t, m in zip(ev.times, marks):
            rows.append((float(t), sid, "" if m is None else float(m)))
    rows.sort(key=lambda r: r[0])
    return write_csv(path, ["time", "stream_id", "mark"], rows, preamble)


def read_event_log(path: Path) -> list[tuple[float, str, float | None]]:
    out = []
    for ln in Path(path).read_text().splitlines():
        if ln.startswith("#") or ln.startswith("time,"):
            continue
        t, sid, m = ln.split(",")
        out.append((float(t), sid, float(m) if m else None))
    return out


class RunManifest:
    """Collects outputs and run metadata; one manifest per CLI invocation."""

    def __init__(self, subcommand: str, config_source: str, config_echo: str,
                 seed: int, resolved: dict):
        self.subcommand = subcommand
        self.config_source = config_source
        self.config_echo = config_echo
        self.seed = seed
        self.resolved = resolved
        self.outputs: list[dict] = []
        self._t0 = time.time()

    def add(self, path: Path) -> Path:
        self.outputs.append({"path": str(path), "sha256": sha256_of(path)})
        return path

    def write(self, out_dir: Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "tool": "synapsim",
            "version": VERSION,
            "subcommand": self.subcommand,
            "config_source": self.config_source,
            "seed": self.seed,
            "resolved": self.resolved,
            "outputs": self.outputs,
            "wall_clock_s": round(time.time() - self._t0, 3),
            "config_echo": self.config_echo,
        }
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
        return path
