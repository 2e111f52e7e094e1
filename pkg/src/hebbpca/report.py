"""Run reports: ``key=value`` lines followed by CSV tables.

A report file looks like::

    command=train
    config.epochs=20
    ...
    deviations=first | second

    [epochs]
    epoch,val_acc,test_acc,rep_error.conv1
    1,0.41,0.405,12.5

Reals are written with ``repr`` (shortest round-trip form), keys keep their
insertion order, so the same run always produces the same bytes. Wall-clock
time is only written when asked for, since it would break that property.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .network import TrainReport

DEVIATION_SEP = " | "


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    s = str(v)
    if "\n" in s:
        raise ValueError(f"report values must be single-line, got {s!r}")
    return s


class Report:
    def __init__(self):
        self.values: dict[str, str] = {}
        self.tables: dict[str, tuple[list[str], list[list]]] = {}

    def set(self, key: str, value) -> None:
        if "=" in key or "\n" in key:
            raise ValueError(f"bad report key {key!r}")
        self.values[key] = format_value(value)

    def update(self, prefix: str, mapping: dict) -> None:
        for k, v in mapping.items():
            self.set(f"{prefix}{k}", v)

    def table(self, name: str, header: list[str], rows: list[list]) -> None:
        self.tables[name] = (list(header), [list(r) for r in rows])

    def to_text(self) -> str:
        lines = [f"{k}={v}" for k, v in self.values.items()]
        out = "\n".join(lines) + "\n"
        for name, (header, rows) in self.tables.items():
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(header)
            for r in rows:
                writer.writerow([format_value(v) for v in r])
            out += f"\n[{name}]\n" + buf.getvalue()
        return out

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def parse_report(text: str) -> tuple[dict[str, str], dict[str, list[dict[str, str]]]]:
    """Inverse of :meth:`Report.to_text`: values as strings, tables as row dicts."""
    values: dict[str, str] = {}
    tables: dict[str, list[dict[str, str]]] = {}
    blocks = text.split("\n[")
    for line in blocks[0].splitlines():
        if line:
            k, _, v = line.partition("=")
            values[k] = v
    for block in blocks[1:]:
        name, _, body = block.partition("]\n")
        tables[name] = list(csv.DictReader(io.StringIO(body)))
    return values, tables


def add_train_report(rep: Report, tr: TrainReport, timing: bool = False) -> None:
    """Config echo, deviations, selection results and the per-epoch table."""
    rep.update("config.", tr.config)
    rep.set("chosen_epoch", tr.chosen_epoch)
    rep.set("val_accuracy", tr.val_accuracy)
    rep.set("test_accuracy", tr.test_accuracy)
    rep.update("", {k: v for k, v in tr.extra.items()})
    if timing:
        rep.set("wall_clock_seconds", tr.wall_clock)
    rep.set("deviations", DEVIATION_SEP.join(tr.deviations))
    header = ["epoch", "val_acc", "test_acc"] + [f"rep_error.{n}" for n in tr.layer_names]
    rows = [[e.epoch, e.val_acc, e.test_acc] + list(e.rep_error) for e in tr.epochs]
    rep.table("epochs", header, rows)


def convergence_epoch(accuracies: list[float], tolerance: float = 0.02) -> int:
    """First (1-based) epoch whose accuracy is within ``tolerance`` of the best."""
    best = max(accuracies)
    return next(i + 1 for i, a in enumerate(accuracies) if a >= best - tolerance)
