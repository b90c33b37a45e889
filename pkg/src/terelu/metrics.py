"""Per-epoch metrics CSV: writing, schema-checked reading and long-format merging."""

from __future__ import annotations

import csv
import io
import re
from pathlib import Path

from terelu.network import MetricsRow

BASE_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")
LONG_METRICS = ("train_loss", "train_acc", "val_loss", "val_acc", "acc_gap")
LONG_HEADER = ("run", "epoch", "metric", "value")
_BETA = re.compile(r"beta_(\d+)$")


class SchemaError(ValueError):
    pass


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def header(n_beta: int) -> list[str]:
    return list(BASE_COLUMNS) + [f"beta_{i}" for i in range(n_beta)]


class MetricsWriter:
    """Writes the config echo and header up front, then one flushed line per epoch."""

    def __init__(self, path, config_items, n_beta: int):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        for key, value in config_items:
            self._fh.write(f"# {key} = {value}\n")
        self._fh.write(",".join(header(n_beta)) + "\n")
        self._fh.flush()

    def write(self, row: MetricsRow) -> None:
        cells = [str(row.epoch), fmt(row.train_loss), fmt(row.train_acc), fmt(row.val_loss),
                 fmt(row.val_acc)] + [fmt(b) for b in row.beta_values]
        self._fh.write(",".join(cells) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> dict[str, list]:
    """Load a metrics CSV into column lists, validating the header."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise SchemaError(f"{path}: empty file (no header)")
    reader = csv.reader(io.StringIO("\n".join(lines)))
    head = next(reader)
    for i, col in enumerate(BASE_COLUMNS):
        if i >= len(head) or head[i] != col:
            got = head[i] if i < len(head) else "<missing>"
            raise SchemaError(f"{path}: column {i + 1} should be {col!r}, found {got!r}")
    for i, col in enumerate(head[len(BASE_COLUMNS):]):
        m = _BETA.match(col)
        if not m or int(m.group(1)) != i:
            raise SchemaError(f"{path}: unexpected column {col!r} (expected beta_{i})")
    cols: dict[str, list] = {c: [] for c in head}
    for lineno, rec in enumerate(reader, 2):
        if len(rec) != len(head):
            raise SchemaError(f"{path}: row {lineno} has {len(rec)} fields, header has {len(head)}")
        cols["epoch"].append(int(rec[0]))
        for c, v in zip(head[1:], rec[1:]):
            cols[c].append(float(v))
    if not cols["epoch"]:
        raise SchemaError(f"{path}: no data rows")
    cols["acc_gap"] = [t - v for t, v in zip(cols["train_acc"], cols["val_acc"])]
    return cols


def run_names(paths) -> list[str]:
    names, seen = [], {}
    for p in paths:
        stem = Path(p).stem
        seen[stem] = seen.get(stem, 0) + 1
        names.append(stem if seen[stem] == 1 else f"{stem}#{seen[stem]}")
    return names


def long_rows(runs: dict[str, dict[str, list]], with_beta: bool = False) -> list[tuple]:
    """Flatten runs to ``(run, epoch, metric, value)`` rows, epoch-major within a run."""
    rows = []
    for name, cols in runs.items():
        metrics = list(LONG_METRICS)
        if with_beta:
            metrics += [c for c in cols if _BETA.match(c)]
        for i, epoch in enumerate(cols["epoch"]):
            for m in metrics:
                rows.append((name, epoch, m, cols[m][i]))
    return rows


def write_long(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(LONG_HEADER)
    for run, epoch, metric, value in rows:
        w.writerow((run, epoch, metric, fmt(value)))
