"""Run artifacts: posterior snapshots, scalar traces, metrics records.

All writes are atomic (temp file + rename) so an interrupted run never
leaves a truncated artifact behind.
"""

import contextlib
import csv
import json
import os
import tempfile

import numpy as np

__all__ = [
    "atomic_open",
    "write_snapshot",
    "read_snapshot",
    "write_trace",
    "append_metrics",
]


@contextlib.contextmanager
def atomic_open(path):
    """Open a temp file for writing and rename it over ``path`` on success."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_snapshot(path, model, sweep, meta, blocks):
    """Serialize named matrices as TSV blocks under a single header.

    ``meta`` is a flat dict of scalars recorded in the header line;
    ``blocks`` maps names (Phi, Lambda, H, ...) to 1-d or 2-d arrays.
    """
    with atomic_open(path) as fh:
        items = " ".join(f"{k}={v}" for k, v in meta.items())
        fh.write(f"# narm-snapshot model={model} sweep={sweep} {items}\n")
        for name, arr in blocks.items():
            arr = np.atleast_2d(np.asarray(arr, dtype=float))
            fh.write(f"# block {name} {arr.shape[0]} {arr.shape[1]}\n")
            for row in arr:
                fh.write("\t".join(repr(float(v)) for v in row) + "\n")


def read_snapshot(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# narm-snapshot"):
            raise ValueError(f"{path}: not a snapshot file")
        meta = dict(item.split("=", 1) for item in header.split()[2:])
        blocks = {}
        name = None
        rows = []
        for line in fh:
            line = line.strip()
            if line.startswith("# block"):
                if name is not None:
                    blocks[name] = np.array(rows)
                name = line.split()[2]
                rows = []
            elif line:
                rows.append([float(v) for v in line.split("\t")])
        if name is not None:
            blocks[name] = np.array(rows)
    return meta, blocks


def write_trace(path, records):
    """Write per-sweep scalar records (list of dicts) as CSV."""
    if not records:
        return
    fields = list(records[0])
    with atomic_open(path) as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(records)


def append_metrics(path, record):
    """Append one JSON-lines metrics record."""
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
