"""Plain-text readers and writers shared by the CLI and the studies.

Matrices are headerless comma-separated files, one row per line, floats
written with 17 significant digits so 64-bit values survive a round trip.
"""

import csv
import json

import numpy as np

from .exceptions import MalformedFileError

FLOAT_FMT = "%.17g"


def write_matrix_csv(path, a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, a, fmt=FLOAT_FMT, delimiter=",")


def read_matrix_csv(path):
    try:
        a = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except (ValueError, OSError) as exc:
        raise MalformedFileError(f"cannot read matrix CSV {path}: {exc}") from exc
    if a.size == 0:
        raise MalformedFileError(f"matrix CSV {path} is empty")
    return a


def write_vector(path, v):
    with open(path, "w", newline="\n") as fh:
        for x in np.asarray(v, dtype=float):
            fh.write(FLOAT_FMT % x + "\n")


def read_vector(path):
    return read_matrix_csv(path).ravel()


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for lab in labels:
            fh.write(f"{int(lab)}\n")


def read_labels(path):
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise MalformedFileError(f"{path}:{lineno}: not an integer label: {line!r}") from exc
    return np.asarray(labels, dtype=int)


def write_rows_csv(path, header, rows):
    """Long-format CSV with a header row; floats use :data:`FLOAT_FMT`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([FLOAT_FMT % v if isinstance(v, float) else v for v in row])


def read_rows_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
