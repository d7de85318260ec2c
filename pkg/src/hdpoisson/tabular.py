"""Delimited-file ingestion, key=value config files, and JSON artifacts.

CSV inputs are RFC-4180-style with a mandatory header row, UTF-8. Parse
failures carry 1-based row/column locations. Every JSON artifact embeds the
package version, the fully resolved configuration, the seed, and wall-clock,
so a run can be reproduced from its own output.
"""

import csv
import json
import os
import time

import numpy as np

from . import __version__
from .errors import CsvError


def read_table(path):
    """Read a numeric CSV with header: (column_names, matrix).

    Raises CsvError with the offending 1-based data-row and column on any
    non-numeric or ragged content.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvError(f"{path}: empty file; a header row is required")
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise CsvError(f"{path}: duplicate column names in header")
        rows = []
        for i, rec in enumerate(reader, start=1):
            if not rec or (len(rec) == 1 and rec[0].strip() == ""):
                continue  # tolerate trailing blank lines
            if len(rec) != len(header):
                raise CsvError(
                    f"{path}: row {i} has {len(rec)} fields, header has {len(header)}",
                    row=i)
            vals = []
            for j, cell in enumerate(rec):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvError(
                        f"{path}: non-numeric value {cell.strip()!r} at row {i}, "
                        f"column {j + 1} ({header[j]!r})", row=i, column=j + 1)
            rows.append(vals)
    if not rows:
        raise CsvError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=np.float64)


def read_vector(path):
    """One-column CSV (header required) as a 1-d array."""
    header, mat = read_table(path)
    if mat.shape[1] != 1:
        raise CsvError(f"{path}: expected a single column, found {mat.shape[1]}")
    return mat[:, 0]


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_config_file(path):
    """Simple key=value file; blank lines and #-comments ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CsvError(f"{path}: line {i} is not key=value", row=i)
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def resolve_seed(flag_value, file_values):
    """Seed precedence: flag > config file > PDB_SEED env var > 0."""
    if flag_value is not None:
        return int(flag_value)
    if "seed" in file_values:
        return int(file_values["seed"])
    env = os.environ.get("PDB_SEED")
    if env is not None:
        return int(env)
    return 0


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def write_artifact(path, payload, config, seed, started_at):
    """JSON artifact with provenance envelope; returns the envelope dict."""
    envelope = dict(version=__version__, config=_jsonify(config), seed=seed,
                    wall_clock_seconds=time.time() - started_at,
                    payload=_jsonify(payload))
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(envelope, fh, indent=2)
            fh.write("\n")
    return envelope
