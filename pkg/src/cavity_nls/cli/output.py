"""Deterministic CSV tables and all-or-nothing output directories."""
from __future__ import annotations

import hashlib
import os
import shutil
import tempfile

import numpy as np

FLOAT_FMT = "%.12e"


def format_value(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return FLOAT_FMT % float(x)


def render_csv(columns, rows, meta, allow_inf=False):
    """CSV text with a ``# key=value`` provenance block; ``rows`` is a 2-D array of finite numbers.

    ``allow_inf`` admits infinities (an error ratio against a vanishing reference); NaN is never written.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(columns):
        raise ValueError("row width does not match the header")
    bad = np.isnan(rows) if allow_inf else ~np.isfinite(rows)
    if np.any(bad):
        raise ValueError("output table contains non-finite values")
    lines = [f"# {k}={meta[k]}" for k in meta]
    lines.append(",".join(columns))
    lines.extend(",".join(FLOAT_FMT % x for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def config_digest(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class OutputDir:
    """Collects files in a scratch directory and moves them into place on :meth:`commit`.

    If the run fails before committing, nothing is written to the target.
    """

    def __init__(self, target):
        self.target = os.path.abspath(target)
        parent = os.path.dirname(self.target) or "."
        os.makedirs(parent, exist_ok=True)
        self._tmp = tempfile.mkdtemp(prefix=".cavity-nls-", dir=parent)
        self.files = []

    def write(self, name, text):
        with open(os.path.join(self._tmp, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files.append(name)

    def commit(self):
        os.makedirs(self.target, exist_ok=True)
        for name in self.files:
            os.replace(os.path.join(self._tmp, name), os.path.join(self.target, name))
        self.discard()

    def discard(self):
        shutil.rmtree(self._tmp, ignore_errors=True)
