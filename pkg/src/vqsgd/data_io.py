"""Dataset ingestion (LIBSVM text), synthetic tasks and splits."""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParameterRange, ParseError
from .tasks import synth_least_squares  # noqa: F401  (re-exported)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sparse rows with 0-based feature indices, stored as CSR."""

    features: sp.csr_matrix
    labels: np.ndarray

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def row(self, i):
        """Row i as a list of (index, value) pairs."""
        lo, hi = self.features.indptr[i], self.features.indptr[i + 1]
        return list(zip(self.features.indices[lo:hi].tolist(), self.features.data[lo:hi].tolist()))

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows])


def parse_libsvm(stream, d_hint=None):
    """Parse LIBSVM text: ``label idx:val idx:val ...`` with 1-based indices.

    Blank lines and ``#`` comments are skipped. Indices must be strictly
    increasing within a line.
    """
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, encoding="utf-8") as fh:
            return parse_libsvm(fh, d_hint)
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))

    labels, indptr, indices, values = [], [0], [], []
    max_index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        prev = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed pair {tok!r}", lineno)
            try:
                idx = int(key)
                x = float(val)
            except ValueError:
                raise ParseError(f"malformed pair {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature index must be >= 1, got {idx}", lineno)
            if idx <= prev:
                raise ParseError(f"feature indices not strictly increasing at {idx}", lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(x)
        max_index = max(max_index, prev)
        indptr.append(len(indices))

    d = max(int(d_hint or 0), max_index)
    X = sp.csr_matrix(
        (np.array(values, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(labels), d),
    )
    return Dataset(X, np.array(labels, dtype=float))


def format_libsvm(ds):
    """Serialize a Dataset as LIBSVM text, 9 significant digits per value."""
    lines = []
    for i in range(ds.n):
        label = ds.labels[i]
        head = f"{label:+.0f}" if label in (-1.0, 1.0) else f"{label:.9g}"
        pairs = " ".join(f"{j + 1}:{x:.9g}" for j, x in ds.row(i))
        lines.append(f"{head} {pairs}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def train_test_split(ds, fraction, seed):
    if not 0.0 < fraction < 1.0:
        raise ParameterRange(f"fraction must lie in (0, 1), got {fraction}")
    n_train = int(round(fraction * ds.n))
    if n_train == 0 or n_train == ds.n:
        raise ParameterRange(f"split of {ds.n} rows at {fraction} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))


def load_manifest(path):
    """Read ``[{name, path, d, test_path?}, ...]`` with paths relative to the file."""
    path = Path(path)
    entries = json.loads(path.read_text())
    if isinstance(entries, dict):
        entries = [entries]
    out = {}
    for e in entries:
        entry = dict(e)
        for key in ("path", "test_path"):
            if entry.get(key):
                entry[key] = str((path.parent / entry[key]).resolve())
        out[entry["name"]] = entry
    return out


def load_dataset(entry):
    """Load the train (and test, if listed) split named by a manifest entry."""
    train = parse_libsvm(entry["path"], entry["d"])
    test = parse_libsvm(entry["test_path"], entry["d"]) if entry.get("test_path") else None
    return train, test
