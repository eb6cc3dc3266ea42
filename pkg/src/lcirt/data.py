"""Loading and aggregating item-response tables."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from lcirt.errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ResponseDataset:
    """Observed response patterns with their frequencies.

    Attributes
    ----------
    patterns : (P, r) int array
        Distinct response configurations in lexicographic order.
    counts : (P,) int array
        Frequency of every pattern.
    categories : tuple of int
        Number of categories of every item.
    metadata : dict
        Free-form provenance (e.g. the generator used by the simulator).
    """

    patterns: NDArray[np.int64]
    counts: NDArray[np.int64]
    categories: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pat = np.array(self.patterns, dtype=np.int64)
        if pat.ndim == 1:
            pat = pat.reshape(1, -1) if pat.size else pat.reshape(0, len(self.categories))
        cnt = np.array(self.counts, dtype=np.int64)
        cats = tuple(int(l) for l in self.categories)
        if pat.shape[0] != cnt.shape[0]:
            raise DataError("patterns and counts differ in length")
        if pat.shape[1] != len(cats):
            raise DataError(f"patterns have {pat.shape[1]} items, categories list {len(cats)}")
        if np.any(cnt <= 0):
            raise DataError("pattern counts must be positive")
        if np.any(pat < 0) or np.any(pat >= np.asarray(cats)[None, :]):
            raise DataError("pattern entry outside its item's category range")
        if pat.shape[0] > 1:
            order = np.lexsort(pat.T[::-1])
            pat, cnt = pat[order], cnt[order]
            if np.any(np.all(pat[1:] == pat[:-1], axis=1)):
                raise DataError("duplicate patterns")
        pat.setflags(write=False)
        cnt.setflags(write=False)
        object.__setattr__(self, "patterns", pat)
        object.__setattr__(self, "counts", cnt)
        object.__setattr__(self, "categories", cats)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def r(self) -> int:
        return len(self.categories)

    @property
    def n_patterns(self) -> int:
        return len(self.counts)

    @classmethod
    def from_rows(cls, rows: ArrayLike, categories: Sequence[int] | None = None,
                  metadata: dict | None = None) -> ResponseDataset:
        """Aggregate a respondents-by-items integer matrix."""
        X = np.asarray(rows)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError("need a non-empty 2-D response table")
        if not np.issubdtype(X.dtype, np.integer):
            if not np.all(np.isfinite(X)) or not np.all(X == np.round(X)):
                raise DataError("responses must be integers")
            X = X.astype(np.int64)
        if np.any(X < 0):
            i, j = np.argwhere(X < 0)[0]
            raise DataError("negative response", row=int(i) + 1, column=int(j) + 1)
        inferred = X.max(axis=0) + 1
        if categories is None:
            cats = tuple(int(max(2, v)) for v in inferred)
        else:
            cats = tuple(int(v) for v in categories)
            if len(cats) != X.shape[1]:
                raise DataError(f"{len(cats)} category counts for {X.shape[1]} items")
            over = np.flatnonzero(inferred > np.asarray(cats))
            if over.size:
                j = int(over[0])
                i = int(np.argmax(X[:, j] >= cats[j]))
                raise DataError(f"response {X[i, j]} exceeds category count {cats[j]}",
                                row=i + 1, column=j + 1)
        pat, cnt = np.unique(X, axis=0, return_counts=True)
        return cls(pat, cnt, cats, dict(metadata or {}))

    def expand(self) -> NDArray[np.int64]:
        """One row per respondent (patterns repeated by their counts)."""
        return np.repeat(self.patterns, self.counts, axis=0)

    def category_counts(self) -> NDArray[np.float64]:
        """``(r, L)`` observed counts per item and category."""
        L = max(self.categories)
        out = np.zeros((self.r, L))
        for j in range(self.r):
            out[j] = np.bincount(self.patterns[:, j], weights=self.counts, minlength=L)[:L]
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "categories": list(self.categories),
            "patterns": [
                {"x": p.tolist(), "n": int(c)} for p, c in zip(self.patterns, self.counts)
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ResponseDataset:
        pats = d["patterns"]
        r = int(d["r"])
        P = np.array([p["x"] for p in pats], dtype=np.int64).reshape(len(pats), r)
        C = np.array([p["n"] for p in pats], dtype=np.int64)
        ds = cls(P, C, tuple(d["categories"]), dict(d.get("metadata", {})))
        if "n" in d and int(d["n"]) != ds.n:
            raise DataError(f"n={d['n']} but pattern counts sum to {ds.n}")
        return ds

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load_json(cls, path) -> ResponseDataset:
        return cls.from_dict(json.loads(Path(path).read_text()))


def read_rows(path, has_header: bool = False, drop_incomplete: bool = False) -> NDArray[np.int64]:
    """Parse a comma-separated response table into an integer matrix.

    Raises :class:`DataError` with the 1-based row/column of the first
    malformed cell.  Blank cells are missing responses: rejected unless
    ``drop_incomplete`` is set, in which case those rows are dropped.
    """
    rows: list[list[int]] = []
    width = None
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, raw in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not raw or all(not c.strip() for c in raw):
                continue
            if width is None:
                width = len(raw)
            elif len(raw) != width:
                raise DataError(f"ragged row with {len(raw)} cells, expected {width}", row=lineno)
            vals = []
            missing = False
            for col, cell in enumerate(raw, start=1):
                cell = cell.strip()
                if cell == "" or cell.upper() in ("NA", "NAN"):
                    if not drop_incomplete:
                        raise DataError("missing response", row=lineno, column=col)
                    missing = True
                    break
                try:
                    v = int(cell)
                except ValueError:
                    raise DataError(f"non-integer cell {cell!r}", row=lineno, column=col) from None
                if v < 0:
                    raise DataError(f"negative response {v}", row=lineno, column=col)
                vals.append(v)
            if missing:
                dropped += 1
                continue
            rows.append(vals)
    if dropped:
        log.info("dropped %d incomplete rows", dropped)
    if not rows:
        raise DataError("no response rows in file")
    return np.array(rows, dtype=np.int64)


def load_csv(path, has_header: bool = False, categories: Sequence[int] | None = None,
             drop_incomplete: bool = False) -> ResponseDataset:
    rows = read_rows(path, has_header=has_header, drop_incomplete=drop_incomplete)
    return ResponseDataset.from_rows(rows, categories, {"source": str(path)})


def write_csv(path, rows: ArrayLike, header: Sequence[str] | None = None) -> None:
    rows = np.asarray(rows, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        w.writerows(rows.tolist())


def marginal_distribution(data: ResponseDataset, j: int) -> NDArray[np.float64]:
    """Relative category frequencies of item ``j``."""
    l = data.categories[j]
    f = np.bincount(data.patterns[:, j], weights=data.counts, minlength=l)[:l] / data.n
    if np.count_nonzero(f) == 1:
        warnings.warn(f"item {j} has a constant response", stacklevel=2)
    return f


def raw_score(rows: ArrayLike | ResponseDataset, items: Iterable[int]) -> NDArray[np.int64]:
    """Per-respondent sum of responses over ``items``.

    For an aggregated dataset the scores follow :meth:`ResponseDataset.expand`
    order, since the original row order is gone.
    """
    X = rows.expand() if isinstance(rows, ResponseDataset) else np.asarray(rows)
    if X.ndim == 1:
        X = X[None, :]
    items = list(items)
    bad = [j for j in items if not 0 <= j < X.shape[1]]
    if bad:
        raise IndexError(f"unknown item index {bad[0]}")
    return X[:, items].sum(axis=1)
