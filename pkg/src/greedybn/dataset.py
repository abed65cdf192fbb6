"""Typed columnar tables: CSV loading, train/test splitting, moments.

Discrete columns are stored as 0-based level indices in one column-major
``int32`` matrix and continuous columns in one column-major ``float64``
matrix, so every per-node statistic reads contiguous memory.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DISCRETE = "discrete"
CONTINUOUS = "continuous"

_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class DataError(ValueError):
    """Malformed input data or schema."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    levels: tuple[str, ...] = ()

    @property
    def nlevels(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if any(not nm for nm in names):
            raise DataError("column names must be non-empty")
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        for c in self.columns:
            if c.kind not in (DISCRETE, CONTINUOUS):
                raise DataError(f"column {c.name!r}: unknown kind {c.kind!r}")
            if c.kind == DISCRETE:
                if len(c.levels) < 2:
                    raise DataError(f"discrete column {c.name!r} needs at least 2 levels")
                if len(set(c.levels)) != len(c.levels):
                    raise DataError(f"discrete column {c.name!r} has repeated levels")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def __getitem__(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        out = []
        for c in self.columns:
            entry = {"name": c.name, "kind": c.kind}
            if c.kind == DISCRETE:
                entry["levels"] = list(c.levels)
            out.append(entry)
        return {"columns": out}

    @classmethod
    def from_json(cls, obj: dict) -> "Schema":
        try:
            cols = tuple(
                Column(e["name"], e["kind"], tuple(e.get("levels", ()))) for e in obj["columns"]
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"invalid schema document: {exc}") from exc
        return cls(cols)


def load_schema(path) -> Schema:
    with open(path) as fh:
        return Schema.from_json(json.load(fh))


def save_schema(schema: Schema, path) -> None:
    with open(path, "w") as fh:
        json.dump(schema.to_json(), fh, indent=2)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


class Dataset:
    """Immutable table with a fixed schema.

    ``index[name]`` gives ``(kind, position)`` where position is the column
    index inside :attr:`disc` or :attr:`cont`.
    """

    def __init__(self, schema: Schema, disc: np.ndarray, cont: np.ndarray):
        self.schema = schema
        self.disc = np.asfortranarray(disc, dtype=np.int32)
        self.cont = np.asfortranarray(cont, dtype=np.float64)
        self.disc.flags.writeable = False
        self.cont.flags.writeable = False
        self.n = self.disc.shape[0]
        if self.cont.shape[0] != self.n:
            raise DataError("all columns must have the same length")
        self.index: dict[str, tuple[str, int]] = {}
        nd = nc = 0
        for c in schema.columns:
            if c.kind == DISCRETE:
                self.index[c.name] = (DISCRETE, nd)
                nd += 1
            else:
                self.index[c.name] = (CONTINUOUS, nc)
                nc += 1
        if nd != self.disc.shape[1] or nc != self.cont.shape[1]:
            raise DataError("column matrices do not match the schema")
        for c in schema.columns:
            if c.kind == DISCRETE and self.n:
                col = self.disc[:, self.index[c.name][1]]
                if col.min() < 0 or col.max() >= c.nlevels:
                    raise DataError(f"column {c.name!r}: level index out of range")

    @classmethod
    def from_columns(cls, schema: Schema, columns: dict) -> "Dataset":
        """Build from a mapping name -> level-index or float vector."""
        n = len(next(iter(columns.values()))) if columns else 0
        disc = [np.asarray(columns[c.name]) for c in schema.columns if c.kind == DISCRETE]
        cont = [np.asarray(columns[c.name], dtype=float) for c in schema.columns if c.kind == CONTINUOUS]
        for v in disc + cont:
            if len(v) != n:
                raise DataError("all columns must have the same length")
        d = np.column_stack(disc) if disc else np.zeros((n, 0), np.int32)
        x = np.column_stack(cont) if cont else np.zeros((n, 0))
        return cls(schema, d, x)

    @property
    def names(self) -> tuple[str, ...]:
        return self.schema.names

    def kind(self, name: str) -> str:
        return self.index[name][0]

    def column(self, name: str) -> np.ndarray:
        kind, pos = self.index[name]
        return self.disc[:, pos] if kind == DISCRETE else self.cont[:, pos]

    def labels(self, name: str) -> list[str]:
        levels = self.schema[name].levels
        return [levels[i] for i in self.column(name)]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.schema, self.disc[rows], self.cont[rows])

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, columns={list(self.names)})"


def _is_decimal(s: str) -> bool:
    return bool(_DECIMAL.match(s)) and math.isfinite(float(s))


def load_csv(path, schema: Schema | None = None) -> Dataset:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: missing header row")
    header, body = rows[0], rows[1:]
    width = len(header)
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        for name, value in zip(header, row):
            if value == "":
                raise DataError(f"{path}:{lineno}: missing value in column {name!r}")
    raw = {name: [row[k] for row in body] for k, name in enumerate(header)}

    if schema is None:
        cols = []
        for name in header:
            values = raw[name]
            if values and all(_is_decimal(v) for v in values):
                cols.append(Column(name, CONTINUOUS))
            else:
                levels = tuple(dict.fromkeys(values))
                cols.append(Column(name, DISCRETE, levels))
        schema = Schema(tuple(cols))
    elif list(schema.names) != header:
        raise DataError(f"{path}: header {header} does not match schema {list(schema.names)}")

    columns = {}
    for c in schema.columns:
        values = raw[c.name]
        if c.kind == CONTINUOUS:
            try:
                arr = np.array([float(v) for v in values], dtype=float)
            except ValueError as exc:
                raise DataError(f"{path}: column {c.name!r}: {exc}") from exc
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{path}: column {c.name!r} holds a non-finite value")
            columns[c.name] = arr
        else:
            lookup = {lv: i for i, lv in enumerate(c.levels)}
            try:
                columns[c.name] = np.array([lookup[v] for v in values], dtype=np.int32)
            except KeyError as exc:
                raise DataError(f"{path}: column {c.name!r}: undeclared level {exc.args[0]!r}") from None
    return Dataset.from_columns(schema, columns)


def _fmt(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def write_csv(ds: Dataset, path) -> None:
    cells = []
    for c in ds.schema.columns:
        if c.kind == DISCRETE:
            cells.append(ds.labels(c.name))
        else:
            cells.append([_fmt(float(v)) for v in ds.column(c.name)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.names)
        w.writerows(zip(*cells))


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded shuffle; the first round-half-up(n * fraction) rows form the test set."""
    n_test = math.floor(ds.n * spec.test_fraction + 0.5)
    if n_test < 1 or ds.n - n_test < 1:
        raise ValueError(f"degenerate split: n={ds.n}, test_fraction={spec.test_fraction}")
    perm = np.random.default_rng(spec.seed).permutation(ds.n)
    return ds.take(perm[n_test:]), ds.take(perm[:n_test])


def moments(ds: Dataset, names, row_filter=None) -> tuple[np.ndarray, np.ndarray]:
    """Means and divisor-n covariance of continuous columns ``names``."""
    pos = []
    for name in names:
        kind, p = ds.index[name]
        if kind != CONTINUOUS:
            raise DataError(f"column {name!r} is not continuous")
        pos.append(p)
    X = ds.cont[:, pos]
    if row_filter is not None:
        X = X[np.asarray(row_filter)]
    if X.shape[0] < 1:
        raise DataError("no rows selected")
    mean = X.mean(axis=0)
    Z = X - mean
    cov = Z.T @ Z / X.shape[0]
    return mean, (cov + cov.T) / 2.0
