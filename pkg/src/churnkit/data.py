"""Telco churn table: schema, CSV ingestion, preprocessing checks, feature
selection and the seeded train/test split."""

from __future__ import annotations

import csv
import hashlib
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConversionError, DataError, SchemaError

TEXT, INTEGER, REAL, BOOLEAN = "text", "integer", "real", "boolean"

# Canonical column names and kinds, in the public file's order.
TELCO_SCHEMA: tuple[tuple[str, str], ...] = (
    ("State", TEXT),
    ("Account Length", INTEGER),
    ("Area Code", INTEGER),
    ("Phone", TEXT),
    ("Intl Plan", BOOLEAN),
    ("VMail Plan", BOOLEAN),
    ("VMail Message", INTEGER),
    ("Day Mins", REAL),
    ("Day Calls", INTEGER),
    ("Day Charge", REAL),
    ("Eve Mins", REAL),
    ("Eve Calls", INTEGER),
    ("Eve Charge", REAL),
    ("Night Mins", REAL),
    ("Night Calls", INTEGER),
    ("Night Charge", REAL),
    ("Intl Mins", REAL),
    ("Intl Calls", INTEGER),
    ("Intl Charge", REAL),
    ("CustServ Calls", INTEGER),
    ("Churn", BOOLEAN),
)

LABEL = "Churn"

DEFAULT_DROP = (
    "Phone",
    "State",
    "Day Charge",
    "Eve Charge",
    "Night Charge",
    "Intl Charge",
    "VMail Plan",
    "VMail Message",
)

# Header spellings seen in circulating copies of the dataset.
_ALIASES = {
    "intlplan": "Intl Plan",
    "internationalplan": "Intl Plan",
    "htplan": "Intl Plan",
    "vmailplan": "VMail Plan",
    "voicemailplan": "VMail Plan",
    "viralplan": "VMail Plan",
    "vmailmessage": "VMail Message",
    "viralmessage": "VMail Message",
    "custservcalls": "CustServ Calls",
    "customercalls": "CustServ Calls",
    "customerservicecalls": "CustServ Calls",
    "evenmins": "Eve Mins",
    "evencalls": "Eve Calls",
    "evencharge": "Eve Charge",
    "churn": "Churn",
}

MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "?"})

_TRUE = frozenset({"yes", "true", "true.", "1"})
_FALSE = frozenset({"no", "false", "false.", "0"})


def _norm(name):
    return re.sub(r"[^a-z0-9]", "", name.lower())


def canonical_name(header, schema=TELCO_SCHEMA):
    key = _norm(header)
    for name, _ in schema:
        if _norm(name) == key:
            return name
    alias = _ALIASES.get(key)
    if alias is not None and any(alias == name for name, _ in schema):
        return alias
    return None


@dataclass(frozen=True)
class RawTable:
    """Rows of cells under named, typed columns.

    Cells are the raw strings after ``load_csv``; ``convert_types`` replaces
    boolean-like cells by 0/1 ints and numeric cells by floats.
    """

    columns: tuple[tuple[str, str], ...]
    rows: tuple[tuple, ...]

    def __post_init__(self):
        names = self.names
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in {names}")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise SchemaError(f"row {i + 1} has {len(row)} cells, expected {width}")

    @property
    def names(self):
        return tuple(name for name, _ in self.columns)

    @property
    def n_rows(self):
        return len(self.rows)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown column {name!r}") from None

    def column(self, name):
        j = self.index(name)
        return [row[j] for row in self.rows]


@dataclass(frozen=True)
class FeatureMatrix:
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise DataError(f"matrix shape {values.shape} does not match {len(self.names)} names")
        if not np.all(np.isfinite(values)):
            raise DataError("feature matrix contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def take(self, idx):
        return FeatureMatrix(self.names, self.values[idx])


def as_labels(y):
    """Validate a 0/1 label vector and return it as a read-only int64 array."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError("labels must be one-dimensional")
    if y.size and not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0 or 1")
    y = y.astype(np.int64)
    y.setflags(write=False)
    return y


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise DataError("seed must be non-negative")


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    test_idx: np.ndarray
    X_train: FeatureMatrix
    y_train: np.ndarray
    X_test: FeatureMatrix
    y_test: np.ndarray
    class_counts: dict = field(default_factory=dict)


def load_csv(path, schema=TELCO_SCHEMA) -> RawTable:
    """Read a headered CSV whose columns are exactly the schema's (any order).

    Header cells are matched to canonical names through a normalising alias
    table, so ``Int'l Plan`` and ``Churn?`` are accepted.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    kinds = dict(schema)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row missing") from None
        names = []
        for h in header:
            name = canonical_name(h.strip(), schema)
            if name is None:
                raise SchemaError(f"{path}: unexpected column {h!r}")
            names.append(name)
        missing = [n for n, _ in schema if n not in names]
        if missing:
            raise SchemaError(f"{path}: header lacks columns {missing}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise SchemaError(
                    f"{path}: line {lineno} (row {lineno - 1}) has {len(row)} cells, "
                    f"expected {len(names)}"
                )
            rows.append(tuple(cell.strip() for cell in row))
    return RawTable(tuple((n, kinds[n]) for n in names), tuple(rows))


def is_missing(cell):
    if isinstance(cell, str):
        return cell.strip().lower() in MISSING_TOKENS
    return isinstance(cell, float) and math.isnan(cell)


def check_missing(table: RawTable) -> dict[str, int]:
    """Per-column count of empty/NA cells."""
    counts = {name: 0 for name in table.names}
    for row in table.rows:
        for name, cell in zip(table.names, row):
            if is_missing(cell):
                counts[name] += 1
    return counts


def _to_bool(cell, name, row):
    if isinstance(cell, (int, np.integer)) and not isinstance(cell, bool) and cell in (0, 1):
        return int(cell)
    if isinstance(cell, str):
        s = cell.strip().lower()
        if s in _TRUE:
            return 1
        if s in _FALSE:
            return 0
    raise ConversionError(name, row, cell)


def _to_real(cell, name, row):
    if isinstance(cell, float):
        return cell
    if isinstance(cell, (int, np.integer)) and not isinstance(cell, bool):
        return float(cell)
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise ConversionError(name, row, cell) from None
    if not math.isfinite(value):
        raise ConversionError(name, row, cell)
    return value


def convert_types(table: RawTable) -> RawTable:
    """Boolean-like columns to 0/1 ints, integer/real columns to floats.

    Text columns are left alone. Idempotent.
    """
    converters = []
    for name, kind in table.columns:
        if kind == BOOLEAN:
            converters.append(_to_bool)
        elif kind in (INTEGER, REAL):
            converters.append(_to_real)
        else:
            converters.append(None)
    rows = []
    for i, row in enumerate(table.rows, start=1):
        rows.append(
            tuple(
                cell if conv is None else conv(cell, name, i)
                for conv, name, cell in zip(converters, table.names, row)
            )
        )
    return RawTable(table.columns, tuple(rows))


def check_duplicates(table: RawTable, key_column="Phone") -> dict[str, list[int]]:
    """Key values occurring more than once, mapped to their 0-based row indices."""
    j = table.index(key_column)
    seen = defaultdict(list)
    for i, row in enumerate(table.rows):
        seen[row[j]].append(i)
    return {str(k): v for k, v in seen.items() if len(v) > 1}


def select_features(table: RawTable, drop_list=DEFAULT_DROP, label=LABEL):
    """Drop ``drop_list`` and the label; return ``(FeatureMatrix, labels)``.

    Remaining columns keep their input order. Every kept cell must be numeric
    (run ``convert_types`` first); text cells raise ``ConversionError``.
    """
    drop = list(drop_list)
    if label in drop:
        raise SchemaError(f"cannot drop the label column {label!r}")
    for name in drop:
        table.index(name)
    ylab = table.index(label)
    keep = [j for j, name in enumerate(table.names) if name not in drop and j != ylab]
    names = tuple(table.names[j] for j in keep)
    values = np.empty((table.n_rows, len(keep)), dtype=np.float64)
    y = np.empty(table.n_rows, dtype=np.int64)
    for i, row in enumerate(table.rows):
        for k, j in enumerate(keep):
            values[i, k] = _to_real(row[j], table.names[j], i + 1)
        y[i] = _to_bool(row[ylab], label, i + 1)
    return FeatureMatrix(names, values), as_labels(y)


def train_test_split(X: FeatureMatrix, y, spec: SplitSpec = SplitSpec()) -> Split:
    """Seeded shuffle, then the first ``round(n*fraction)`` rows train.

    With ``spec.stratified`` each class is shuffled and cut separately.
    """
    y = as_labels(y)
    n = X.n
    if y.shape[0] != n:
        raise DataError(f"X has {n} rows but y has {y.shape[0]}")
    if n < 2:
        raise DataError("need at least 2 rows to split")
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        train_parts, test_parts = [], []
        for cls in (0, 1):
            idx = np.flatnonzero(y == cls)
            idx = idx[rng.permutation(idx.size)]
            k = int(round(idx.size * spec.train_fraction))
            train_parts.append(idx[:k])
            test_parts.append(idx[k:])
        train_idx = np.sort(np.concatenate(train_parts))
        test_idx = np.sort(np.concatenate(test_parts))
    else:
        perm = rng.permutation(n)
        k = int(round(n * spec.train_fraction))
        train_idx = np.sort(perm[:k])
        test_idx = np.sort(perm[k:])
    if train_idx.size == 0 or test_idx.size == 0:
        raise DataError(f"split of {n} rows at {spec.train_fraction} leaves an empty partition")
    counts = {
        "train": {"0": int(np.sum(y[train_idx] == 0)), "1": int(np.sum(y[train_idx] == 1))},
        "test": {"0": int(np.sum(y[test_idx] == 0)), "1": int(np.sum(y[test_idx] == 1))},
    }
    return Split(
        train_idx,
        test_idx,
        X.take(train_idx),
        as_labels(y[train_idx]),
        X.take(test_idx),
        as_labels(y[test_idx]),
        counts,
    )


def index_hash(idx):
    """Short digest of a row-index set, used to audit train/test separation."""
    arr = np.sort(np.asarray(idx, dtype=np.int64))
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


def make_synthetic_telco(n=3333, seed=0) -> RawTable:
    """Seeded stand-in for the public telco file (same 21 columns).

    About 14.5% churners; churn odds rise with day minutes, service calls and
    the international plan. Useful for offline runs and tests only.
    """
    rng = np.random.default_rng(seed)
    states = ["CA", "NY", "TX", "WV", "IN", "MA", "MD", "LA", "AL", "IL", "OH", "NJ"]
    rows = []
    acct = rng.integers(1, 244, n)
    area = rng.choice([408, 415, 510], n, p=[0.25, 0.5, 0.25])
    intl = rng.random(n) < 0.10
    vmail = rng.random(n) < 0.27
    vmsg = np.where(vmail, rng.integers(10, 51, n), 0)
    day_m = np.clip(rng.normal(180, 54, n), 0, 350)
    eve_m = np.clip(rng.normal(200, 50, n), 0, 364)
    night_m = np.clip(rng.normal(200, 50, n), 23, 395)
    intl_m = np.clip(rng.normal(10.2, 2.8, n), 0, 20)
    calls = rng.integers(40, 160, (n, 4))
    intl_calls = rng.poisson(4.5, n)
    cs = rng.poisson(1.56, n)
    # threshold-shaped effects, like the public data: heavy day usage,
    # repeated service calls, international plan with odd intl usage
    logit = (
        -3.05
        + 4.0 * (day_m + 0.3 * (eve_m - 200) > 255)
        + 3.2 * ((cs >= 4) & (day_m < 220))
        + 3.0 * (intl & ((intl_calls < 3) | (intl_m > 13)))
        - 1.2 * vmail
        + 0.01 * (day_m - 180)
    )
    churn = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))
    phones = rng.choice(9_000_000, n, replace=False) + 1_000_000
    yes_no = ("no", "yes")
    for i in range(n):
        p = f"{phones[i] // 10000 % 1000:03d}-{phones[i] % 10000:04d}"
        rows.append(
            (
                states[rng.integers(len(states))],
                str(int(acct[i])),
                str(int(area[i])),
                p,
                yes_no[int(intl[i])],
                yes_no[int(vmail[i])],
                str(int(vmsg[i])),
                f"{day_m[i]:.1f}",
                str(int(calls[i, 0])),
                f"{day_m[i] * 0.17:.2f}",
                f"{eve_m[i]:.1f}",
                str(int(calls[i, 1])),
                f"{eve_m[i] * 0.085:.2f}",
                f"{night_m[i]:.1f}",
                str(int(calls[i, 2])),
                f"{night_m[i] * 0.045:.2f}",
                f"{intl_m[i]:.1f}",
                str(int(intl_calls[i])),
                f"{intl_m[i] * 0.27:.2f}",
                str(int(cs[i])),
                "True." if churn[i] else "False.",
            )
        )
    return RawTable(TELCO_SCHEMA, tuple(rows))


def write_csv(table: RawTable, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.names)
        w.writerows(table.rows)
