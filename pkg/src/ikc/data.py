"""Datasets: XOR generator, UCI table ingestion, preprocessing, splits, noise.

Tabular preprocessing is fit on training rows only and replayed verbatim on
every other split:

* categorical: mode imputation, then one-hot with unknown categories mapped
  to all-zero columns;
* numerical: median imputation, then standardization (population std,
  constant columns get scale 1).
"""
from __future__ import annotations

import csv
import hashlib
import math
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .rng import stream

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SPLIT_NAMES = ("train", "val", "cal", "test")
DEFAULT_FRACTIONS = (0.6125, 0.15, 0.0875, 0.15)
NOISE_GRID = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30)


class EmptySplitError(ValueError):
    pass


class TabularFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    row_ids: np.ndarray
    feature_names: tuple = ()
    provenance: str = "external"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y).astype(np.int64)
        ids = np.asarray(self.row_ids).astype(np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or y.shape[0] != ids.shape[0]:
            raise ValueError(f"inconsistent shapes X{X.shape} y{y.shape} row_ids{ids.shape}")
        if np.unique(ids).size != ids.size:
            raise ValueError("row_ids must be unique")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be binary")
        names = tuple(self.feature_names) or tuple(f"f{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError("feature_names does not match the number of columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "row_ids", ids)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, X=self.X[idx], y=self.y[idx], row_ids=self.row_ids[idx])

    def with_labels(self, y) -> "Dataset":
        return replace(self, y=np.asarray(y))

    def concat(self, other: "Dataset") -> "Dataset":
        if other.feature_names != self.feature_names:
            raise ValueError("cannot concatenate datasets with different features")
        return replace(
            self,
            X=np.vstack([self.X, other.X]),
            y=np.concatenate([self.y, other.y]),
            row_ids=np.concatenate([self.row_ids, other.row_ids]),
        )

    def fingerprint(self) -> str:
        """Content hash of the rows (ids, features, labels)."""
        h = hashlib.sha256()
        for arr in (self.row_ids, self.X, self.y):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = DEFAULT_FRACTIONS
    seed: int = 0
    fixed_test: bool = True
    test_seed: int = 0  # seed that draws the test rows when fixed_test is on

    def __post_init__(self):
        if len(self.fractions) != 4 or abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be four values summing to 1, got {self.fractions}")
        if any(f < 0 for f in self.fractions):
            raise ValueError("split fractions must be non-negative")


@dataclass(frozen=True)
class NoiseSpec:
    flip_prob: float = 0.0
    scope: str = "train"

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 0.5:
            raise ValueError("flip_prob must lie in [0, 0.5]")
        if self.scope != "train":
            raise ValueError("label noise is only ever applied to the training split")


def gen_xor(n: int, seed: int) -> Dataset:
    """``X1, X2 ~ Bernoulli(1/2)`` independently and ``Y = X1 xor X2``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream(seed, "xor")
    X = rng.integers(0, 2, size=(n, 2))
    y = X[:, 0] ^ X[:, 1]
    return Dataset(X.astype(np.float64), y, np.arange(n), ("x1", "x2"), "xor")


def split_sizes(n: int, fractions: Sequence[float] = DEFAULT_FRACTIONS) -> dict[str, int]:
    """Floor-based sizes for val/cal/test; the remainder goes to train."""
    sizes = {name: int(math.floor(f * n + 1e-9)) for name, f in zip(SPLIT_NAMES[1:], fractions[1:])}
    sizes["train"] = n - sum(sizes.values())
    return {name: sizes[name] for name in SPLIT_NAMES}


def split_indices(n: int, spec: SplitSpec) -> dict[str, np.ndarray]:
    sizes = split_sizes(n, spec.fractions)
    empty = [k for k, v in sizes.items() if v < 1]
    if empty:
        raise EmptySplitError(f"n={n} leaves empty split(s): {', '.join(empty)}")
    test_seed = spec.test_seed if spec.fixed_test else spec.seed
    order = stream(test_seed, "split-test").permutation(n)
    test = np.sort(order[: sizes["test"]])
    rest = np.setdiff1d(np.arange(n), test)
    rest = rest[stream(spec.seed, "split").permutation(rest.size)]
    a, b = sizes["train"], sizes["train"] + sizes["val"]
    return {
        "train": np.sort(rest[:a]),
        "val": np.sort(rest[a:b]),
        "cal": np.sort(rest[b:]),
        "test": test,
    }


def split(ds: Dataset, spec: SplitSpec) -> dict[str, Dataset]:
    """Partition into train/val/cal/test Datasets."""
    return {k: ds.take(v) for k, v in split_indices(len(ds), spec).items()}


def flip_mask(n: int, spec: NoiseSpec, seed: int) -> np.ndarray:
    # rate is part of the key so each noise level draws its own mask
    return stream(seed, "label-noise", spec.flip_prob).random(n) < spec.flip_prob


def inject_label_noise(train: Dataset, spec: NoiseSpec, seed: int) -> Dataset:
    """Flip each training label independently with probability ``flip_prob``."""
    if spec.flip_prob == 0.0:
        return train
    mask = flip_mask(len(train), spec, seed)
    return train.with_labels(np.where(mask, 1 - train.y, train.y))


# --------------------------------------------------------------------------
# tabular ingestion


@dataclass(frozen=True)
class TabularSchema:
    name: str
    categorical: tuple
    numerical: tuple
    target: str
    positive: tuple
    negative: tuple = ()
    delimiter: str = ","
    header: bool = True
    columns: tuple = ()
    missing: tuple = ("?",)
    drop: tuple = ()
    skip_prefix: tuple = ()

    @classmethod
    def from_dict(cls, doc: dict) -> "TabularSchema":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**kw)


def load_schema(name_or_path) -> TabularSchema:
    """Load a bundled schema (``"adult"``, ``"bank"``) or a TOML file."""
    p = Path(str(name_or_path))
    if p.suffix == ".toml" and p.exists():
        text = p.read_text()
    else:
        text = resources.files("ikc").joinpath("schemas", f"{name_or_path}.toml").read_text()
    return TabularSchema.from_dict(tomllib.loads(text))


@dataclass
class RawTable:
    frame: pd.DataFrame  # feature columns only, missing values as NaN
    y: np.ndarray
    row_ids: np.ndarray
    schema: TabularSchema
    lines: list = field(default_factory=list)  # (file, line number) per row

    def __len__(self) -> int:
        return self.y.shape[0]


def _read_rows(path: Path, schema: TabularSchema):
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or any(stripped.startswith(p) for p in schema.skip_prefix):
                continue
            fields = next(csv.reader([line], delimiter=schema.delimiter, skipinitialspace=True))
            yield lineno, [f.strip() for f in fields]


def read_tabular(paths, schema: TabularSchema) -> RawTable:
    """Parse one or more CSV files into a raw feature table plus labels."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    records, where = [], []
    columns = list(schema.columns)
    bad: list[str] = []
    for path in map(Path, paths):
        rows = _read_rows(path, schema)
        if schema.header:
            try:
                _, hdr = next(rows)
            except StopIteration:
                raise TabularFormatError(f"{path}: empty file") from None
            if columns and hdr != columns:
                raise TabularFormatError(f"{path}: header does not match earlier files")
            columns = hdr
        for lineno, fields in rows:
            if len(fields) != len(columns):
                bad.append(f"{path.name}:{lineno} ({len(fields)} fields, expected {len(columns)})")
                continue
            records.append(fields)
            where.append((path.name, lineno))
    if bad:
        raise TabularFormatError("unparseable rows: " + "; ".join(bad[:10]) + (" ..." if len(bad) > 10 else ""))
    if schema.target not in columns:
        raise TabularFormatError(f"target column {schema.target!r} missing")
    needed = [c for c in (*schema.categorical, *schema.numerical) if c not in columns]
    if needed:
        raise TabularFormatError(f"schema columns missing from data: {needed}")

    df = pd.DataFrame(records, columns=columns, dtype=object)
    df = df.mask(df.isin(list(schema.missing)))
    df = df.drop(columns=[c for c in schema.drop if c in df.columns])

    target = df[schema.target]
    pos = target.isin(schema.positive)
    neg = target.isin(schema.negative) if schema.negative else ~pos
    unknown = ~(pos | neg)
    if unknown.any():
        lines = [f"{where[i][0]}:{where[i][1]}" for i in np.flatnonzero(unknown.to_numpy())[:10]]
        raise TabularFormatError(f"unrecognized target values at {', '.join(lines)}")

    feats = df[list(schema.categorical) + list(schema.numerical)].copy()
    for col in schema.numerical:
        num = pd.to_numeric(feats[col], errors="coerce")
        broken = num.isna() & feats[col].notna()
        if broken.any():
            lines = [f"{where[i][0]}:{where[i][1]}" for i in np.flatnonzero(broken.to_numpy())[:10]]
            raise TabularFormatError(f"non-numeric values in {col!r} at {', '.join(lines)}")
        feats[col] = num.astype(np.float64)
    return RawTable(feats, pos.to_numpy().astype(np.int64), np.arange(len(df)), schema, where)


class EmptyCategoryError(ValueError):
    pass


class TabularPreprocessor:
    """Impute/encode/standardize with statistics from the fitting rows only."""

    def __init__(self, schema: TabularSchema):
        self.schema = schema
        self._ct = None

    def fit(self, raw: RawTable, rows: Optional[Iterable[int]] = None) -> "TabularPreprocessor":
        from sklearn.compose import ColumnTransformer
        from sklearn.impute import SimpleImputer
        from sklearn.pipeline import make_pipeline
        from sklearn.preprocessing import OneHotEncoder, StandardScaler

        frame = raw.frame if rows is None else raw.frame.iloc[np.asarray(list(rows), dtype=np.int64)]
        cats, nums = list(self.schema.categorical), list(self.schema.numerical)
        empty = [c for c in cats + nums if frame[c].isna().all()]
        if empty:
            raise EmptyCategoryError(f"columns with no observed values on the fitting rows: {empty}")
        transformers = []
        if cats:
            transformers.append(("cat", make_pipeline(
                SimpleImputer(strategy="most_frequent", missing_values=np.nan),
                OneHotEncoder(handle_unknown="ignore", sparse_output=False),
            ), cats))
        if nums:
            transformers.append(("num", make_pipeline(SimpleImputer(strategy="median"), StandardScaler()), nums))
        self._ct = ColumnTransformer(transformers, remainder="drop", verbose_feature_names_out=False)
        self._ct.fit(frame)
        return self

    @property
    def feature_names(self) -> tuple:
        return tuple(str(c) for c in self._ct.get_feature_names_out())

    def transform(self, raw: RawTable) -> Dataset:
        if self._ct is None:
            raise RuntimeError("fit the preprocessor first")
        X = np.asarray(self._ct.transform(raw.frame), dtype=np.float64)
        return Dataset(X, raw.y, raw.row_ids, self.feature_names, raw.schema.name)


def load_tabular(paths, schema, fit_rows: Optional[Iterable[int]] = None) -> Dataset:
    """Read, clean and encode a UCI table.

    ``fit_rows`` are the positions of the training rows; preprocessing
    statistics come from them only. Without it every row is used, which
    is only appropriate for inspection, not for evaluation.
    """
    if not isinstance(schema, TabularSchema):
        schema = load_schema(schema)
    raw = read_tabular(paths, schema)
    return TabularPreprocessor(schema).fit(raw, fit_rows).transform(raw)


def write_matrix(ds: Dataset, path) -> None:
    """Canonical processed matrix: ``row_id,f1..fd,label``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row_id", *(f"f{j + 1}" for j in range(ds.d)), "label"])
        for rid, x, y in zip(ds.row_ids, ds.X, ds.y):
            w.writerow([int(rid), *(repr(float(v)) for v in x), int(y)])


def read_matrix(path, provenance: str = "external") -> Dataset:
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns[:1]) != ["row_id"] or df.columns[-1] != "label":
        raise TabularFormatError(f"{path}: expected columns row_id,f1..fd,label")
    X = df.iloc[:, 1:-1].to_numpy(dtype=np.float64)
    return Dataset(X, df["label"].to_numpy(), df["row_id"].to_numpy(), tuple(df.columns[1:-1]), provenance)
