"""Synthetic generators, semi-synthetic outcome injection, and tabular ingestion.

Everything downstream consumes the same binary Dataset shape: a sensitive bit
S, binary features X, a decision label H, and (usually) an outcome label Y.
The canonical on-disk form is a headered CSV `S,X_1..X_n,H[,Y]` of 0/1 values;
preprocessing real tables additionally emits a sidecar schema so the canonical
file can be re-ingested unchanged.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

CASE_MULTIPLIER = {"I": 1.0, "II": -0.5, "III": -1.0, "IV": -1.5, "V": 0.0}
BASE_LOW = 0.3   # Pr(Y=1 | H=0) before any group offset
BASE_HIGH = 0.9  # Pr(Y=1 | H=1)


@dataclass
class Dataset:
    s: np.ndarray                     # (n,) in {0,1}
    x: np.ndarray                     # (n, k) in {0,1}
    h: np.ndarray                     # (n,) in {0,1}
    y: np.ndarray | None              # (n,) in {0,1}, absent until injected
    feature_names: list[str] | None = None
    sensitive_name: str = "S"

    def __post_init__(self) -> None:
        self.s = np.asarray(self.s, dtype=np.int8)
        self.x = np.asarray(self.x, dtype=np.int8)
        self.h = np.asarray(self.h, dtype=np.int8)
        if self.x.ndim != 2:
            raise ValueError("x must be 2-D (n rows, k features)")
        if self.feature_names is None:
            self.feature_names = [f"X_{j + 1}" for j in range(self.x.shape[1])]
        n = self.s.shape[0]
        if self.x.shape[0] != n or self.h.shape[0] != n:
            raise ValueError("column lengths disagree")
        if self.x.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length must match x width")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.int8)
            if self.y.shape[0] != n:
                raise ValueError("column lengths disagree")
        for name, col in (("s", self.s), ("x", self.x), ("h", self.h),
                          ("y", self.y)):
            if col is not None and not np.isin(col, (0, 1)).all():
                raise ValueError(f"{name} must be binary")

    def __len__(self) -> int:
        return int(self.s.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.x.shape[1])

    def subset(self, idx: np.ndarray) -> "Dataset":
        y = None if self.y is None else self.y[idx]
        return Dataset(self.s[idx], self.x[idx], self.h[idx], y,
                       list(self.feature_names), self.sensitive_name)

    def require_both_groups(self) -> None:
        if not (0 < self.s.sum() < len(self)):
            raise ValueError("dataset must contain both S groups")


# -- synthetic generators ----------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    """Finite Bernoulli tables defining a synthetic law over (S, X, H, Y)."""

    name: str
    p_s1: float
    p_x1: tuple[float, ...]                       # independent feature rates
    h_table: dict[tuple[int, ...], float]         # key (s,) -> Pr(H=1)
    y_table: dict[tuple[int, tuple[int, ...], int], float]  # (s, x, h) -> Pr(Y=1)


THM42_SPEC = GeneratorSpec(
    name="thm42",
    p_s1=0.5,
    p_x1=(0.5,),
    h_table={(0,): 0.6, (1,): 0.3},
    y_table={(s, (x,), h): p
             for s in (0, 1)
             for (x, h), p in {(0, 0): 0.3, (0, 1): 0.8,
                               (1, 0): 0.2, (1, 1): 0.6}.items()},
)

THM43_SPEC = GeneratorSpec(
    name="thm43",
    p_s1=0.5,
    p_x1=(),
    h_table={(0,): 0.01, (1,): 0.6},
    y_table={(s, (), h): float(h) for s in (0, 1) for h in (0, 1)},
)


def _sample_spec(spec: GeneratorSpec, n: int, seed) -> Dataset:
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    s = (rng.random(n) < spec.p_s1).astype(np.int8)
    x = np.empty((n, len(spec.p_x1)), dtype=np.int8)
    for j, p in enumerate(spec.p_x1):
        x[:, j] = rng.random(n) < p
    p_h = np.empty(n)
    for key, p in spec.h_table.items():
        p_h[s == key[0]] = p
    h = (rng.random(n) < p_h).astype(np.int8)
    p_y = np.empty(n)
    for (ks, kx, kh), p in spec.y_table.items():
        mask = (s == ks) & (h == kh)
        if kx:
            mask &= (x == np.asarray(kx, dtype=np.int8)).all(axis=1)
        p_y[mask] = p
    y = (rng.random(n) < p_y).astype(np.int8)
    names = [f"X_{j + 1}" for j in range(len(spec.p_x1))]
    return Dataset(s, x, h, y, names)


def gen_thm42_data(n: int, seed) -> Dataset:
    """S, X ~ Bern(0.5); H rate 0.6/0.3 by group; Y from the (X, H) table."""
    return _sample_spec(THM42_SPEC, n, seed)


def gen_thm43_data(n: int, seed) -> Dataset:
    """No features; H rate 0.01/0.6 by group; Y equals H."""
    return _sample_spec(THM43_SPEC, n, seed)


# -- semi-synthetic outcome injection ----------------------------------------

@dataclass(frozen=True)
class OutcomeCaseConfig:
    """How to synthesize Y from existing H labels for one of Cases I-V.

    b_param shifts the Y|H base rates (0.3, 0.9) on one S group: the S=1
    group when c_param > 0 (adding b), the S=0 group when c_param < 0
    (subtracting b).  clip, when set, bounds the shifted probabilities to
    [0, clip] by clipping b itself; Case V ignores the tables and copies H.
    """

    case: str
    a_param: float
    b_param: float
    c_param: float
    clip: float | None = None

    def __post_init__(self) -> None:
        if self.case not in CASE_MULTIPLIER:
            raise ValueError(f"unknown case {self.case!r}")
        if self.case == "V":
            return
        for p in self.shifted_probs():
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"shifted probability {p:.4f} outside [0,1]")

    def effective_b(self) -> float:
        """b after clipping so every shifted probability stays in range."""
        b = self.b_param
        if self.clip is None:
            return b
        hi = self.clip
        if self.c_param > 0:
            # probabilities BASE + b must lie in [0, hi]
            return float(np.clip(b, -BASE_LOW, hi - BASE_HIGH))
        # probabilities BASE - b must lie in [0, hi]
        return float(np.clip(b, BASE_HIGH - hi, BASE_LOW))

    def shifted_probs(self) -> tuple[float, float]:
        """(Pr(Y=1|H=0), Pr(Y=1|H=1)) for the group receiving the offset."""
        b = self.effective_b()
        if self.c_param > 0:
            return (BASE_LOW + b, BASE_HIGH + b)
        if self.c_param < 0:
            return (BASE_LOW - b, BASE_HIGH - b)
        return (BASE_LOW, BASE_HIGH)


def measure_c(dataset: Dataset) -> float:
    """Empirical Pr(H=1|S=1) - Pr(H=1|S=0)."""
    dataset.require_both_groups()
    s = dataset.s.astype(bool)
    return float(dataset.h[s].mean() - dataset.h[~s].mean())


def make_case_config(case: str, c_param: float, a_param: float | None = None,
                     clip: float | None = None) -> OutcomeCaseConfig:
    if case not in CASE_MULTIPLIER:
        raise ValueError(f"unknown case {case!r}")
    if a_param is None:
        a_param = 1.0 if case == "V" else BASE_HIGH - BASE_LOW
    b = CASE_MULTIPLIER[case] * a_param * c_param
    return OutcomeCaseConfig(case, a_param, b, c_param, clip)


def inject_outcome(dataset: Dataset, config: OutcomeCaseConfig, seed) -> Dataset:
    """Replace Y with a draw from the case's Y|H tables; never touches s/x/h."""
    if config.case == "V":
        return replace_y(dataset, dataset.h.copy())
    rng = np.random.default_rng(seed)
    b = config.effective_b()
    n = len(dataset)
    p = np.where(dataset.h == 1, BASE_HIGH, BASE_LOW).astype(np.float64)
    if config.c_param > 0:
        p[dataset.s == 1] += b
    elif config.c_param < 0:
        p[dataset.s == 0] -= b
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("shifted probability outside [0,1]; set clip")
    y = (rng.random(n) < p).astype(np.int8)
    return replace_y(dataset, y)


def replace_y(dataset: Dataset, y: np.ndarray) -> Dataset:
    return Dataset(dataset.s, dataset.x, dataset.h, y,
                   list(dataset.feature_names), dataset.sensitive_name)


# -- canonical CSV -----------------------------------------------------------

def write_canonical_csv(dataset: Dataset, path) -> None:
    """Header S,X_1..X_n,H[,Y]; one 0/1 row per record; LF newlines."""
    k = dataset.n_features
    header = ["S"] + [f"X_{j + 1}" for j in range(k)] + ["H"]
    cols = [dataset.s] + [dataset.x[:, j] for j in range(k)] + [dataset.h]
    if dataset.y is not None:
        header.append("Y")
        cols.append(dataset.y)
    mat = np.column_stack(cols)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in mat:
        buf.write(",".join(str(int(v)) for v in row) + "\n")
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_canonical_csv(path) -> Dataset:
    df = pd.read_csv(path)
    cols = list(df.columns)
    if not cols or cols[0] != "S" or "H" not in cols:
        raise ValueError("not a canonical dataset CSV (need S ... H [Y])")
    has_y = cols[-1] == "Y"
    feat = cols[1:-2] if has_y else cols[1:-1]
    if cols[1 + len(feat)] != "H":
        raise ValueError("H column must follow the feature block")
    return Dataset(
        df["S"].to_numpy(),
        df[feat].to_numpy() if feat else np.empty((len(df), 0), dtype=np.int8),
        df["H"].to_numpy(),
        df["Y"].to_numpy() if has_y else None,
        feat,
    )


# -- real-table preprocessing ------------------------------------------------

KINDS = ("categorical", "numeric", "binary", "sensitive", "target",
         "outcome", "drop")


@dataclass
class ColumnSpec:
    """One schema line: `name kind [key=value ...]`.

    rule (sensitive only): median | binary | gt:<v> | ge:<v> | eq:<text>
    keep (sensitive only): numeric | categorical, to also emit the column
    as an ordinary feature.  values / threshold pin the encoding so a saved
    schema reapplies identically.
    """

    name: str
    kind: str
    rule: str | None = None
    keep: str | None = None
    values: list[str] | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")

    def format(self) -> str:
        parts = [self.name, self.kind]
        if self.rule:
            parts.append(f"rule={self.rule}")
        if self.keep:
            parts.append(f"keep={self.keep}")
        if self.values is not None:
            parts.append("values=" + "|".join(self.values))
        if self.threshold is not None:
            parts.append(f"threshold={self.threshold!r}")
        return " ".join(parts)


def parse_schema(text: str) -> list[ColumnSpec]:
    specs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"schema line {lineno}: need `name kind`")
        spec = ColumnSpec(parts[0], parts[1])
        for extra in parts[2:]:
            key, _, val = extra.partition("=")
            if key == "rule":
                spec.rule = val
            elif key == "keep":
                spec.keep = val
            elif key == "values":
                spec.values = val.split("|")
            elif key == "threshold":
                spec.threshold = float(val)
            else:
                raise ValueError(f"schema line {lineno}: unknown key {key!r}")
        specs.append(spec)
    return specs


def load_schema(path) -> list[ColumnSpec]:
    with open(path) as fh:
        return parse_schema(fh.read())


def save_schema(specs: list[ColumnSpec], path) -> None:
    with open(path, "w", newline="") as fh:
        for spec in specs:
            fh.write(spec.format() + "\n")


def read_raw_table(path, schema: list[ColumnSpec]) -> pd.DataFrame:
    """Headered CSV, or headerless whitespace/comma table in schema order."""
    names = [c.name for c in schema]
    probe = pd.read_csv(path, sep=None, engine="python", nrows=1, header=None)
    first = [str(v).strip() for v in probe.iloc[0]]
    if set(first) >= set(names):
        df = pd.read_csv(path, sep=None, engine="python",
                         skipinitialspace=True)
        df.columns = [str(c).strip() for c in df.columns]
        return df
    if len(first) != len(names):
        raise ValueError(
            f"raw table has {len(first)} columns, schema lists {len(names)}")
    return pd.read_csv(path, sep=None, engine="python", header=None,
                       names=names, skipinitialspace=True)


def _drop_missing(df: pd.DataFrame) -> pd.DataFrame:
    df = df.replace("?", np.nan)
    df = df.replace(r"^\s*\?\s*$", np.nan, regex=True)
    return df.dropna(axis=0)


def _binarize_numeric(col: pd.Series, spec: ColumnSpec) -> np.ndarray:
    vals = pd.to_numeric(col)
    if spec.threshold is None:
        spec.threshold = float(vals.median())
    return (vals.to_numpy() >= spec.threshold).astype(np.int8)


def _sensitive_bits(col: pd.Series, spec: ColumnSpec) -> np.ndarray:
    rule = spec.rule or "median"
    if rule == "median":
        return _binarize_numeric(col, spec)
    if rule == "binary":
        return pd.to_numeric(col).to_numpy().astype(np.int8)
    op, _, arg = rule.partition(":")
    if op == "gt":
        return (pd.to_numeric(col).to_numpy() > float(arg)).astype(np.int8)
    if op == "ge":
        return (pd.to_numeric(col).to_numpy() >= float(arg)).astype(np.int8)
    if op == "eq":
        return (col.astype(str).str.strip() == arg).to_numpy().astype(np.int8)
    raise ValueError(f"unknown sensitive rule {rule!r}")


def _one_hot(col: pd.Series, spec: ColumnSpec) -> tuple[np.ndarray, list[str]]:
    svals = col.astype(str).str.strip()
    if spec.values is None:
        spec.values = sorted(svals.unique())
    arr = np.zeros((len(col), len(spec.values)), dtype=np.int8)
    known = np.zeros(len(col), dtype=bool)
    for j, v in enumerate(spec.values):
        hit = (svals == v).to_numpy()
        arr[:, j] = hit
        known |= hit
    if not known.all():
        bad = sorted(svals[~known].unique())
        warnings.warn(f"column {spec.name!r}: unknown categories {bad} "
                      "encoded as all-zeros")
    names = [f"{spec.name}={v}" for v in spec.values]
    return arr, names


def preprocess(raw: pd.DataFrame, schema: list[ColumnSpec]) -> Dataset:
    """Binarize a raw table into a Dataset per the schema.

    Mutates the schema in place with learned vocabularies and medians so that
    saving it afterwards pins the encoding.  Median thresholds are computed
    on the full table, before any train/test split.
    """
    names = {c.name for c in schema}
    missing = [c for c in raw.columns if str(c) not in names]
    if missing:
        raise ValueError(f"schema does not cover columns: {missing}")
    df = _drop_missing(raw)
    s_col = h_col = y_col = None
    feats: list[np.ndarray] = []
    feat_names: list[str] = []
    sensitive_name = "S"
    for spec in schema:
        if spec.kind == "drop":
            continue
        if spec.name not in df.columns:
            raise ValueError(f"schema column {spec.name!r} missing from table")
        col = df[spec.name]
        if spec.kind == "sensitive":
            s_col = _sensitive_bits(col, spec)
            sensitive_name = spec.name
            if spec.keep == "numeric":
                feats.append(_binarize_numeric(col, spec))
                feat_names.append(spec.name)
            elif spec.keep == "categorical":
                arr, sub = _one_hot(col, spec)
                feats.append(arr)
                feat_names.extend(sub)
        elif spec.kind == "target":
            h_col = (_sensitive_bits(col, spec) if spec.rule
                     else pd.to_numeric(col).to_numpy().astype(np.int8))
        elif spec.kind == "outcome":
            y_col = (_sensitive_bits(col, spec) if spec.rule
                     else pd.to_numeric(col).to_numpy().astype(np.int8))
        elif spec.kind == "numeric":
            feats.append(_binarize_numeric(col, spec))
            feat_names.append(spec.name)
        elif spec.kind == "binary":
            feats.append(pd.to_numeric(col).to_numpy().astype(np.int8))
            feat_names.append(spec.name)
        elif spec.kind == "categorical":
            arr, sub = _one_hot(col, spec)
            feats.append(arr)
            feat_names.extend(sub)
    if s_col is None:
        raise ValueError("schema must mark one column as sensitive")
    if h_col is None:
        raise ValueError("schema must mark one column as target")
    x = (np.column_stack(feats) if feats
         else np.empty((len(df), 0), dtype=np.int8))
    return Dataset(s_col, x, h_col, y_col, feat_names, sensitive_name)


def canonical_schema(dataset: Dataset) -> list[ColumnSpec]:
    """Schema describing a canonical CSV of this dataset (for re-ingestion)."""
    specs = [ColumnSpec("S", "sensitive", rule="binary")]
    specs += [ColumnSpec(f"X_{j + 1}", "binary")
              for j in range(dataset.n_features)]
    specs.append(ColumnSpec("H", "target"))
    if dataset.y is not None:
        specs.append(ColumnSpec("Y", "outcome"))
    return specs


# -- splitting ---------------------------------------------------------------

def split(dataset: Dataset, train_fraction: float, seed,
          max_redraws: int = 10) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then cut; re-draw if either side loses an S group."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("need 0 < train_fraction < 1")
    n = len(dataset)
    n_train = int(n * train_fraction)
    if n_train == 0 or n_train == n:
        raise ValueError("split leaves one side empty")
    rng = np.random.default_rng(seed)
    for _ in range(max_redraws):
        perm = rng.permutation(n)
        train = dataset.subset(perm[:n_train])
        test = dataset.subset(perm[n_train:])
        groups_ok = all(0 < part.s.sum() < len(part)
                        for part in (train, test))
        if groups_ok:
            return train, test
    raise ValueError(f"could not keep both S groups on both sides "
                     f"after {max_redraws} draws")
