"""Datasets, model selectors and CSV ingestion for semi-competing risks data.

Two outcome layouts are supported:

* right-censored records ``(time1, event1, time2, event2)`` as produced by the
  simulator and consumed by the proportional-hazards fitters;
* interval records ``(LT, y1L, y1U, y2L, y2U)`` with left-truncation time and
  interval-censored bounds, consumed by the log-Normal AFT sampler.

Each record carries one covariate row per transition (``x1``, ``x2``, ``x3``)
and, for clustered data, a positive integer cluster label.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "BindingError",
    "ColumnBinding",
    "DataError",
    "EmptyDatasetError",
    "IntervalDataset",
    "ModelSpec",
    "ParseError",
    "PreconditionError",
    "SemiCompDataset",
    "UnivariateDataset",
    "Violation",
    "load_interval_csv",
    "load_semicomp_csv",
    "load_univariate_csv",
    "to_interval_representation",
    "validate",
    "validate_intervals",
    "write_interval_csv",
    "write_semicomp_csv",
    "write_univariate_csv",
]


class DataError(ValueError):
    """Base class for ingestion and validation failures."""


class BindingError(DataError):
    """A bound column is missing from the source file."""

    def __init__(self, column: str):
        super().__init__(f"column {column!r} not found in header")
        self.column = column


class ParseError(DataError):
    """A cell could not be parsed as a number."""

    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column


class EmptyDatasetError(DataError):
    pass


class PreconditionError(DataError):
    """Raised when an operation receives a dataset that fails validation."""

    def __init__(self, message: str, violations: Sequence["Violation"] = ()):
        super().__init__(message)
        self.violations = list(violations)


# ---------------------------------------------------------------------------
# model selector
# ---------------------------------------------------------------------------

_H3_ALIASES = {"markov": "Markov", "semi-markov": "semi-Markov", "semimarkov": "semi-Markov"}
_BASELINE_ALIASES = {"weibull": "Weibull", "pem": "PEM", "lognormal": "LogNormal", "ln": "LogNormal"}


@dataclass(frozen=True)
class ModelSpec:
    """Selects the model variant to simulate or fit.

    ``h3`` fixes the clock of the transition-3 hazard: ``"Markov"`` indexes it
    by the total time ``t2`` and ``"semi-Markov"`` by the sojourn ``t2 - t1``.
    """

    analysis: str = "illness-death"
    framework: str = "frequentist"
    family: str = "PHR"
    h3: str = "semi-Markov"
    baseline: str = "Weibull"
    frailty: bool = True
    cluster_effects: str = "none"

    def __post_init__(self):
        h3 = _H3_ALIASES.get(str(self.h3).lower())
        if h3 is None:
            raise ValueError(f"h3: unknown clock {self.h3!r}")
        baseline = _BASELINE_ALIASES.get(str(self.baseline).lower())
        if baseline is None:
            raise ValueError(f"baseline: unknown baseline {self.baseline!r}")
        object.__setattr__(self, "h3", h3)
        object.__setattr__(self, "baseline", baseline)
        if self.analysis not in ("illness-death", "univariate"):
            raise ValueError(f"analysis: unknown analysis {self.analysis!r}")
        if self.framework not in ("frequentist", "bayesian"):
            raise ValueError(f"framework: unknown framework {self.framework!r}")
        if self.family not in ("PHR", "AFT"):
            raise ValueError(f"family: unknown family {self.family!r}")
        if self.cluster_effects not in ("none", "MVN"):
            raise ValueError(f"cluster_effects: unknown option {self.cluster_effects!r}")

        if self.family == "AFT":
            if self.baseline != "LogNormal":
                raise ValueError("baseline: AFT models require the LogNormal baseline")
            if self.h3 != "semi-Markov":
                raise ValueError("h3: AFT models are defined on the sojourn time (semi-Markov)")
            if self.cluster_effects != "none":
                raise ValueError("cluster_effects: clustered AFT models are not available")
            if self.framework != "bayesian":
                raise ValueError("framework: AFT models are fitted in the Bayesian framework only")
        elif self.baseline == "LogNormal":
            raise ValueError("baseline: LogNormal is only available for the AFT family")
        if self.baseline == "PEM":
            if self.framework != "bayesian":
                raise ValueError("framework: PEM baselines require the Bayesian framework")
            if self.cluster_effects != "none":
                raise ValueError("cluster_effects: PEM baselines are not available for clustered data")
        if self.framework == "frequentist":
            if self.family != "PHR" or self.baseline != "Weibull":
                raise ValueError("framework: frequentist fitting covers the Weibull PHR model only")
            if self.cluster_effects != "none":
                raise ValueError("cluster_effects: no frequentist cluster-correlated model")

    @property
    def markov(self) -> bool:
        return self.h3 == "Markov"

    @property
    def clustered(self) -> bool:
        return self.cluster_effects != "none"

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"{sorted(unknown)[0]}: unknown model field")
        return cls(**d)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def _frozen(a, dtype=float, ndim=1):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr.setflags(write=False)
    return arr


def _covariate_block(x, n, names, label):
    if x is None:
        x = np.zeros((n, 0))
    x = _frozen(x, float, ndim=2)
    if x.shape[0] != n:
        raise ValueError(f"{label}: expected {n} rows, got {x.shape[0]}")
    names = tuple(names) if names is not None else tuple(f"{label}_{k + 1}" for k in range(x.shape[1]))
    if len(names) != x.shape[1]:
        raise ValueError(f"{label}: {len(names)} names for {x.shape[1]} columns")
    return x, names


def _cluster_labels(cluster, n):
    if cluster is None:
        return None
    c = np.asarray(cluster)
    if c.shape != (n,):
        raise ValueError("cluster: length must match the number of records")
    if not np.all(np.isfinite(c)) or np.any(c != np.round(c)) or np.any(c < 1):
        raise ValueError("cluster: labels must be positive integers 1..J")
    return _frozen(c, np.int64)


@dataclass(frozen=True, eq=False)
class SemiCompDataset:
    """Right-censored semi-competing risks records (immutable)."""

    time1: np.ndarray
    event1: np.ndarray
    time2: np.ndarray
    event2: np.ndarray
    x1: np.ndarray = None
    x2: np.ndarray = None
    x3: np.ndarray = None
    names1: tuple = None
    names2: tuple = None
    names3: tuple = None
    cluster: np.ndarray | None = None

    def __post_init__(self):
        t1 = _frozen(self.time1)
        n = t1.shape[0]
        for name in ("time2", "event1", "event2"):
            arr = _frozen(getattr(self, name), float if name == "time2" else np.int64)
            if arr.shape != (n,):
                raise ValueError(f"{name}: length {arr.shape} does not match time1 ({n},)")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "time1", t1)
        for g in (1, 2, 3):
            x, names = _covariate_block(getattr(self, f"x{g}"), n, getattr(self, f"names{g}"), f"x{g}")
            object.__setattr__(self, f"x{g}", x)
            object.__setattr__(self, f"names{g}", names)
        object.__setattr__(self, "cluster", _cluster_labels(self.cluster, n))

    def __len__(self):
        return self.time1.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    @property
    def n_clusters(self) -> int:
        return 0 if self.cluster is None else int(self.cluster.max(initial=0))

    def covariates(self, g: int) -> np.ndarray:
        return getattr(self, f"x{g}")

    def covariate_names(self, g: int) -> tuple:
        return getattr(self, f"names{g}")

    def equals(self, other: "SemiCompDataset") -> bool:
        """Bitwise equality of every numeric field and of the covariate names."""
        fields = ("time1", "event1", "time2", "event2", "x1", "x2", "x3")
        if any(not np.array_equal(getattr(self, f), getattr(other, f)) for f in fields):
            return False
        if (self.cluster is None) != (other.cluster is None):
            return False
        if self.cluster is not None and not np.array_equal(self.cluster, other.cluster):
            return False
        return all(self.covariate_names(g) == other.covariate_names(g) for g in (1, 2, 3))


@dataclass(frozen=True, eq=False)
class IntervalDataset:
    """Left-truncated, interval-censored semi-competing risks records.

    Upper bounds may be ``inf``. A lower bound of 0 carries no information.
    """

    LT: np.ndarray
    y1L: np.ndarray
    y1U: np.ndarray
    y2L: np.ndarray
    y2U: np.ndarray
    x1: np.ndarray = None
    x2: np.ndarray = None
    x3: np.ndarray = None
    names1: tuple = None
    names2: tuple = None
    names3: tuple = None

    def __post_init__(self):
        lt = _frozen(self.LT)
        n = lt.shape[0]
        object.__setattr__(self, "LT", lt)
        for name in ("y1L", "y1U", "y2L", "y2U"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (n,):
                raise ValueError(f"{name}: length {arr.shape} does not match LT ({n},)")
            object.__setattr__(self, name, arr)
        for g in (1, 2, 3):
            x, names = _covariate_block(getattr(self, f"x{g}"), n, getattr(self, f"names{g}"), f"x{g}")
            object.__setattr__(self, f"x{g}", x)
            object.__setattr__(self, f"names{g}", names)

    def __len__(self):
        return self.LT.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    def covariates(self, g: int) -> np.ndarray:
        return getattr(self, f"x{g}")

    def covariate_names(self, g: int) -> tuple:
        return getattr(self, f"names{g}")


@dataclass(frozen=True, eq=False)
class UnivariateDataset:
    """Right-censored single-outcome survival records."""

    time: np.ndarray
    event: np.ndarray
    x: np.ndarray = None
    names: tuple = None
    cluster: np.ndarray | None = None

    def __post_init__(self):
        t = _frozen(self.time)
        n = t.shape[0]
        e = _frozen(self.event, np.int64)
        if e.shape != (n,):
            raise ValueError("event: length does not match time")
        x, names = _covariate_block(self.x, n, self.names, "x")
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "event", e)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "cluster", _cluster_labels(self.cluster, n))

    def __len__(self):
        return self.time.shape[0]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    index: int
    kind: str
    message: str


def validate(dataset: SemiCompDataset) -> list[Violation]:
    """Return one violation per inadmissible record (first failing rule wins).

    An empty list means the dataset can be passed to any fitter.
    """
    out = []
    t1, t2 = dataset.time1, dataset.time2
    d1, d2 = dataset.event1, dataset.event2
    for i in range(len(dataset)):
        a, b, e1, e2 = t1[i], t2[i], d1[i], d2[i]
        if e1 not in (0, 1) or e2 not in (0, 1):
            out.append(Violation(i, "event_flag", "event flags must be 0 or 1"))
        elif not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
            out.append(Violation(i, "time_range", "times must be finite and non-negative"))
        elif a > b:
            out.append(Violation(i, "time_order", "time1 must not exceed time2"))
        elif e1 == 0 and a != b:
            out.append(Violation(i, "censored_gap", "event1=0 requires time1==time2"))
        elif e1 == 1 and a == b:
            out.append(Violation(i, "tie", "tie with event1=1: time1 must be < time2"))
        elif (e1 == 1 and a <= 0) or (e2 == 1 and b <= 0):
            out.append(Violation(i, "event_at_zero", "observed events need a positive time"))
    return out


def validate_intervals(data: IntervalDataset) -> list[Violation]:
    out = []
    for i in range(len(data)):
        lt, a1, b1, a2, b2 = data.LT[i], data.y1L[i], data.y1U[i], data.y2L[i], data.y2U[i]
        if any(math.isnan(v) for v in (lt, a1, b1, a2, b2)):
            out.append(Violation(i, "nan", "bounds must not be NaN"))
        elif not math.isfinite(lt) or lt < 0 or not (math.isfinite(a1) and math.isfinite(a2)):
            out.append(Violation(i, "lower_bound", "LT and lower bounds must be finite, LT >= 0"))
        elif a1 < 0 or a2 < 0 or b1 <= 0 or b2 <= 0:
            out.append(Violation(i, "bound_sign", "lower bounds must be >= 0 and upper bounds > 0"))
        elif a1 > b1 or a2 > b2:
            out.append(Violation(i, "interval_order", "each interval needs lower <= upper"))
        elif lt > a1 or lt > a2:
            out.append(Violation(i, "truncation", "LT must not exceed the lower bounds"))
        elif a1 > b2:
            out.append(Violation(i, "event_order", "y1L must not exceed y2U"))
        elif lt > 0 and b2 <= lt:
            out.append(Violation(i, "truncation", "terminal upper bound must exceed LT"))
    return out


def to_interval_representation(dataset: SemiCompDataset) -> IntervalDataset:
    """Convert right-censored records to the interval layout (LT = 0).

    Observed events become degenerate intervals ``[t, t]``; censored events
    become ``[t, inf)``. Finite bounds equal the original times exactly.
    """
    bad = validate(dataset)
    if bad:
        raise PreconditionError(f"{len(bad)} invalid records; first: {bad[0]}", bad)
    d1 = dataset.event1 == 1
    d2 = dataset.event2 == 1
    return IntervalDataset(
        LT=np.zeros(len(dataset)),
        y1L=dataset.time1,
        y1U=np.where(d1, dataset.time1, np.inf),
        y2L=dataset.time2,
        y2U=np.where(d2, dataset.time2, np.inf),
        x1=dataset.x1, x2=dataset.x2, x3=dataset.x3,
        names1=dataset.names1, names2=dataset.names2, names3=dataset.names3,
    )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

SEMICOMP_OUTCOMES = ("time1", "event1", "time2", "event2")
INTERVAL_OUTCOMES = ("LT", "y1L", "y1U", "y2L", "y2U")
UNIVARIATE_OUTCOMES = ("time", "event")


@dataclass(frozen=True)
class ColumnBinding:
    """Maps source columns to outcomes, per-transition covariates and cluster.

    ``outcomes`` lists the outcome columns in canonical order: four names for
    right-censored data, five for interval data, two for univariate data.
    Empty covariate lists give baseline-only transitions.
    """

    outcomes: tuple = SEMICOMP_OUTCOMES
    x1: tuple = ()
    x2: tuple = ()
    x3: tuple = ()
    cluster: str | None = None

    def __post_init__(self):
        for name in ("outcomes", "x1", "x2", "x3"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @classmethod
    def from_dict(cls, d: dict, default_outcomes=SEMICOMP_OUTCOMES) -> "ColumnBinding":
        unknown = set(d) - {"outcomes", "x1", "x2", "x3", "x", "cluster"}
        if unknown:
            raise ValueError(f"binding: unknown keys {sorted(unknown)}")
        return cls(
            outcomes=tuple(d.get("outcomes", default_outcomes)),
            x1=tuple(d.get("x1", d.get("x", ()))),
            x2=tuple(d.get("x2", ())),
            x3=tuple(d.get("x3", ())),
            cluster=d.get("cluster"),
        )

    def to_dict(self) -> dict:
        return {"outcomes": list(self.outcomes), "x1": list(self.x1), "x2": list(self.x2),
                "x3": list(self.x3), "cluster": self.cluster}


def _parse_float(text: str, row: int, column: str, allow_inf: bool) -> float:
    s = text.strip()
    if not s:
        raise ParseError(row, column, text)
    try:
        v = float(s)
    except ValueError:
        raise ParseError(row, column, text) from None
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ParseError(row, column, text)
    return v


def _read_columns(path, wanted: Sequence[str], allow_inf=()) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDatasetError(f"{path}: empty file")
        header = [h.strip() for h in header]
        index = {}
        for col in wanted:
            if col not in header:
                raise BindingError(col)
            index[col] = header.index(col)
        values = {col: [] for col in wanted}
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            for col, j in index.items():
                cell = row[j] if j < len(row) else ""
                values[col].append(_parse_float(cell, row_no, col, col in allow_inf))
    if not values or not next(iter(values.values()), []):
        raise EmptyDatasetError(f"{path}: no data rows")
    return {col: np.asarray(v, dtype=float) for col, v in values.items()}


def _unique(seq):
    return list(dict.fromkeys(seq))


def _events(arr: np.ndarray, name: str) -> np.ndarray:
    if np.any(arr != np.round(arr)):
        raise DataError(f"{name}: event indicators must be integers")
    return arr.astype(np.int64)


def load_semicomp_csv(path, binding: ColumnBinding = ColumnBinding()) -> SemiCompDataset:
    """Read right-censored semi-competing risks records from a CSV file.

    Row order is preserved and covariate blocks follow the binding order.
    Records are not validated here; call :func:`validate` on the result.
    """
    if len(binding.outcomes) != 4:
        raise ValueError("binding.outcomes must name time1, event1, time2, event2 columns")
    extra = [binding.cluster] if binding.cluster else []
    cols = _read_columns(path, _unique([*binding.outcomes, *binding.x1, *binding.x2, *binding.x3, *extra]))
    o = binding.outcomes

    def block(names):
        return np.column_stack([cols[c] for c in names]) if names else None

    return SemiCompDataset(
        time1=cols[o[0]], event1=_events(cols[o[1]], o[1]),
        time2=cols[o[2]], event2=_events(cols[o[3]], o[3]),
        x1=block(binding.x1), x2=block(binding.x2), x3=block(binding.x3),
        names1=binding.x1, names2=binding.x2, names3=binding.x3,
        cluster=cols[binding.cluster] if binding.cluster else None,
    )


def load_interval_csv(path, binding: ColumnBinding) -> IntervalDataset:
    if len(binding.outcomes) != 5:
        raise ValueError("binding.outcomes must name LT, y1L, y1U, y2L, y2U columns")
    o = binding.outcomes
    cols = _read_columns(path, _unique([*o, *binding.x1, *binding.x2, *binding.x3]),
                         allow_inf={o[2], o[4]})

    def block(names):
        return np.column_stack([cols[c] for c in names]) if names else None

    return IntervalDataset(
        LT=cols[o[0]], y1L=cols[o[1]], y1U=cols[o[2]], y2L=cols[o[3]], y2U=cols[o[4]],
        x1=block(binding.x1), x2=block(binding.x2), x3=block(binding.x3),
        names1=binding.x1, names2=binding.x2, names3=binding.x3,
    )


def load_univariate_csv(path, binding: ColumnBinding) -> UnivariateDataset:
    if len(binding.outcomes) != 2:
        raise ValueError("binding.outcomes must name time and event columns")
    extra = [binding.cluster] if binding.cluster else []
    o = binding.outcomes
    cols = _read_columns(path, _unique([*o, *binding.x1, *extra]))
    return UnivariateDataset(
        time=cols[o[0]], event=_events(cols[o[1]], o[1]),
        x=np.column_stack([cols[c] for c in binding.x1]) if binding.x1 else None,
        names=binding.x1,
        cluster=cols[binding.cluster] if binding.cluster else None,
    )


def format_number(v) -> str:
    """Shortest round-trip text for a float; integers print without a point."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    return repr(v)


def _write(path, header, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([format_number(v) for v in row])


def _covariate_columns(data):
    header, cols = [], []
    for g in (1, 2, 3):
        x = data.covariates(g)
        for j, name in enumerate(data.covariate_names(g)):
            if name in header:
                k = header.index(name)
                if not np.array_equal(cols[k], x[:, j]):
                    raise ValueError(f"covariate {name!r} appears in two blocks with different values")
                continue
            header.append(name)
            cols.append(x[:, j])
    return header, cols


def write_semicomp_csv(path, dataset: SemiCompDataset, cluster_column: str = "cluster"):
    header, cols = _covariate_columns(dataset)
    h = list(SEMICOMP_OUTCOMES) + header
    c = [dataset.time1, dataset.event1, dataset.time2, dataset.event2] + cols
    if dataset.cluster is not None:
        h.append(cluster_column)
        c.append(dataset.cluster)
    _write(path, h, c)


def write_interval_csv(path, data: IntervalDataset):
    header, cols = _covariate_columns(data)
    _write(path, list(INTERVAL_OUTCOMES) + header,
           [data.LT, data.y1L, data.y1U, data.y2L, data.y2U] + cols)


def write_univariate_csv(path, data: UnivariateDataset, cluster_column: str = "cluster"):
    h = list(UNIVARIATE_OUTCOMES) + list(data.names)
    c = [data.time, data.event] + [data.x[:, j] for j in range(data.x.shape[1])]
    if data.cluster is not None:
        h.append(cluster_column)
        c.append(data.cluster)
    _write(path, h, c)
