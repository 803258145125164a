"""Sample containers for the three study designs.

A :class:`ScenarioSample` holds one tabular dataset in column form (numpy
arrays), which keeps resampling and estimation cheap.  Individual records can
be materialised as :class:`ObsRecord` / :class:`IvRecord` / :class:`ProxyRecord`
for inspection, but none of the numeric code paths go through record objects.

Scenarios
---------
observational
    outcome ``y``, binary treatment ``t``, binary covariate ``x``
iv-fusion
    outcome ``y``, continuous treatment ``t``, instrument ``i`` observed only
    for the first ``n_complete`` records (missing elsewhere)
proxy
    outcome ``y``, binary treatment ``t``, binary post-treatment proxy ``p``

Iv-fusion samples are kept ordered complete-first so that stratified
resampling and fold assignment never need extra bookkeeping.

CSV format (header required, UTF-8, ``.`` decimal separator):
``y,t,x`` / ``y,t,i`` (empty ``i`` cell = missing instrument) / ``y,t,p``.
Extra columns are ignored on read.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class Scenario(enum.Enum):
    OBSERVATIONAL = "obs"
    IV_FUSION = "iv"
    PROXY = "proxy"

    @classmethod
    def parse(cls, name: str) -> "Scenario":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown scenario {name!r} (expected obs, iv or proxy)")


@dataclass(frozen=True)
class ObsRecord:
    y: float
    t: int
    x: int


@dataclass(frozen=True)
class IvRecord:
    y: float
    t: float
    i: float | None


@dataclass(frozen=True)
class ProxyRecord:
    y: float
    t: int
    p: int


_COLUMNS = {
    Scenario.OBSERVATIONAL: ("y", "t", "x"),
    Scenario.IV_FUSION: ("y", "t", "i"),
    Scenario.PROXY: ("y", "t", "p"),
}


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")


def _check_binary(arr: np.ndarray, name: str) -> None:
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError(f"{name} must take values in {{0, 1}}")


@dataclass(frozen=True)
class ScenarioSample:
    """Immutable column store for one dataset.

    ``aux`` is the scenario-specific third column: covariate ``x``
    (observational), instrument ``i`` with NaN for missing entries
    (iv-fusion), or proxy ``p``.  ``n_complete`` is only meaningful for
    iv-fusion samples and counts the instrument-bearing prefix.
    """

    scenario: Scenario
    y: np.ndarray
    t: np.ndarray
    aux: np.ndarray
    n_complete: int

    def __post_init__(self):
        n = self.y.shape[0]
        if n == 0:
            raise ValueError("sample must contain at least one record")
        if self.t.shape[0] != n or self.aux.shape[0] != n:
            raise ValueError("columns must have equal length")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def __len__(self) -> int:
        return self.n

    # -- constructors -------------------------------------------------------

    @classmethod
    def observational(cls, y, t, x) -> "ScenarioSample":
        y = _as_float_array(y, "y")
        t = _as_float_array(t, "t")
        x = _as_float_array(x, "x")
        _check_finite(y, "y")
        _check_binary(t, "t")
        _check_binary(x, "x")
        return cls(Scenario.OBSERVATIONAL, y, t, x, n_complete=len(y))

    @classmethod
    def iv_fusion(cls, y, t, instrument) -> "ScenarioSample":
        """Build an iv-fusion sample; records are reordered complete-first.

        ``instrument`` may contain NaN (or None) entries marking records on
        which the instrument was not observed.
        """
        y = _as_float_array(y, "y")
        t = _as_float_array(t, "t")
        inst = np.asarray(
            [np.nan if v is None else v for v in np.asarray(instrument, dtype=object)],
            dtype=np.float64,
        )
        if inst.shape[0] != y.shape[0]:
            raise ValueError("columns must have equal length")
        _check_finite(y, "y")
        _check_finite(t, "t")
        complete = np.isfinite(inst)
        order = np.concatenate([np.flatnonzero(complete), np.flatnonzero(~complete)])
        return cls(
            Scenario.IV_FUSION,
            y[order],
            t[order],
            inst[order],
            n_complete=int(complete.sum()),
        )

    @classmethod
    def proxy(cls, y, t, p) -> "ScenarioSample":
        y = _as_float_array(y, "y")
        t = _as_float_array(t, "t")
        p = _as_float_array(p, "p")
        _check_finite(y, "y")
        _check_binary(t, "t")
        _check_binary(p, "p")
        return cls(Scenario.PROXY, y, t, p, n_complete=len(y))

    @classmethod
    def from_records(cls, scenario: Scenario, records: Iterable) -> "ScenarioSample":
        records = list(records)
        if scenario is Scenario.OBSERVATIONAL:
            return cls.observational(
                [r.y for r in records], [r.t for r in records], [r.x for r in records]
            )
        if scenario is Scenario.IV_FUSION:
            return cls.iv_fusion(
                [r.y for r in records], [r.t for r in records], [r.i for r in records]
            )
        return cls.proxy(
            [r.y for r in records], [r.t for r in records], [r.p for r in records]
        )

    # -- views --------------------------------------------------------------

    @property
    def records(self) -> list:
        if self.scenario is Scenario.OBSERVATIONAL:
            return [
                ObsRecord(float(y), int(t), int(x))
                for y, t, x in zip(self.y, self.t, self.aux)
            ]
        if self.scenario is Scenario.IV_FUSION:
            return [
                IvRecord(float(y), float(t), float(i) if np.isfinite(i) else None)
                for y, t, i in zip(self.y, self.t, self.aux)
            ]
        return [
            ProxyRecord(float(y), int(t), int(p))
            for y, t, p in zip(self.y, self.t, self.aux)
        ]

    # -- subsetting ---------------------------------------------------------

    def take(self, indices: Sequence[int]) -> "ScenarioSample":
        """Sample at ``indices`` (with or without repetition).

        For iv-fusion samples the result is reordered complete-first and its
        ``n_complete`` recomputed, so stratified invariants survive any index
        selection.  Inputs are trusted: columns of a valid sample stay valid
        under indexing, so no per-record validation is repeated here.
        """
        idx = np.asarray(indices, dtype=np.intp)
        if self.scenario is Scenario.IV_FUSION:
            idx = np.concatenate([idx[idx < self.n_complete], idx[idx >= self.n_complete]])
            n_complete = int((idx < self.n_complete).sum())
        else:
            n_complete = len(idx)
        return ScenarioSample(
            self.scenario, self.y[idx], self.t[idx], self.aux[idx], n_complete
        )


# -- CSV ingestion / export --------------------------------------------------


def read_sample_csv(path, scenario: Scenario) -> ScenarioSample:
    columns = _COLUMNS[scenario]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, header row required")
        for col in columns:
            if col not in reader.fieldnames:
                raise ValueError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    def col(name, allow_empty=False):
        out = []
        for row in rows:
            cell = row[name].strip()
            if cell == "" and allow_empty:
                out.append(np.nan)
            else:
                out.append(float(cell))
        return out

    if scenario is Scenario.OBSERVATIONAL:
        return ScenarioSample.observational(col("y"), col("t"), col("x"))
    if scenario is Scenario.IV_FUSION:
        return ScenarioSample.iv_fusion(col("y"), col("t"), col("i", allow_empty=True))
    return ScenarioSample.proxy(col("y"), col("t"), col("p"))


def _format_cell(value: float, binary: bool) -> str:
    if not np.isfinite(value):
        return ""
    if binary or value == int(value):
        return str(int(value))
    return repr(float(value))


def write_sample_csv(sample: ScenarioSample, path, extra: dict[str, np.ndarray] | None = None) -> None:
    columns = list(_COLUMNS[sample.scenario])
    binary_aux = sample.scenario is not Scenario.IV_FUSION
    binary_t = sample.scenario is not Scenario.IV_FUSION
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(columns + list(extra)) + "\n")
        for k in range(sample.n):
            cells = [
                repr(float(sample.y[k])),
                _format_cell(sample.t[k], binary_t),
                _format_cell(sample.aux[k], binary_aux),
            ]
            cells += [repr(float(extra[name][k])) for name in extra]
            fh.write(",".join(cells) + "\n")
