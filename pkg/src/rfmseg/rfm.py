"""Recency / frequency / monetary features per card holder, z-scoring, and
quantile RFM scores."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import Decimal
from typing import IO, Iterable, Sequence

import numpy as np

from .ingest import FeatureMatrix, RawTransaction

RFM_COLUMNS = ("recency", "frequency", "monetary")


@dataclass(frozen=True, slots=True)
class RfmVector:
    customer_id: str
    recency: int
    frequency: int
    monetary_minor: int

    @property
    def monetary(self) -> Decimal:
        return Decimal(self.monetary_minor).scaleb(-2)


def compute_reference_date(txns: Iterable[RawTransaction]) -> date:
    """Day after the latest transaction day in the table."""
    latest = None
    for t in txns:
        day = t.op_date.date()
        if latest is None or day > latest:
            latest = day
    if latest is None:
        raise ValueError("cannot derive a reference date from zero transactions")
    return latest + timedelta(days=1)


def compute_rfm(txns: Iterable[RawTransaction], ref: date) -> list:
    """One :class:`RfmVector` per card holder, sorted by customer id.

    Recency is whole days from the holder's latest transaction day to ``ref``.
    Expects deduplicated input.
    """
    last = {}
    count = defaultdict(int)
    total = defaultdict(int)
    for t in txns:
        day = t.op_date.date()
        if day >= ref:
            raise ValueError(f"transaction {t.transaction_id} on {day} is not before reference date {ref}")
        c = t.card_holder
        if c not in last or day > last[c]:
            last[c] = day
        count[c] += 1
        total[c] += t.amount_minor
    return [RfmVector(c, (ref - last[c]).days, count[c], total[c]) for c in sorted(last)]


def rfm_matrix(vectors: Sequence[RfmVector]) -> FeatureMatrix:
    rows = np.array([[v.recency, v.frequency, v.monetary_minor / 100.0] for v in vectors], dtype=np.float64)
    return FeatureMatrix(RFM_COLUMNS, rows.reshape(len(vectors), 3), tuple(v.customer_id for v in vectors))


@dataclass(frozen=True)
class StandardizationParams:
    column_names: tuple
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if np.any(~(np.asarray(self.std) > 0)):
            raise ValueError("every standard deviation must be > 0")


def standardize(matrix: FeatureMatrix):
    """Column-wise z-scores with the population (divisor n) standard deviation.

    Values are only shifted and scaled; nothing is clipped.
    """
    x = matrix.rows
    if x.shape[0] < 2:
        raise ValueError("standardization needs at least 2 rows")
    if np.isnan(x).any():
        raise ValueError("impute missing values before standardizing")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    # constant columns can leave a tiny non-zero std from rounding in the mean
    flat = [name for name, s, r in zip(matrix.column_names, std, np.ptp(x, axis=0)) if r == 0 or not s > 0]
    if flat:
        raise ValueError(f"zero-variance column(s) cannot be standardized: {', '.join(flat)}")
    params = StandardizationParams(matrix.column_names, mean, std)
    return matrix.with_rows((x - mean) / std), params


def inverse_standardize(matrix: FeatureMatrix, params: StandardizationParams) -> FeatureMatrix:
    if matrix.rows.shape[1] != len(params.mean):
        raise ValueError(f"matrix has {matrix.rows.shape[1]} columns, params cover {len(params.mean)}")
    return matrix.with_rows(matrix.rows * params.std + params.mean)


# ---------------------------------------------------------------- quantile scores


@dataclass(frozen=True, slots=True)
class RfmScore:
    customer_id: str
    r_score: int
    f_score: int
    m_score: int

    @property
    def combined(self) -> str:
        parts = (self.r_score, self.f_score, self.m_score)
        if max(parts) > 9:
            return "-".join(map(str, parts))
        return "".join(map(str, parts))


def quantile_bins(values: Sequence, ids: Sequence, q: int, ascending: bool) -> np.ndarray:
    """Scores 1..q by rank; score 1 goes to the best end.

    Order is by value (ascending or descending) with ties broken by id, and
    rank r falls in bin b when ceil((b-1)n/q) <= r < ceil(bn/q).  Tied
    values share the bin of the first member of their run, so equal inputs
    always get equal scores.
    """
    v = np.asarray(values)
    n = len(v)
    id_rank = np.empty(n, dtype=np.int64)
    id_rank[sorted(range(n), key=lambda i: ids[i])] = np.arange(n)
    key = v if ascending else -v
    order = np.lexsort((id_rank, key))
    sorted_key = key[order]
    run_start = np.concatenate(([True], sorted_key[1:] != sorted_key[:-1]))
    first_pos = np.maximum.accumulate(np.where(run_start, np.arange(n), 0))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = first_pos
    edges = np.array([-(-b * n // q) for b in range(1, q + 1)], dtype=np.int64)
    return np.searchsorted(edges, rank, side="right") + 1


def score_rfm(vectors: Sequence[RfmVector], q: int = 5) -> list:
    """Quantile RFM scores: low recency, high frequency and high spend score 1."""
    n = len(vectors)
    if n == 0:
        raise ValueError("no customers to score")
    if q < 2:
        raise ValueError(f"need at least 2 quantiles, got q={q}")
    if q > n:
        raise ValueError(f"q={q} quantiles exceed the {n} customers available")
    ids = [v.customer_id for v in vectors]
    r = quantile_bins([v.recency for v in vectors], ids, q, ascending=True)
    f = quantile_bins([v.frequency for v in vectors], ids, q, ascending=False)
    m = quantile_bins([v.monetary_minor for v in vectors], ids, q, ascending=False)
    return [RfmScore(c, int(a), int(b), int(d)) for c, a, b, d in zip(ids, r, f, m)]


# ---------------------------------------------------------------- CSV export


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rfm_csv(vectors: Sequence[RfmVector], stream: IO[str], standardized: FeatureMatrix | None = None) -> None:
    w = csv.writer(stream, lineterminator="\n")
    header = ["customer_id", *RFM_COLUMNS]
    if standardized is not None:
        header += [f"{c}_z" for c in RFM_COLUMNS]
    w.writerow(header)
    for i, v in enumerate(vectors):
        row = [v.customer_id, v.recency, v.frequency, f"{v.monetary:.2f}"]
        if standardized is not None:
            row += [_fmt(z) for z in standardized.rows[i]]
        w.writerow(row)


def read_rfm_csv(stream: IO[str]) -> list:
    out = []
    for rec in csv.DictReader(stream):
        minor = int(Decimal(rec["monetary"]).scaleb(2))
        out.append(RfmVector(rec["customer_id"], int(rec["recency"]), int(rec["frequency"]), minor))
    return out


def write_scores_csv(scores: Sequence[RfmScore], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["customer_id", "r_score", "f_score", "m_score", "combined"])
    for s in scores:
        w.writerow([s.customer_id, s.r_score, s.f_score, s.m_score, s.combined])
