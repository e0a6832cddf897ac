"""Reading card-transaction CSV logs into clean, deduplicated records.

Amounts are held as integer minor units (cents) so monetary sums are exact;
they only become floats when a feature matrix is built.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable

import numpy as np

log = logging.getLogger(__name__)

DATE_FORMATS = ("%Y-%m-%d", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S")
_CENT = Decimal("0.01")


class SchemaError(ValueError):
    """The CSV header cannot satisfy the requested column mapping."""


class RowError(ValueError):
    pass


@dataclass(frozen=True)
class Schema:
    """Header names for the four required column roles."""

    holder: str = "holder"
    id: str = "txid"
    amount: str = "amount"
    date: str = "date"

    ROLES = ("holder", "id", "amount", "date")

    @classmethod
    def parse(cls, text: str) -> "Schema":
        """Build from ``holder=Card_Holder,id=Transaction ID,...``; unnamed roles keep defaults."""
        mapping = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            role, sep, name = part.partition("=")
            role = role.strip()
            if not sep or role not in cls.ROLES or not name.strip():
                raise SchemaError(f"bad schema entry {part!r}; expected role=header with role in {cls.ROLES}")
            mapping[role] = name.strip()
        return cls(**mapping)

    def to_text(self) -> str:
        return ",".join(f"{r}={getattr(self, r)}" for r in self.ROLES)


@dataclass(frozen=True, slots=True)
class RawTransaction:
    card_holder: str
    transaction_id: str
    amount_minor: int
    op_date: datetime

    @property
    def amount(self) -> Decimal:
        return Decimal(self.amount_minor).scaleb(-2)


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_kept: int = 0
    duplicates_dropped: int = 0
    rows_rejected: int = 0
    values_imputed: dict = field(default_factory=dict)
    error_samples: list = field(default_factory=list)
    zero_variance_columns: list = field(default_factory=list)

    def reconciles(self) -> bool:
        return self.rows_kept + self.duplicates_dropped + self.rows_rejected == self.rows_read

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "duplicates_dropped": self.duplicates_dropped,
            "rows_rejected": self.rows_rejected,
            "values_imputed": dict(self.values_imputed),
            "error_samples": list(self.error_samples),
            "zero_variance_columns": list(self.zero_variance_columns),
        }


def parse_amount(text: str, allow_negative: bool = False) -> int:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise RowError(f"unparseable amount {text!r}") from None
    if not value.is_finite():
        raise RowError(f"non-finite amount {text!r}")
    if value != value.quantize(_CENT):
        raise RowError(f"amount {text!r} has sub-cent precision")
    if value < 0 and not allow_negative:
        raise RowError(f"negative amount {text!r} (pass allow_negative to accept refunds)")
    return int(value.quantize(_CENT).scaleb(2))


def parse_date(text: str) -> datetime:
    text = text.strip()
    for fmt in DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            continue
    raise RowError(f"unparseable date {text!r}")


def _text_stream(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def parse_transactions(source, schema: Schema = Schema(), allow_negative: bool = False,
                       max_samples: int = 10):
    """Parse a CSV byte stream into transactions plus an ingest report.

    Rows that fail to parse are counted in ``rows_rejected`` with the first
    ``max_samples`` reasons kept.  A header missing a mapped column raises
    :class:`SchemaError`.
    """
    report = IngestReport()
    reader = csv.reader(_text_stream(source))
    header = next(reader, None)
    if header is None:
        return [], report
    header = [h.strip() for h in header]
    cols = {}
    missing = []
    for role in Schema.ROLES:
        name = getattr(schema, role)
        if name in header:
            cols[role] = header.index(name)
        else:
            missing.append(f"{role}={name!r}")
    if missing:
        raise SchemaError(f"header {header} lacks required column(s): {', '.join(missing)}")

    out = []
    width = len(header)
    # line 1 is the header
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        report.rows_read += 1
        try:
            if len(row) != width:
                raise RowError(f"expected {width} fields, found {len(row)}")
            holder = row[cols["holder"]].strip()
            txid = row[cols["id"]].strip()
            if not holder:
                raise RowError("empty card holder")
            if not txid:
                raise RowError("empty transaction id")
            out.append(RawTransaction(holder, txid, parse_amount(row[cols["amount"]], allow_negative),
                                      parse_date(row[cols["date"]])))
        except RowError as exc:
            report.rows_rejected += 1
            if len(report.error_samples) < max_samples:
                report.error_samples.append(f"line {lineno}: {exc}")
    report.rows_kept = len(out)
    if report.rows_rejected:
        log.warning("rejected %d of %d rows", report.rows_rejected, report.rows_read)
    return out, report


def dedupe(txns: Iterable[RawTransaction]):
    """Keep the first occurrence of each transaction id, preserving order."""
    seen = set()
    kept = []
    dropped = 0
    for t in txns:
        if t.transaction_id in seen:
            dropped += 1
            continue
        seen.add(t.transaction_id)
        kept.append(t)
    return kept, dropped


def load_transactions(source, schema: Schema = Schema(), allow_negative: bool = False):
    """``parse_transactions`` followed by ``dedupe``, with one reconciled report."""
    txns, report = parse_transactions(source, schema, allow_negative)
    txns, dropped = dedupe(txns)
    report.duplicates_dropped = dropped
    report.rows_kept = len(txns)
    return txns, report


def write_transactions(txns: Iterable[RawTransaction], stream: IO[str], schema: Schema = Schema()) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow([schema.holder, schema.id, schema.amount, schema.date])
    for t in txns:
        w.writerow([t.card_holder, t.transaction_id, f"{t.amount:.2f}", t.op_date.strftime("%Y-%m-%d %H:%M:%S")])


# ---------------------------------------------------------------- feature matrices


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense numeric table; NaN marks a missing cell until imputation."""

    column_names: tuple
    rows: np.ndarray
    entity_ids: tuple

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("rows must be 2-D")
        if rows.shape[1] != len(self.column_names):
            raise ValueError(f"{rows.shape[1]} columns of data for {len(self.column_names)} names")
        if rows.shape[0] != len(self.entity_ids):
            raise ValueError(f"{rows.shape[0]} rows for {len(self.entity_ids)} entity ids")
        if np.isinf(rows).any():
            raise ValueError("infinite values in feature matrix")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "entity_ids", tuple(self.entity_ids))

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self._index(name)]

    def _index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}; have {list(self.column_names)}") from None

    def select(self, names) -> "FeatureMatrix":
        idx = [self._index(c) for c in names]
        return FeatureMatrix(tuple(names), self.rows[:, idx], self.entity_ids)

    def with_rows(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.column_names, rows, self.entity_ids)


def impute_missing(matrix: FeatureMatrix):
    """Fill NaN cells with the mean of the column's present values."""
    rows = np.array(matrix.rows)
    counts = {}
    for j, name in enumerate(matrix.column_names):
        col = rows[:, j]
        miss = np.isnan(col)
        if miss.all():
            raise ValueError(f"column {name!r} has no present values; mean undefined")
        counts[name] = int(miss.sum())
        if counts[name]:
            col[miss] = col[~miss].mean()
    return matrix.with_rows(rows), counts


def correlation_filter(matrix: FeatureMatrix, target_column: str, threshold: float,
                       report: IngestReport | None = None):
    """Drop columns whose |Pearson r| with ``target_column`` is below ``threshold``.

    A zero-variance column has no defined correlation and counts as r = 0;
    such columns are listed in ``report.zero_variance_columns`` when a
    report is supplied.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    if np.isnan(matrix.rows).any():
        raise ValueError("impute missing values before correlation filtering")
    target = matrix.column(target_column)
    tc = target - target.mean()
    t_ss = float(tc @ tc)
    keep, dropped = [], []
    for j, name in enumerate(matrix.column_names):
        if name == target_column:
            keep.append(name)
            continue
        xc = matrix.rows[:, j] - matrix.rows[:, j].mean()
        x_ss = float(xc @ xc)
        if x_ss == 0.0 or t_ss == 0.0:
            r = 0.0
            if report is not None:
                report.zero_variance_columns.append(name if x_ss == 0.0 else target_column)
        else:
            r = min(1.0, max(-1.0, float(xc @ tc) / np.sqrt(x_ss * t_ss)))
        (keep if abs(r) >= threshold else dropped).append(name)
    return matrix.select(keep), dropped
