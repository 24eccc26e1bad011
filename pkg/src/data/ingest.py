"""
Ingest: parse the hotel-booking CSV, encode predictors and build design matrices.

Usage:
    data = parse_csv("bookings.csv")
    train = subsample(data, n=5000, seed=1)
    plan = EncodingPlan.discover(train, features=DEFAULT_FEATURES)
    dm = build_design_matrix(train, plan)
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from src.core.errors import (
    DesignError,
    EncodingError,
    FileFormatError,
    LabelError,
    MissingValueError,
    ParseError,
    SchemaError,
    SizeError,
)
from src.data.columns import (
    BOOKING_COLUMNS,
    BOOKING_ID,
    CATEGORICAL_COLUMNS,
    COUNT_COLUMNS,
    DECIMAL_COLUMNS,
    MODELLING_CATEGORICAL,
    MODELLING_NUMERIC,
    RESPONSE,
    RESPONSE_LABELS,
    display_name,
    normalize_column,
)

logger = logging.getLogger(__name__)

INTERCEPT = "Intercept"


@dataclass(frozen=True)
class RawBookingRecord:
    booking_id: str
    number_of_adults: int
    number_of_children: int
    number_of_weekend_nights: int
    number_of_week_nights: int
    type_of_meal: str
    car_parking_space: int
    room_type: str
    lead_time: int
    market_segment_type: str
    repeated: int
    p_c: int
    p_not_c: int
    average_price: float
    special_requests: int
    date_of_reservation: str
    # None for new bookings whose outcome is unknown.
    booking_status: str | None

    def value(self, column: str) -> Any:
        """Field value by dotted column name ('lead.time' -> lead_time)."""
        return getattr(self, _FIELD_BY_COLUMN[column])


_FIELD_BY_COLUMN = {
    BOOKING_ID: "booking_id",
    "P.C": "p_c",
    "P.not.C": "p_not_c",
    **{
        c: c.replace(".", "_")
        for c in BOOKING_COLUMNS
        if c not in (BOOKING_ID, "P.C", "P.not.C")
    },
}


@dataclass(frozen=True)
class Dataset:
    records: tuple[RawBookingRecord, ...]
    source_path: str = ""

    @property
    def row_count(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def booking_ids(self) -> tuple[str, ...]:
        return tuple(r.booking_id for r in self.records)

    def column(self, name: str) -> list[Any]:
        return [r.value(name) for r in self.records]


# --- Parsing ---


def parse_csv(
    path: str | Path,
    schema: Sequence[str] = BOOKING_COLUMNS,
    *,
    require_response: bool = True,
) -> Dataset:
    """
    Parse an RFC-4180 booking CSV.

    Header names are normalized (spaces, dashes and dots all become dots), so fields are
    located by name, not position. Empty cells are a data fault and raise MissingValueError.

    Args:
        path: CSV file.
        schema: Expected (dotted) column names.
        require_response: False for new bookings without a booking status column.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            # Simulated files carry the format header line ahead of the CSV header.
            skip = 1 if f.readline().startswith("# bayes-cancel format") else 0
        frame = pd.read_csv(
            path, dtype=str, keep_default_na=False, na_filter=False, skiprows=skip,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as exc:
        raise FileFormatError(f"{path}: no CSV header found (empty file)") from exc
    except UnicodeDecodeError as exc:
        raise FileFormatError(
            f"{path}: not UTF-8 text (byte {exc.start}: {exc.reason})"
        ) from exc
    frame.columns = [normalize_column(str(c)) for c in frame.columns]

    expected = [c for c in schema if require_response or c != RESPONSE]
    for column in expected:
        if column not in frame.columns:
            raise SchemaError(
                display_name(column),
                f"missing column: '{display_name(column)}' (normalized: '{column}')",
            )
    has_response = RESPONSE in frame.columns

    records = []
    for offset, row in enumerate(frame.itertuples(index=False, name=None)):
        cells = dict(zip(frame.columns, row, strict=True))
        records.append(_parse_row(offset + 1, cells, has_response))

    logger.info("Parsed %d bookings from %s", len(records), path)
    return Dataset(records=tuple(records), source_path=str(path))


def _parse_row(row: int, cells: dict[str, str], has_response: bool) -> RawBookingRecord:
    def text(column: str) -> str:
        value = cells[column].strip()
        if value == "":
            raise MissingValueError(row, display_name(column))
        return value

    values: dict[str, Any] = {"booking_id": text(BOOKING_ID)}
    for column in COUNT_COLUMNS:
        values[_FIELD_BY_COLUMN[column]] = _parse_count(row, column, text(column))
    for column in DECIMAL_COLUMNS:
        values[_FIELD_BY_COLUMN[column]] = _parse_decimal(row, column, text(column))
    for column in CATEGORICAL_COLUMNS:
        values[_FIELD_BY_COLUMN[column]] = text(column)

    status = None
    if has_response:
        status = text(RESPONSE)
        if status not in RESPONSE_LABELS:
            raise LabelError(
                f"row {row}, column '{display_name(RESPONSE)}': "
                f"label {status!r} not in {list(RESPONSE_LABELS)}"
            )
    values["booking_status"] = status
    return RawBookingRecord(**values)


def _parse_count(row: int, column: str, value: str) -> int:
    try:
        parsed = int(value)
    except ValueError:
        raise ParseError(row, display_name(column), value, "non-negative integer") from None
    if parsed < 0:
        raise ParseError(row, display_name(column), value, "non-negative integer")
    return parsed


def _parse_decimal(row: int, column: str, value: str) -> float:
    try:
        parsed = Decimal(value)
    except InvalidOperation:
        raise ParseError(row, display_name(column), value, "non-negative decimal") from None
    if not parsed.is_finite() or parsed < 0:
        raise ParseError(row, display_name(column), value, "non-negative decimal")
    return float(parsed)


# --- Sampling ---


def subsample(data: Dataset, n: int, seed: int) -> Dataset:
    """n distinct rows chosen uniformly without replacement, kept in file order."""
    if n <= 0:
        raise SizeError(f"subsample size must be > 0, got {n}")
    if n > data.row_count:
        raise SizeError(f"subsample size {n} exceeds row count {data.row_count}")
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(data.row_count, size=n, replace=False))
    return Dataset(records=tuple(data.records[i] for i in picked), source_path=data.source_path)


def holdout(data: Dataset, subset: Dataset) -> Dataset:
    """Rows of `data` whose booking id does not occur in `subset`, in file order."""
    taken = set(subset.booking_ids)
    kept = tuple(r for r in data.records if r.booking_id not in taken)
    return Dataset(records=kept, source_path=data.source_path)


# --- Encoding ---


class CategoricalEncoding(BaseModel):
    column: str
    levels: list[str]
    reference: str

    @model_validator(mode="after")
    def _check_levels(self) -> CategoricalEncoding:
        if self.reference not in self.levels:
            raise ValueError(f"reference level {self.reference!r} not in levels of {self.column}")
        if self.levels != sorted(self.levels):
            raise ValueError(f"levels of {self.column} must be sorted lexicographically")
        return self

    @property
    def dummy_levels(self) -> list[str]:
        return [lv for lv in self.levels if lv != self.reference]

    def dummy_names(self) -> list[str]:
        return [f"{self.column}{lv}" for lv in self.dummy_levels]


class EncodingPlan(BaseModel):
    """How raw bookings become design-matrix columns. Serializable to the YAML run config."""

    numeric_columns: list[str] = Field(default_factory=list)
    categorical_columns: list[CategoricalEncoding] = Field(default_factory=list)
    response_column: str = RESPONSE
    positive_label: str = "Not_Canceled"
    # Frozen plans reject levels they have not seen; open plans discover them.
    frozen: bool = False

    @classmethod
    def discover(
        cls,
        data: Dataset,
        features: Iterable[str],
        positive_label: str = "Not_Canceled",
    ) -> EncodingPlan:
        numeric: list[str] = []
        categorical: list[CategoricalEncoding] = []
        for feature in features:
            column = normalize_column(feature)
            if column in MODELLING_NUMERIC:
                numeric.append(column)
            elif column in MODELLING_CATEGORICAL:
                levels = sorted(set(data.column(column)))
                if not levels:
                    raise SizeError(f"cannot discover levels of '{column}' from an empty dataset")
                categorical.append(
                    CategoricalEncoding(column=column, levels=levels, reference=levels[0])
                )
            else:
                raise SchemaError(feature, f"unknown or non-modelling feature: '{feature}'")

        observed = {r.booking_status for r in data.records if r.booking_status is not None}
        if observed and positive_label not in observed:
            raise LabelError(
                f"positive label {positive_label!r} not among observed labels {sorted(observed)}"
            )
        return cls(
            numeric_columns=numeric,
            categorical_columns=categorical,
            positive_label=positive_label,
        )

    def freeze(self) -> EncodingPlan:
        return self.model_copy(update={"frozen": True})

    def extend(self, data: Dataset) -> EncodingPlan:
        """Add levels present in `data` but missing from an open plan; references are kept."""
        if self.frozen:
            return self
        encodings = []
        for enc in self.categorical_columns:
            levels = sorted(set(enc.levels) | set(data.column(enc.column)))
            encodings.append(enc.model_copy(update={"levels": levels}))
        return self.model_copy(update={"categorical_columns": encodings})

    @property
    def column_names(self) -> list[str]:
        names = [INTERCEPT, *self.numeric_columns]
        for enc in self.categorical_columns:
            names.extend(enc.dummy_names())
        return names

    def decode(self, x_row: Sequence[float]) -> dict[str, Any]:
        """Recover numeric values and categorical labels from one design-matrix row."""
        out: dict[str, Any] = {}
        pos = 1
        for column in self.numeric_columns:
            out[column] = float(x_row[pos])
            pos += 1
        for enc in self.categorical_columns:
            dummies = enc.dummy_levels
            block = list(x_row[pos : pos + len(dummies)])
            pos += len(dummies)
            hot = [lv for lv, v in zip(dummies, block, strict=True) if v == 1.0]
            out[enc.column] = hot[0] if hot else enc.reference
        return out


@dataclass(frozen=True)
class DesignMatrix:
    x: np.ndarray
    column_names: tuple[str, ...]
    y: np.ndarray
    trials: np.ndarray
    row_ids: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float, copy=True)
        if x.ndim != 2:
            raise DesignError(f"design matrix must be 2-D, got shape {x.shape}")
        y = np.array(self.y, dtype=np.int64, copy=True).reshape(-1)
        trials = np.array(self.trials, dtype=np.int64, copy=True).reshape(-1)
        n, p = x.shape
        if len(self.column_names) != p:
            raise DesignError(f"{len(self.column_names)} column names for {p} columns")
        if p == 0 or self.column_names[0] != INTERCEPT:
            raise DesignError("first design column must be the intercept")
        if y.shape[0] != n or trials.shape[0] != n:
            raise DesignError("x, y and trials must have the same number of rows")
        if n and not np.all(x[:, 0] == 1.0):
            raise DesignError("intercept column must be all ones")
        if np.any(trials < 1):
            raise DesignError("trials must be >= 1")
        bad = np.flatnonzero((y < 0) | (y > trials))
        if bad.size:
            raise DesignError(
                f"row {bad[0] + 1}: successes {y[bad[0]]} outside [0, {trials[bad[0]]}]"
            )
        if self.row_ids and len(self.row_ids) != n:
            raise DesignError("row_ids must have one entry per row")
        for arr in (x, y, trials):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_cols(self) -> int:
        return self.x.shape[1]

    N = n_rows
    P = n_cols

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.x, columns=list(self.column_names))
        if self.row_ids:
            frame.insert(0, "row_id", list(self.row_ids))
        frame["y"] = self.y
        frame["trials"] = self.trials
        return frame


def build_design_matrix(
    data: Dataset,
    plan: EncodingPlan,
    *,
    require_response: bool = True,
    require_variation: bool = True,
) -> DesignMatrix:
    """
    Encode bookings into X (intercept first), y and trials.

    Args:
        data: Bookings.
        plan: Encoding plan; a frozen plan raises EncodingError on unseen levels.
        require_response: False for new bookings; y is then all zeros.
        require_variation: Training matrices must have no constant column besides the
            intercept. Prediction matrices skip the check.
    """
    n = data.row_count
    if not plan.frozen:
        plan = plan.extend(data)
    columns: list[np.ndarray] = [np.ones(n)]
    for column in plan.numeric_columns:
        columns.append(np.asarray(data.column(column), dtype=float))

    for enc in plan.categorical_columns:
        values = data.column(enc.column)
        for v in values:
            if v not in enc.levels:
                raise EncodingError(enc.column, v)
        for level in enc.dummy_levels:
            columns.append(np.fromiter((v == level for v in values), dtype=float, count=n))

    x = np.column_stack(columns) if n else np.empty((0, len(columns)))
    names = plan.column_names

    if require_response:
        labels = data.column(plan.response_column)
        if any(lbl is None for lbl in labels):
            raise LabelError(f"column '{display_name(plan.response_column)}' is missing")
        if plan.positive_label not in RESPONSE_LABELS:
            raise LabelError(
                f"positive label {plan.positive_label!r} not in {list(RESPONSE_LABELS)}"
            )
        y = np.array([lbl == plan.positive_label for lbl in labels], dtype=np.int64)
    else:
        y = np.zeros(n, dtype=np.int64)

    if require_variation and n:
        for j in range(1, x.shape[1]):
            if np.all(x[:, j] == x[0, j]):
                raise DesignError(f"design column '{names[j]}' is constant")

    return DesignMatrix(
        x=x, column_names=tuple(names), y=y, trials=np.ones(n, dtype=np.int64),
        row_ids=data.booking_ids,
    )


def aggregate_trials(dm: DesignMatrix) -> DesignMatrix:
    """
    Merge rows with identical predictor vectors into binomial counts.

    Groups keep the order of their first occurrence; the merged row id is the first
    member's id. Sums of y and trials are conserved exactly.
    """
    if dm.n_rows == 0:
        return dm
    _, first, inverse = np.unique(dm.x, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    # Relabel groups so that group k is the k-th first occurrence in row order.
    order = np.argsort(first, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    group = relabel[inverse]
    n_groups = order.size

    y = np.bincount(group, weights=dm.y, minlength=n_groups).astype(np.int64)
    trials = np.bincount(group, weights=dm.trials, minlength=n_groups).astype(np.int64)
    firsts = first[order]
    row_ids = tuple(dm.row_ids[i] for i in firsts) if dm.row_ids else ()
    logger.debug("Aggregated %d rows into %d covariate patterns", dm.n_rows, n_groups)
    return DesignMatrix(
        x=dm.x[firsts], column_names=dm.column_names, y=y, trials=trials, row_ids=row_ids
    )
