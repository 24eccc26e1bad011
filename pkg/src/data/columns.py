"""Column names of the hotel-booking CSV, in the dotted form used throughout the package."""

from __future__ import annotations

import re

BOOKING_ID = "Booking_ID"
RESPONSE = "booking.status"
RESPONSE_LABELS = ("Canceled", "Not_Canceled")

COUNT_COLUMNS = (
    "number.of.adults",
    "number.of.children",
    "number.of.weekend.nights",
    "number.of.week.nights",
    "car.parking.space",
    "lead.time",
    "repeated",
    "P.C",
    "P.not.C",
    "special.requests",
)
DECIMAL_COLUMNS = ("average.price",)
CATEGORICAL_COLUMNS = (
    "type.of.meal",
    "room.type",
    "market.segment.type",
    "date.of.reservation",
)

# File order of the Kaggle export.
BOOKING_COLUMNS = (
    BOOKING_ID,
    "number.of.adults",
    "number.of.children",
    "number.of.weekend.nights",
    "number.of.week.nights",
    "type.of.meal",
    "car.parking.space",
    "room.type",
    "lead.time",
    "market.segment.type",
    "repeated",
    "P.C",
    "P.not.C",
    "average.price",
    "special.requests",
    "date.of.reservation",
    RESPONSE,
)

# Columns that may enter a design matrix (dates and ids never do).
MODELLING_NUMERIC = COUNT_COLUMNS + DECIMAL_COLUMNS
MODELLING_CATEGORICAL = ("type.of.meal", "room.type", "market.segment.type")

# Default predictor set.
DEFAULT_FEATURES = (
    "number.of.adults",
    "number.of.children",
    "number.of.weekend.nights",
    "number.of.week.nights",
    "car.parking.space",
    "lead.time",
    "P.C",
    "P.not.C",
    "average.price",
    "special.requests",
    "room.type",
)

_SEPARATORS = re.compile(r"[\s\-.]+")


def normalize_column(name: str) -> str:
    """'lead time' / 'lead-time' / 'lead.time ' -> 'lead.time'; 'P-not-C' -> 'P.not.C'."""
    return _SEPARATORS.sub(".", name.strip()).strip(".")


def display_name(column: str) -> str:
    """Header spelling used in the Kaggle export ('lead.time' -> 'lead time')."""
    if column in ("P.C", "P.not.C"):
        return column.replace(".", "-")
    return column.replace(".", " ")
