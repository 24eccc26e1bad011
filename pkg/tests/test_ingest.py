from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

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
from src.data.ingest import (
    INTERCEPT,
    DesignMatrix,
    EncodingPlan,
    aggregate_trials,
    build_design_matrix,
    holdout,
    parse_csv,
    subsample,
)
from tests.conftest import HEADER, booking_row, write_bookings

FEATURES = ["lead.time", "average.price", "special.requests", "room.type"]


def test_parse_csv_types_fields(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    assert data.row_count == 12
    first = data.records[0]
    assert first.booking_id == "INN00001"
    assert first.lead_time == 17
    assert first.average_price == 81.0
    assert first.room_type == "Room_Type 4"
    assert first.booking_status == "Not_Canceled"
    assert data.column("P.not.C")[:4] == [0, 0, 1, 0]


def test_parse_csv_normalizes_header_spelling(tmp_path: Path):
    header = [h.replace(" ", "-") if h != "Booking_ID" else h for h in HEADER]
    rows = [
        {k.replace(" ", "-") if k != "Booking_ID" else k: v for k, v in booking_row(i).items()}
        for i in range(1, 4)
    ]
    data = parse_csv(write_bookings(tmp_path / "dashed.csv", rows, header))
    assert data.column("lead.time") == [17, 24, 31]


def test_missing_column_names_it(tmp_path: Path):
    header = [h for h in HEADER if h != "lead time"]
    rows = [{k: v for k, v in booking_row(1).items() if k != "lead time"}]
    with pytest.raises(SchemaError) as exc:
        parse_csv(write_bookings(tmp_path / "x.csv", rows, header))
    assert exc.value.column == "lead time"
    assert "lead time" in str(exc.value)


def test_unparseable_cell_is_addressed(tmp_path: Path):
    rows = [booking_row(1), booking_row(2, **{"lead time": "soon"})]
    with pytest.raises(ParseError) as exc:
        parse_csv(write_bookings(tmp_path / "x.csv", rows))
    assert exc.value.row == 2
    assert exc.value.column == "lead time"


def test_negative_price_rejected(tmp_path: Path):
    rows = [booking_row(1, **{"average price": "-3.5"})]
    with pytest.raises(ParseError):
        parse_csv(write_bookings(tmp_path / "x.csv", rows))


def test_empty_cell_is_missing_value(tmp_path: Path):
    rows = [booking_row(1), booking_row(2), booking_row(3, **{"room type": ""})]
    with pytest.raises(MissingValueError) as exc:
        parse_csv(write_bookings(tmp_path / "x.csv", rows))
    assert (exc.value.row, exc.value.column) == (3, "room type")


def test_unknown_label_rejected(tmp_path: Path):
    rows = [booking_row(1, **{"booking status": "Maybe"})]
    with pytest.raises(LabelError):
        parse_csv(write_bookings(tmp_path / "x.csv", rows))


def test_new_bookings_without_status(tmp_path: Path):
    header = [h for h in HEADER if h != "booking status"]
    rows = [{k: v for k, v in booking_row(i).items() if k != "booking status"} for i in (1, 2)]
    data = parse_csv(write_bookings(tmp_path / "new.csv", rows, header), require_response=False)
    assert [r.booking_status for r in data.records] == [None, None]


def test_subsample_is_seeded_and_keeps_file_order(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    a = subsample(data, 5, seed=7)
    b = subsample(data, 5, seed=7)
    assert a.booking_ids == b.booking_ids
    assert len(set(a.booking_ids)) == 5
    order = [data.booking_ids.index(i) for i in a.booking_ids]
    assert order == sorted(order)


@pytest.mark.parametrize("n", [0, -1, 13])
def test_subsample_size_errors(bookings_csv: Path, n: int):
    with pytest.raises(SizeError):
        subsample(parse_csv(bookings_csv), n, seed=1)


def test_holdout_excludes_training_rows(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    train = subsample(data, 8, seed=2)
    rest = holdout(data, train)
    assert rest.row_count == 4
    assert not set(rest.booking_ids) & set(train.booking_ids)


def test_discover_sorts_levels_and_picks_reference(bookings_csv: Path):
    plan = EncodingPlan.discover(parse_csv(bookings_csv), FEATURES)
    (room,) = plan.categorical_columns
    assert room.levels == ["Room_Type 1", "Room_Type 2", "Room_Type 4"]
    assert room.reference == "Room_Type 1"
    assert plan.column_names == [
        INTERCEPT, "lead.time", "average.price", "special.requests",
        "room.typeRoom_Type 2", "room.typeRoom_Type 4",
    ]


def test_discover_rejects_unknown_feature(bookings_csv: Path):
    with pytest.raises(SchemaError):
        EncodingPlan.discover(parse_csv(bookings_csv), ["Booking_ID"])


def test_design_matrix_codes_not_canceled_as_success(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    dm = build_design_matrix(data, EncodingPlan.discover(data, FEATURES).freeze())
    assert dm.n_rows == 12 and dm.n_cols == 6
    assert np.all(dm.x[:, 0] == 1.0)
    expected = [0 if i % 3 == 0 else 1 for i in range(1, 13)]
    assert dm.y.tolist() == expected
    assert dm.trials.tolist() == [1] * 12
    assert dm.row_ids[0] == "INN00001"


def test_positive_label_flip(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    plan = EncodingPlan.discover(data, FEATURES, positive_label="Canceled").freeze()
    dm = build_design_matrix(data, plan)
    assert dm.y.sum() == 4


def test_frozen_plan_rejects_unseen_level(bookings_csv: Path, tmp_path: Path):
    data = parse_csv(bookings_csv)
    plan = EncodingPlan.discover(data, FEATURES).freeze()
    rows = [booking_row(1, **{"room type": "Room_Type 7"})]
    new = parse_csv(write_bookings(tmp_path / "n.csv", rows))
    with pytest.raises(EncodingError) as exc:
        build_design_matrix(new, plan, require_variation=False)
    assert exc.value.level == "Room_Type 7"


def test_open_plan_extends_levels(bookings_csv: Path, tmp_path: Path):
    data = parse_csv(bookings_csv)
    plan = EncodingPlan.discover(data, ["room.type"])
    new = parse_csv(write_bookings(
        tmp_path / "n.csv",
        [booking_row(1, **{"room type": "Room_Type 7"}), booking_row(2)],
    ))
    dm = build_design_matrix(new, plan, require_variation=False)
    assert dm.column_names[-1] == "room.typeRoom_Type 7"


def test_constant_column_is_design_error(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    with pytest.raises(DesignError):
        build_design_matrix(data, EncodingPlan.discover(data, ["repeated"]).freeze())


def test_decode_inverts_encoding(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    plan = EncodingPlan.discover(data, FEATURES).freeze()
    dm = build_design_matrix(data, plan)
    decoded = plan.decode(dm.x[2])
    assert decoded == {
        "lead.time": 31.0, "average.price": 83.0, "special.requests": 0.0,
        "room.type": "Room_Type 1",
    }


def test_design_matrix_validates_counts():
    with pytest.raises(DesignError):
        DesignMatrix(x=np.ones((2, 1)), column_names=(INTERCEPT,), y=[2, 0], trials=[1, 1])
    with pytest.raises(DesignError):
        DesignMatrix(x=np.ones((2, 1)), column_names=("a",), y=[0, 0], trials=[1, 1])


def test_aggregate_trials_conserves_counts():
    x = np.array([[1, 0], [1, 1], [1, 0], [1, 2], [1, 1]], dtype=float)
    dm = DesignMatrix(
        x=x, column_names=(INTERCEPT, "a"), y=[1, 0, 1, 1, 1], trials=[1, 1, 1, 1, 1],
        row_ids=("r1", "r2", "r3", "r4", "r5"),
    )
    agg = aggregate_trials(dm)
    assert agg.x[:, 1].tolist() == [0.0, 1.0, 2.0]
    assert agg.y.tolist() == [2, 1, 1]
    assert agg.trials.tolist() == [2, 2, 1]
    assert agg.row_ids == ("r1", "r2", "r4")
    assert agg.y.sum() == dm.y.sum() and agg.trials.sum() == dm.trials.sum()


def test_design_arrays_are_read_only(bookings_csv: Path):
    data = parse_csv(bookings_csv)
    dm = build_design_matrix(data, EncodingPlan.discover(data, FEATURES).freeze())
    with pytest.raises(ValueError):
        dm.x[0, 0] = 2.0


def test_empty_file_is_a_data_error(tmp_path: Path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(FileFormatError, match="empty"):
        parse_csv(path)


def test_non_utf8_file_is_a_data_error(tmp_path: Path):
    path = tmp_path / "latin1.csv"
    path.write_bytes(",".join(HEADER).encode("utf-8") + "\nINN1,café\n".encode("latin-1"))
    with pytest.raises(FileFormatError, match="UTF-8"):
        parse_csv(path)
