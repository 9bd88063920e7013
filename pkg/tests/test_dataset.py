import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pricecast import dataset as D
from pricecast.dataset import Dataset, DatasetError, load_csv, write_csv


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


HEADER = "timestamp,price,total_load,zonal_load\n"


def test_row_maps_to_fields(tmp_path):
    ds = load_csv(_write(tmp_path, HEADER + "2013-02-19T14:00,42.86,18067,6075\n"))
    rec = ds.record(0)
    assert str(np.datetime64(rec.timestamp, "m")) == "2013-02-19T14:00"
    assert rec.price == 42.86
    assert rec.total_load == 18067
    assert rec.zonal_load == 6075


def test_gap_reported_at_row_2(tmp_path):
    text = HEADER + "2013-01-01T00:00,10,100,50\n2013-01-01T02:00,10,100,50\n"
    with pytest.raises(DatasetError) as err:
        load_csv(_write(tmp_path, text))
    assert err.value.row == 2
    assert "gap" in str(err.value)


def test_header_only_is_empty_error(tmp_path):
    with pytest.raises(DatasetError, match="empty"):
        load_csv(_write(tmp_path, HEADER))


@pytest.mark.parametrize(
    "row, reason",
    [
        ("2013-01-01 01:00,10,100,50", "malformed timestamp"),
        ("2013-01-01T01:30,10,100,50", "hour-aligned"),
        ("2013-01-01T01:00,abc,100,50", "non-numeric price"),
        ("2013-01-01T01:00,1e3,100,50", "non-numeric price"),
        ("2013-01-01T01:00,10,100", "expected 4 fields"),
        ("2013-01-01T00:00,10,100,50", "duplicate"),
        ("2013-01-01T01:00,-3,100,50", "price must be positive"),
        ("2013-01-01T01:00,3,0,50", "positive"),
    ],
)
def test_malformed_rows_name_row_and_reason(tmp_path, row, reason):
    text = HEADER + "2013-01-01T00:00,10,100,50\n" + row + "\n"
    with pytest.raises(DatasetError, match=reason) as err:
        load_csv(_write(tmp_path, text))
    assert err.value.row == 2


def test_rows_are_sorted(tmp_path):
    text = HEADER + "2013-01-01T01:00,11,100,50\n2013-01-01T00:00,10,100,50\n"
    ds = load_csv(_write(tmp_path, text))
    assert list(ds.price) == [10, 11]


def test_trailing_missing_price_allowed_interior_rejected(tmp_path):
    ok = HEADER + "2013-01-01T00:00,10,100,50\n2013-01-01T01:00,,100,50\n"
    ds = load_csv(_write(tmp_path, ok))
    assert ds.record(1).price is None
    bad = HEADER + "2013-01-01T00:00,,100,50\n2013-01-01T01:00,10,100,50\n"
    with pytest.raises(DatasetError, match="missing price"):
        load_csv(_write(tmp_path, bad, "b.csv"))


def test_wrong_header(tmp_path):
    with pytest.raises(DatasetError, match="expected header"):
        load_csv(_write(tmp_path, "a,b,c,d\n"))


def test_gefcom_layout(tmp_path):
    text = (
        "ZONEID,timestamp,Forecasted Total Load,Forecasted Zonal Load,Zonal Price\n"
        "1,1012011 1:00,14000,5000,30.5\n"
        "1,1012011 2:00,14100,5050,31\n"
        "1,01012011 3:00,14200,5100,\n"
    )
    ds = load_csv(_write(tmp_path, text), gefcom=True)
    assert str(ds.start) == "2011-01-01T00"
    assert len(ds) == 3
    assert ds.total_load[1] == 14100 and ds.zonal_load[1] == 5050
    assert np.isnan(ds.price[2])


def test_dataset_is_immutable(small_synth):
    with pytest.raises(AttributeError):
        small_synth.price = None
    with pytest.raises(ValueError):
        small_synth.price[0] = 1.0


def test_slice_identity_and_30_days(small_synth):
    ds = small_synth
    assert D.slice(ds, ds.start, ds.end) == ds
    start = ds.start + np.timedelta64(5, "h")
    s = D.slice(ds, start, start + np.timedelta64(30 * 24 - 1, "h"))
    assert len(s) == 720


def test_slice_errors(small_synth):
    ds = small_synth
    with pytest.raises(DatasetError):
        D.slice(ds, ds.end, ds.start)
    with pytest.raises(DatasetError):
        D.slice(ds, ds.start - np.timedelta64(1, "h"), ds.end)


@st.composite
def datasets(draw):
    n = draw(st.integers(1, 60))
    start = np.datetime64("2012-01-01T00", "h") + np.timedelta64(draw(st.integers(0, 20000)), "h")
    pos = st.floats(0.01, 1e6, allow_nan=False, allow_infinity=False)
    price = draw(st.lists(pos, min_size=n, max_size=n))
    n_missing = draw(st.integers(0, n - 1))
    price = price[: n - n_missing] + [np.nan] * n_missing
    t = draw(st.lists(pos, min_size=n, max_size=n))
    z = draw(st.lists(pos, min_size=n, max_size=n))
    return Dataset(start + np.arange(n).astype("timedelta64[h]"), price, t, z)


@settings(max_examples=40, deadline=None)
@given(datasets())
def test_write_then_load_round_trip(tmp_path_factory, ds):
    p = tmp_path_factory.mktemp("rt") / "ds.csv"
    write_csv(ds, p)
    back = load_csv(p)
    assert back == ds
    p2 = p.with_name("again.csv")
    write_csv(back, p2)
    assert p.read_bytes() == p2.read_bytes()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 29 * 24))
def test_every_30_day_slice_has_720_rows(small_synth, offset):
    start = small_synth.start + np.timedelta64(offset, "h")
    assert len(D.slice(small_synth, start, start + np.timedelta64(719, "h"))) == 720
