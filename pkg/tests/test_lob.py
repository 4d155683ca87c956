"""LOBSTER parsing and bucketing contracts."""

from __future__ import annotations

import numpy as np
import pytest

from ofi_lab.lob import (
    bucketize,
    events_to_csv,
    parse_message_file,
    parse_orderbook_file,
)


def test_parse_message_row(tmp_path):
    path = tmp_path / "msg.csv"
    path.write_text("34200.189,1,11885113,21,2238200,1\n")
    events = parse_message_file(path)
    assert len(events) == 1
    e = events[0]
    assert (e.time, e.event_type, e.order_id, e.size, e.price, e.direction) == (
        34200.189, 1, 11885113, 21, 2238200, 1)


def test_parse_empty_file(tmp_path):
    path = tmp_path / "msg.csv"
    path.write_text("")
    assert parse_message_file(path) == []


def test_parse_wrong_column_count_names_row(tmp_path):
    path = tmp_path / "msg.csv"
    path.write_text("34200.1,1,1,5,100,1\n34200.2,1,1,5,100\n")
    with pytest.raises(ValueError, match="row 1"):
        parse_message_file(path)


def test_parse_non_numeric_names_row(tmp_path):
    path = tmp_path / "msg.csv"
    path.write_text("34200.1,1,1,5,100,1\n34200.2,1,x,5,100,1\n")
    with pytest.raises(ValueError, match="row 1"):
        parse_message_file(path)


def test_time_regression_rejected(tmp_path):
    path = tmp_path / "msg.csv"
    path.write_text("34200.2,1,1,5,100,1\n34200.1,1,2,5,100,1\n")
    with pytest.raises(ValueError, match="time regression"):
        parse_message_file(path)
    # sub-tolerance jitter is fine
    path.write_text("34200.2,1,1,5,100,1\n34200.2,1,2,5,100,1\n")
    assert len(parse_message_file(path)) == 2


def test_roundtrip_canonical_bytes(tmp_path):
    src = tmp_path / "msg.csv"
    rows = "\n".join(
        f"{34200 + i * 0.123456:.6f},1,{i},5,{2238200 + i},{1 if i % 2 else -1}"
        for i in range(50)
    ) + "\n"
    src.write_text(rows)
    events = parse_message_file(src)
    out = tmp_path / "out.csv"
    events_to_csv(events, out)
    assert out.read_text() == src.read_text()


def test_parse_orderbook_single_level(tmp_path):
    path = tmp_path / "book.csv"
    path.write_text("2239500,100,2231800,200\n")
    book = parse_orderbook_file(path, 1)
    snap = book[0]
    assert snap.ask_price[0] == 2239500 and snap.ask_size[0] == 100
    assert snap.bid_price[0] == 2231800 and snap.bid_size[0] == 200
    assert not snap.crossed and snap.valid


def test_parse_orderbook_sentinel_level(tmp_path):
    path = tmp_path / "book.csv"
    path.write_text("2239500,100,2231800,200,9999999999,0,-9999999999,0\n")
    book = parse_orderbook_file(path, 2)
    snap = book[0]
    assert not snap.absent[0, 0] and snap.absent[0, 1] and snap.absent[1, 1]
    assert snap.valid


def test_parse_orderbook_crossed_flagged_not_dropped(tmp_path):
    path = tmp_path / "book.csv"
    path.write_text("2231800,100,2231800,200\n")
    book = parse_orderbook_file(path, 1)
    assert len(book) == 1
    assert book[0].crossed and not book[0].valid


def test_parse_orderbook_wrong_columns(tmp_path):
    path = tmp_path / "book.csv"
    path.write_text("2239500,100,2231800\n")
    with pytest.raises(ValueError, match="columns"):
        parse_orderbook_file(path, 1)


def test_bucketize_30min_session_10s():
    times = np.array([36000.5])
    buckets = bucketize(times, (36000.0, 36000.0 + 30 * 60), 10.0)
    assert len(buckets) == 180


def test_bucketize_30min_session_60s():
    buckets = bucketize(np.array([36001.0]), (36000.0, 36000.0 + 30 * 60), 60.0)
    assert len(buckets) == 30


def test_bucketize_right_edge_inclusive():
    times = np.array([36005.0, 36010.0, 36010.5])
    buckets = bucketize(times, (36000.0, 36020.0), 10.0)
    first = buckets[0]
    assert first.first_event == 0 and first.last_event == 1 and first.event_count == 2
    assert buckets[1].first_event == 2


def test_bucketize_empty_buckets_emitted():
    buckets = bucketize(np.array([36015.0]), (36000.0, 36030.0), 10.0)
    assert [b.event_count for b in buckets] == [0, 1, 0]


def test_bucketize_bad_h():
    with pytest.raises(ValueError):
        bucketize(np.array([36001.0]), (36000.0, 36030.0), -1.0)
    with pytest.raises(ValueError):
        bucketize(np.array([36001.0]), (36000.0, 36030.0), 7.0)


def test_bucket_partition_covers_session(rng):
    from conftest import random_book

    book = random_book(rng, n_events=500, span=1800.0)
    buckets = bucketize(book, (36000.0, 37800.0), 10.0)
    assigned = np.concatenate([
        np.arange(b.first_event, b.last_event + 1) for b in buckets
    ])
    in_session = np.flatnonzero((book.time > 36000.0) & (book.time <= 37800.0))
    assert np.array_equal(np.sort(assigned), in_session)
    # contiguity: no snapshot lands in two buckets
    assert len(assigned) == len(set(assigned))


def test_session_trimming():
    times = np.sort(np.random.default_rng(0).uniform(34200, 57600, 1000))
    buckets = bucketize(times, (36000.0, 55800.0), 600.0)
    assert buckets[0].window_start == 36000.0
    assert buckets[-1].window_end == 55800.0
    for b in buckets:
        assert b.window_start >= 36000.0 and b.window_end <= 55800.0
