import random
import tracemalloc
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenariomine.ingest import (
    HEADERS,
    PartitionStats,
    SchemaError,
    TableSpool,
    load_table,
    partition_by_trip,
    read_bundles,
    write_bundles,
    write_table,
)
from scenariomine.model import TableKind, TripKey

from conftest import bundle, lane, summary_row, target, wsu


def _csv(path, kind, lines):
    path.write_text(",".join(HEADERS[kind]) + "\n" + "".join(l + "\n" for l in lines), encoding="utf-8")
    return path


def test_empty_file_with_header(tmp_path):
    s = load_table(_csv(tmp_path / "DataWsu.csv", TableKind.WSU, []), TableKind.WSU)
    assert list(s) == []
    assert s.rejected == 0


def test_malformed_latitude_is_one_rejection(tmp_path):
    p = _csv(tmp_path / "DataWsu.csv", TableKind.WSU, [
        "1,0,0,42.28,-83.74,90,10",
        "1,0,1,42.2x,-83.74,90,10",
        "1,0,2,42.28,-83.74,90,10",
    ])
    s = load_table(p, TableKind.WSU)
    rows = list(s)
    assert [r.time for r in rows] == [0, 2]
    assert s.rejected == 1
    assert s.rejections[0].line() == "DataWsu,1,0,1,unparseable field"


def test_short_row_and_out_of_range(tmp_path):
    p = _csv(tmp_path / "DataLane.csv", TableKind.LANE, ["1,0,0,-1.7,1.8,2", "1,0,1,-1.7,1.8,2,7", "1,0,2,-1.7,1.8,2,2"])
    s = load_table(p, TableKind.LANE)
    assert len(list(s)) == 1
    assert [r.reason for r in s.rejections] == ["wrong field count", "quality out of range"]


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_table(tmp_path / "DataWsu.csv", TableKind.WSU)


def test_header_mismatch_names_columns(tmp_path):
    p = tmp_path / "DataWsu.csv"
    p.write_text("Device,Trip,Time,Lat,Longitude,Heading,Speed,Extra\n", encoding="utf-8")
    with pytest.raises(SchemaError) as exc:
        load_table(p, TableKind.WSU)
    msg = str(exc.value)
    assert "Latitude" in msg and "Lat" in msg and "Extra" in msg


def test_headerless_file(tmp_path):
    p = tmp_path / "DataWsu.csv"
    p.write_text("", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_table(p, TableKind.WSU)


def test_wsu_only_trip():
    (b,) = partition_by_trip(wsu=[wsu(t) for t in range(5)])
    assert b.key == TripKey(1, 0)
    assert b.front_targets == () and b.lanes == () and b.summary is None
    assert b.span() == (0, 4)


def _two_trips():
    a, z = TripKey(1, 0), TripKey(1, 1)
    return {
        "wsu": [wsu(t, key=k) for k in (a, z) for t in range(20)],
        "front_targets": [target(t, o, key=k) for k in (a, z) for t in range(5, 15) for o in (2, 1)],
        "lanes": [lane(t, -1.7, 1.8, key=k) for k in (a, z) for t in range(20)],
        "summaries": [summary_row(0, 19, key=k) for k in (a, z)],
    }


def test_interleaved_trips_sorted():
    tables = _two_trips()
    direct = list(partition_by_trip(**tables))
    rng = random.Random(3)
    shuffled = {name: rng.sample(rows, len(rows)) for name, rows in tables.items()}
    got = list(partition_by_trip(**shuffled))
    assert [b.key for b in got] == [TripKey(1, 0), TripKey(1, 1)]
    assert got == direct
    for b in got:
        assert b.check() == []
        assert [r.time for r in b.wsu] == list(range(20))
        assert [(r.time, r.obstacle_id) for r in b.front_targets][:2] == [(5, 1), (5, 2)]


def test_duplicate_wsu_keep_first():
    first = wsu(3, speed=1.0)
    stats = PartitionStats()
    (b,) = partition_by_trip(wsu=[wsu(2), first, wsu(3, speed=2.0)], stats=stats)
    assert len(b.wsu) == 2
    assert b.wsu[1].speed == 1.0
    assert b.duplicates["DataWsu"] == 1
    assert stats.duplicates["DataWsu"] == 1


def test_duplicate_targets_keyed_by_obstacle():
    (b,) = partition_by_trip(front_targets=[target(1, 5), target(1, 6), target(1, 5, d=99.0)])
    assert [(r.obstacle_id, r.range_d) for r in b.front_targets] == [(5, 20.0), (6, 20.0)]
    assert b.duplicates["DataFrontTargets"] == 1


def test_spilling_gives_same_bundles(tmp_path):
    tables = _two_trips()
    stats = PartitionStats()
    spilled = list(partition_by_trip(**tables, spill_threshold=7, spill_dir=tmp_path / "spill", stats=stats))
    assert stats.spills > 0
    assert spilled == list(partition_by_trip(**tables))
    # spill files are cleaned up after the last bundle
    assert not any(p.is_file() for p in (tmp_path / "spill").rglob("*"))


def test_spool_load_merges_frames(tmp_path):
    sp = TableSpool(TableKind.WSU, tmp_path, threshold=3)
    rows = [tuple(wsu(t)) for t in range(10)]
    sp.extend(rows)
    assert sp.load(TripKey(1, 0)) == rows


def test_round_trip(tmp_path):
    original = list(partition_by_trip(**_two_trips()))
    write_bundles(tmp_path, original)
    assert list(read_bundles(tmp_path)) == original


def test_round_trip_keeps_awkward_floats(tmp_path):
    b = bundle([wsu(0, lat=42.123456789012345, lon=-83.1 + 1e-13, speed=0.1 + 0.2)])
    write_bundles(tmp_path, [b])
    (back,) = read_bundles(tmp_path)
    assert back.wsu == b.wsu


def test_summary_optional(tmp_path):
    write_table(tmp_path / "DataWsu.csv", TableKind.WSU, [wsu(0)])
    write_table(tmp_path / "DataFrontTargets.csv", TableKind.FRONT_TARGETS, [])
    write_table(tmp_path / "DataLane.csv", TableKind.LANE, [])
    (b,) = read_bundles(tmp_path)
    assert b.summary is None


rows = st.lists(
    st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 30), st.integers(0, 3)),
    max_size=120,
)


@given(rows, st.randoms(use_true_random=False), st.sampled_from([2, 10_000]))
@settings(max_examples=80, deadline=None)
def test_accepted_rows_minus_duplicates(raw, rnd, threshold):
    fts = [target(t, o, d=float(i), key=TripKey(d_, tr)) for i, (d_, tr, t, o) in enumerate(raw)]
    stats = PartitionStats()
    got = list(partition_by_trip(front_targets=fts, stats=stats, spill_threshold=threshold))
    kept = Counter(r for b in got for r in b.front_targets)
    first = {}
    for r in fts:
        first.setdefault((r.device, r.trip, r.time, r.obstacle_id), r)
    assert kept == Counter(first.values())
    assert stats.duplicates["DataFrontTargets"] == len(fts) - len(first)
    assert [b.key for b in got] == sorted({TripKey(r.device, r.trip) for r in fts})
    # input order must not change the result
    rnd.shuffle(fts)
    again = list(partition_by_trip(front_targets=fts))
    assert [b.key for b in again] == [b.key for b in got]
    assert all(b.check() == [] for b in again)


def _write_wsu(path, n):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(HEADERS[TableKind.WSU]) + "\n")
        for i in range(n):
            fh.write(f"{i // 50000},0,{i % 50000},42.28,-83.74,90.0,12.5\n")


def _peak_streaming(path):
    tracemalloc.start()
    n = 0
    for _ in load_table(path, TableKind.WSU):
        n += 1
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return n, peak


@pytest.mark.slow
def test_streaming_memory_flat(tmp_path):
    small, big = tmp_path / "s.csv", tmp_path / "b.csv"
    _write_wsu(small, 100_000)
    _write_wsu(big, 1_000_000)
    n_small, peak_small = _peak_streaming(small)
    n_big, peak_big = _peak_streaming(big)
    assert (n_small, n_big) == (100_000, 1_000_000)
    # ten times the rows, essentially the same footprint
    assert peak_big < 2 * peak_small + 256 * 1024
