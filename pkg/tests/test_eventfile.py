import numpy as np
import pytest

from h2entangle.eventfile import (
    MAGIC, RECORD_DTYPE, EventFile, EventFileError, export_csv, from_bytes, make_records, read_csv,
    read_event_file, to_bytes, write_event_file,
)


def sample(n=5, seed=0):
    rng = np.random.default_rng(seed)
    rec = make_records(rng.integers(0, 3, n), rng.normal(size=(n, 3)), rng.normal(size=(n, 3)))
    return EventFile(np.array([0.0, 0.5, 1.0]), rec, bytes(range(32)), 42)


def test_record_size():
    assert RECORD_DTYPE.itemsize == 56


def test_roundtrip(tmp_path):
    ev = sample()
    path = tmp_path / "a.atl"
    write_event_file(ev, path)
    back = read_event_file(path)
    assert back.seed == 42 and back.config_hash == bytes(range(32))
    np.testing.assert_array_equal(back.delays, ev.delays)
    np.testing.assert_array_equal(back.p_electron, ev.p_electron)
    np.testing.assert_array_equal(back.delay_index, ev.delay_index)
    assert to_bytes(back) == path.read_bytes()
    assert path.read_bytes()[:4] == MAGIC


def test_layout_size():
    ev = sample(7)
    raw = to_bytes(ev)
    assert len(raw) == 4 + 4 + 32 + 8 + 8 + 4 + 3 * 8 + 7 * 56


def test_empty_file_roundtrip():
    ev = EventFile(np.array([0.0, 1.0]), make_records([], np.zeros((0, 3)), np.zeros((0, 3))))
    assert from_bytes(to_bytes(ev)).n_events == 0


def test_bad_magic():
    raw = bytearray(to_bytes(sample()))
    raw[:4] = b"XXXX"
    with pytest.raises(EventFileError):
        from_bytes(bytes(raw))


def test_truncated():
    raw = to_bytes(sample())
    with pytest.raises(EventFileError):
        from_bytes(raw[:-10])
    with pytest.raises(EventFileError):
        from_bytes(raw[:20])


def test_missing_file(tmp_path):
    with pytest.raises((EventFileError, OSError)):
        read_event_file(tmp_path / "missing.atl")


def test_csv_mirror(tmp_path):
    ev = sample(9)
    path = tmp_path / "ev.csv"
    export_csv(ev, path)
    header = path.read_text().splitlines()
    assert len([h for h in header if not h.startswith("#")][1].split(",")) == 8
    back = read_csv(path, ev.delays)
    np.testing.assert_array_equal(back.p_proton, ev.p_proton)
    np.testing.assert_array_equal(back.delay_index, ev.delay_index)
