"""Binary coincidence-event files and their CSV mirror.

Layout (little-endian)::

    magic        4s   b"ATL1"
    version      u4   1
    config_hash  32s  SHA-256 of the canonical run configuration
    seed         u8
    n_events     u8
    n_delays     u4
    delays       n_delays * f8   (fs)
    records      n_events * 56 bytes:
                 u4 delay_index, 4 pad bytes,
                 f8 p_e[3], f8 p_ion[3]   (a.u., laboratory frame)
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"ATL1"
VERSION = 1
_HEADER = struct.Struct("<4sI32sQQI")

RECORD_DTYPE = np.dtype([
    ("delay_index", "<u4"),
    ("pad", "V4"),
    ("p_electron", "<f8", (3,)),
    ("p_proton", "<f8", (3,)),
])
assert RECORD_DTYPE.itemsize == 56

CSV_COLUMNS = ["delay_index", "delay_fs", "pe_x", "pe_y", "pe_z", "pp_x", "pp_y", "pp_z"]


class EventFileError(IOError):
    """Malformed or unreadable event file."""


@dataclass(eq=False)
class EventFile:
    delays: np.ndarray
    records: np.ndarray
    config_hash: bytes = b"\0" * 32
    seed: int = 0

    def __post_init__(self):
        self.delays = np.ascontiguousarray(self.delays, dtype="<f8")
        if self.records.dtype != RECORD_DTYPE:
            raise ValueError("records must use RECORD_DTYPE")
        if len(self.config_hash) != 32:
            raise ValueError("config hash must be 32 bytes")

    @property
    def n_events(self) -> int:
        return len(self.records)

    @property
    def p_electron(self) -> np.ndarray:
        return self.records["p_electron"]

    @property
    def p_proton(self) -> np.ndarray:
        return self.records["p_proton"]

    @property
    def delay_index(self) -> np.ndarray:
        return self.records["delay_index"]

    def counts_per_delay(self) -> np.ndarray:
        return np.bincount(self.delay_index, minlength=len(self.delays))


def make_records(delay_index, p_electron, p_proton) -> np.ndarray:
    n = len(delay_index)
    rec = np.zeros(n, dtype=RECORD_DTYPE)
    rec["delay_index"] = delay_index
    rec["p_electron"] = p_electron
    rec["p_proton"] = p_proton
    return rec


def to_bytes(ev: EventFile) -> bytes:
    head = _HEADER.pack(MAGIC, VERSION, ev.config_hash, int(ev.seed) & (2**64 - 1),
                        ev.n_events, len(ev.delays))
    return head + ev.delays.tobytes() + ev.records.tobytes()


def write_event_file(ev: EventFile, path) -> None:
    try:
        Path(path).write_bytes(to_bytes(ev))
    except OSError as exc:
        raise EventFileError(f"cannot write {path}: {exc}") from exc


def from_bytes(buf: bytes, name: str = "<bytes>") -> EventFile:
    if len(buf) < _HEADER.size:
        raise EventFileError(f"{name}: truncated header")
    magic, version, chash, seed, n_events, n_delays = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise EventFileError(f"{name}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise EventFileError(f"{name}: unsupported version {version}")
    off = _HEADER.size
    need = off + 8 * n_delays + RECORD_DTYPE.itemsize * n_events
    if len(buf) != need:
        raise EventFileError(f"{name}: size {len(buf)} bytes, header implies {need}")
    delays = np.frombuffer(buf, "<f8", n_delays, off).copy()
    off += 8 * n_delays
    records = np.frombuffer(buf, RECORD_DTYPE, n_events, off).copy()
    if n_events and records["delay_index"].max() >= n_delays:
        raise EventFileError(f"{name}: delay index out of range")
    return EventFile(delays, records, chash, seed)


def read_event_file(path) -> EventFile:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise EventFileError(f"cannot read {path}: {exc}") from exc
    return from_bytes(buf, str(path))


def export_csv(ev: EventFile, path) -> None:
    """One row per event: delay index, delay (fs), electron and proton momenta."""
    d = ev.delay_index
    table = np.column_stack([ev.delays[d] if len(d) else np.zeros(0), ev.p_electron, ev.p_proton])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i, row in zip(d, table):
            fh.write(f"{i}," + ",".join(repr(float(x)) for x in row) + "\n")


def read_csv(path, delays=None) -> EventFile:
    """Inverse of :func:`export_csv`; delays are recovered from the rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise EventFileError(f"{path}: unexpected header {header}")
        rows = [r for r in reader if r]
    idx = np.array([int(r[0]) for r in rows], dtype=np.uint32)
    vals = np.array([[float(x) for x in r[1:]] for r in rows]).reshape(-1, 7)
    if delays is None:
        n = int(idx.max()) + 1 if len(idx) else 0
        delays = np.zeros(n)
        delays[idx] = vals[:, 0]
    return EventFile(np.asarray(delays), make_records(idx, vals[:, 1:4], vals[:, 4:7]))
