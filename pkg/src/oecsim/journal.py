"""Durable state of the executor: the invocation log and the output store.

Both are append-only line logs. The invocation log holds one
``seq,function,frame,event`` line per transition (``enqueue`` or
``complete``). The output store holds ``put,function,frame,bytes`` and
``sent,bytes`` lines. A log lives either in a file or in memory; in memory,
lines written since the last ``flush()`` are lost by ``crash()``, which is how
the simulator models a hard reset.
"""

from __future__ import annotations

import os
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path


class LineLog:
    def __init__(self, path=None, fsync: bool = False):
        self.path = Path(path) if path is not None else None
        self.fsync = fsync
        self._durable: list[str] = []
        self._pending: list[str] = []
        self._fh = None
        if self.path is not None:
            self._fh = self.path.open("a", encoding="utf-8", newline="\n")

    def append(self, line: str) -> None:
        self._pending.append(line + "\n")

    def flush(self) -> None:
        if not self._pending:
            return
        if self._fh is not None:
            self._fh.write("".join(self._pending))
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
        else:
            self._durable.extend(self._pending)
        self._pending.clear()

    def crash(self) -> None:
        """Drop everything not yet flushed."""
        self._pending.clear()

    def read_text(self) -> str:
        if self._fh is not None:
            self._fh.flush()
            return self.path.read_text(encoding="utf-8")
        return "".join(self._durable)

    def rewrite(self, text: str) -> None:
        """Replace durable contents, e.g. after truncating a corrupt tail."""
        self._pending.clear()
        if self._fh is not None:
            self._fh.close()
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, self.path)
            self._fh = self.path.open("a", encoding="utf-8", newline="\n")
        else:
            self._durable = text.splitlines(keepends=True)

    def close(self) -> None:
        self.flush()
        if self._fh is not None:
            self._fh.close()
            self._fh = None


@dataclass(frozen=True, slots=True)
class QueueRecord:
    seq: int
    function: str
    frame: int
    state: str = "pending"  # "pending" | "done"


_LOG_LINE = re.compile(r"(\d+),([A-Za-z0-9_.\-]+),(\d+),(enqueue|complete)\n")


@dataclass
class Recovered:
    pending: deque = field(default_factory=deque)
    next_seq: int = 0
    completed: int = 0
    enqueued: int = 0
    valid_bytes: int = 0
    discarded_lines: int = 0
    lost_completed: int = 0


def parse_invocation_log(text: str) -> Recovered:
    """Replay an invocation log, stopping at the first invalid record.

    A record is invalid if it does not match the line grammar (including a
    missing trailing newline from a torn write), re-uses a sequence number,
    or completes something that is not pending. Everything from the first
    invalid record on is discarded and counted.
    """
    out = Recovered()
    pending: dict[int, QueueRecord] = {}
    pos = 0
    lines = text.splitlines(keepends=True)
    for i, line in enumerate(lines):
        m = _LOG_LINE.fullmatch(line)
        ok = m is not None
        if ok:
            seq, fn, frame, event = int(m[1]), m[2], int(m[3]), m[4]
            if event == "enqueue":
                ok = seq >= out.next_seq
                if ok:
                    pending[seq] = QueueRecord(seq, fn, frame)
                    out.next_seq = seq + 1
                    out.enqueued += 1
            else:
                rec = pending.get(seq)
                ok = rec is not None and rec.function == fn and rec.frame == frame
                if ok:
                    del pending[seq]
                    out.completed += 1
        if not ok:
            tail = lines[i:]
            out.discarded_lines = len(tail)
            out.lost_completed = sum(1 for t in tail if t.rstrip("\n").endswith(",complete"))
            break
        pos += len(line)
    out.valid_bytes = pos
    out.pending = deque(sorted(pending.values(), key=lambda r: r.seq))
    return out


class InvocationLog:
    def __init__(self, path=None, fsync: bool = False):
        self.log = LineLog(path, fsync)

    def enqueue(self, seq: int, function: str, frame: int) -> None:
        self.log.append(f"{seq},{function},{frame},enqueue")

    def complete(self, seq: int, function: str, frame: int) -> None:
        self.log.append(f"{seq},{function},{frame},complete")

    def flush(self) -> None:
        self.log.flush()

    def crash(self) -> None:
        self.log.crash()

    def restore(self) -> Recovered:
        """Rebuild queue state; a corrupt tail is truncated in place."""
        text = self.log.read_text()
        rec = parse_invocation_log(text)
        if rec.discarded_lines:
            self.log.rewrite(text[: rec.valid_bytes])
        return rec

    def close(self) -> None:
        self.log.close()


_PUT_LINE = re.compile(r"put,([A-Za-z0-9_.\-]+),(\d+),(\d+)\n")
_SENT_LINE = re.compile(r"sent,(\d+(?:\.\d+)?)\n")


@dataclass
class OutputState:
    keys: set = field(default_factory=set)
    bytes_written: float = 0.0
    bytes_sent: float = 0.0
    discarded_lines: int = 0

    @property
    def bytes_pending(self) -> float:
        return self.bytes_written - self.bytes_sent


def parse_output_log(text: str) -> OutputState:
    state = OutputState()
    lines = text.splitlines(keepends=True)
    for i, line in enumerate(lines):
        m = _PUT_LINE.fullmatch(line)
        if m:
            key = (m[1], int(m[2]))
            if key not in state.keys:
                state.keys.add(key)
                state.bytes_written += int(m[3])
            continue
        m = _SENT_LINE.fullmatch(line)
        if m:
            state.bytes_sent += float(m[1])
            continue
        state.discarded_lines = len(lines) - i
        break
    return state


class OutputStore:
    """Persistent output buffer with writes keyed by (function, frame)."""

    def __init__(self, path=None, fsync: bool = False):
        self.log = LineLog(path, fsync)
        self.keys: set = set()
        self.duplicates = 0

    def put(self, function: str, frame: int, nbytes: int) -> bool:
        key = (function, frame)
        if key in self.keys:
            self.duplicates += 1
            return False
        self.keys.add(key)
        self.log.append(f"put,{function},{frame},{int(nbytes)}")
        return True

    def record_sent(self, nbytes: float) -> None:
        self.log.append(f"sent,{nbytes:.6f}".rstrip("0").rstrip("."))

    def flush(self) -> None:
        self.log.flush()

    def crash(self) -> None:
        self.log.crash()

    def restore(self) -> OutputState:
        state = parse_output_log(self.log.read_text())
        self.keys = set(state.keys)
        return state

    def close(self) -> None:
        self.log.close()
