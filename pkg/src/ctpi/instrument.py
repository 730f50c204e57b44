"""Operation counters for benchmarking.

Factor operations report multiply-accumulate work to whatever ``Counters``
is active in the current context; engines additionally report the number of
table entries they hold live. Nothing is counted when no counter is active.
"""
from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass

_active: contextvars.ContextVar["Counters | None"] = contextvars.ContextVar(
    "ctpi_counters", default=None
)


@dataclass
class Counters:
    macc: int = 0
    peak_entries: int = 0
    messages: int = 0

    def observe_live(self, entries: int) -> None:
        if entries > self.peak_entries:
            self.peak_entries = entries

    def snapshot(self) -> "Counters":
        return Counters(self.macc, self.peak_entries, self.messages)


def count_macc(n: int) -> None:
    c = _active.get()
    if c is not None:
        c.macc += int(n)


def observe_live(entries: int) -> None:
    c = _active.get()
    if c is not None:
        c.observe_live(entries)


def count_message() -> None:
    c = _active.get()
    if c is not None:
        c.messages += 1


@contextlib.contextmanager
def counting(counters: Counters | None = None):
    counters = counters if counters is not None else Counters()
    token = _active.set(counters)
    try:
        yield counters
    finally:
        _active.reset(token)
