"""Matmul FLOP accounting.

``matmul`` reports every product here; counting is off unless a
:func:`count_flops` block is active. Products are attributed to the
innermost :func:`category` label (``"other"`` by default).
"""
import contextlib
from collections import Counter

_active = None
_category = "other"


class FlopCounter(Counter):
    @property
    def total(self) -> int:
        return sum(self.values())


@contextlib.contextmanager
def count_flops():
    global _active
    prev = _active
    counter = FlopCounter()
    _active = counter
    try:
        yield counter
    finally:
        _active = prev


@contextlib.contextmanager
def category(name: str):
    global _category
    prev = _category
    _category = name
    try:
        yield
    finally:
        _category = prev


def record_matmul(out_size: int, inner: int) -> None:
    if _active is not None:
        _active[_category] += 2 * out_size * inner
