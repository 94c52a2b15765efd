"""Lightweight named counters used by tests to observe internal activity.

The counters are global and cheap to bump; production code paths only pay a
dict increment. Tests call ``reset()`` and then assert on specific names,
e.g. ``network_fetches`` or ``offsets_buffer_reads``.
"""

from __future__ import annotations

from collections import defaultdict

_counters: dict[str, int] = defaultdict(int)


def bump(name: str, n: int = 1) -> None:
    _counters[name] += n


def get(name: str) -> int:
    return _counters.get(name, 0)


def reset(name: str | None = None) -> None:
    """Zero one counter, or all of them when no name is given."""
    if name is None:
        _counters.clear()
    else:
        _counters.pop(name, None)


def snapshot() -> dict[str, int]:
    return dict(_counters)
