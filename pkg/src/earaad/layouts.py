"""Named channel subsets used for electrode-layout comparisons.

Built-in layouts cover the synthetic naming scheme only: two ten-contact
ear arrays ``L1..L10`` / ``R1..R10`` plus optional distal channels
``D1..Dk`` that carry no stimulus-driven signal. Real-data layouts are
read from text files with one channel label per line.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import LayoutError
from .signals import MultiSeries

__all__ = ["Layout", "BUILTIN_LAYOUTS", "get_layout", "load_layout_file", "resolve_layout",
           "select_layout", "ear_channel_names"]


def ear_channel_names() -> tuple[str, ...]:
    return tuple(f"L{i}" for i in range(1, 11)) + tuple(f"R{i}" for i in range(1, 11))


@dataclass(frozen=True)
class Layout:
    name: str
    channels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        if not self.channels:
            raise LayoutError(f"layout {self.name!r} is empty")
        dupes = sorted({c for c in self.channels if self.channels.count(c) > 1})
        if dupes:
            raise LayoutError(f"layout {self.name!r} repeats channels: {', '.join(dupes)}")


BUILTIN_LAYOUTS = {
    "ear": Layout("ear", ear_channel_names()),
    "left": Layout("left", ear_channel_names()[:10]),
    "right": Layout("right", ear_channel_names()[10:]),
    "distal": Layout("distal", tuple(f"D{i}" for i in range(1, 21))),
}


def get_layout(name: str) -> Layout:
    try:
        return BUILTIN_LAYOUTS[name]
    except KeyError:
        raise LayoutError(
            f"unknown layout {name!r}; built-ins are {', '.join(sorted(BUILTIN_LAYOUTS))}"
        ) from None


def load_layout_file(path) -> Layout:
    path = Path(path)
    labels = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    labels = [ln for ln in labels if ln and not ln.startswith("#")]
    return Layout(path.stem, tuple(labels))


def resolve_layout(spec: str | None) -> Layout | None:
    """Turn a CLI layout argument (name, file path or ``all``) into a Layout."""
    if spec is None or spec == "all":
        return None
    if spec in BUILTIN_LAYOUTS:
        return BUILTIN_LAYOUTS[spec]
    if Path(spec).is_file():
        return load_layout_file(spec)
    return get_layout(spec)


def select_layout(eeg: MultiSeries, layout: Layout | None) -> MultiSeries:
    """Columns of ``eeg`` in layout order; ``None`` keeps every channel."""
    if layout is None:
        return eeg
    missing = [c for c in layout.channels if c not in eeg.channels]
    if missing:
        raise LayoutError(f"layout {layout.name!r} references unknown channels: "
                          f"{', '.join(missing)}")
    idx = [eeg.channels.index(c) for c in layout.channels]
    return MultiSeries(eeg.samples[:, idx], eeg.fs, layout.channels)
