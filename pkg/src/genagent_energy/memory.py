"""Per-agent journal memory rendered back into later prompts."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .tarj import TarjRecord

EMPTY_HISTORY = "(nothing yet)"


@dataclass(frozen=True)
class MemoryEntry:
    index: int
    summary: str
    journal: str


@dataclass(frozen=True)
class MemoryStore:
    """Append-only journal; ``window`` caps how many entries are rendered.

    ``update_memory`` returns a new store, so earlier snapshots never change.
    """

    entries: tuple[MemoryEntry, ...] = ()
    window: int | None = 20
    label: str = "Day"

    def _visible(self) -> tuple[MemoryEntry, ...]:
        if self.window is None:
            return self.entries
        return self.entries[-self.window:] if self.window > 0 else ()

    def history_text(self) -> str:
        lines = [f"{self.label} {e.index}: {e.summary}" for e in self._visible()]
        return "\n".join(lines) if lines else EMPTY_HISTORY

    def journal_text(self) -> str:
        lines = [f"{self.label} {e.index}: {e.journal}" for e in self._visible() if e.journal]
        return "\n".join(lines) if lines else EMPTY_HISTORY

    def __len__(self) -> int:
        return len(self.entries)


def update_memory(
    memory: MemoryStore, record: TarjRecord, outcome: str, index: int | None = None
) -> MemoryStore:
    if index is None:
        index = memory.entries[-1].index + 1 if memory.entries else 1
    entry = MemoryEntry(index=index, summary=" ".join(outcome.split()), journal=record.journal)
    return replace(memory, entries=memory.entries + (entry,))
