"""Slot fill/confirm bookkeeping for one dialogue episode.

The context is what the environment knows about the conversation so
far: which slots were heard (and how confidently), which are confirmed,
whether a database lookup happened, and the episode's progress flags.
The learned policy never sees this directly; it only sees the word
feature vector. The context drives reward and action legitimacy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from deepdial.acts import SLOTS
from deepdial.datapack import Restaurant
from deepdial.text import ScoredUtterance


@dataclass
class SlotFill:
    value: str
    confidence: float


@dataclass
class DialogueContext:
    filled: dict[str, SlotFill] = field(default_factory=dict)
    confirmed: set[str] = field(default_factory=set)
    turns: int = 0
    last_system_tokens: list[str] = field(default_factory=list)
    last_user: ScoredUtterance = field(default_factory=ScoredUtterance.empty)
    lookup_done: bool = False
    retrieved: Restaurant | None = None
    info_provided: bool = False
    declined_more: bool = False
    terminal: bool = False
    stall_turns: int = 0

    def progress_marker(self) -> tuple:
        """Snapshot of everything that counts as dialogue progress."""
        return (tuple(sorted((s, f.value) for s, f in self.filled.items())),
                frozenset(self.confirmed), self.lookup_done,
                self.info_provided, self.declined_more)

    def fill(self, slot: str, value: str, confidence: float) -> None:
        """Record a heard slot value; a changed value revokes confirmation."""
        current = self.filled.get(slot)
        if current is not None and current.value != value:
            self.confirmed.discard(slot)
        self.filled[slot] = SlotFill(value, confidence)

    def confirm(self, slot: str) -> None:
        if slot in self.filled:
            self.confirmed.add(slot)

    def slot_values(self) -> dict[str, str]:
        """Filled slot values plus name/location of a retrieved restaurant."""
        values = {slot: fill.value for slot, fill in self.filled.items()}
        if self.retrieved is not None:
            values["name"] = self.retrieved.name
            values["location"] = self.retrieved.location
        return values

    def unfilled(self) -> set[str]:
        return {s for s in SLOTS if s not in self.filled}

    def all_confirmed(self) -> bool:
        return all(s in self.confirmed for s in SLOTS)
