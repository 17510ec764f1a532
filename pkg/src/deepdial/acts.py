"""Dialogue act catalog for the restaurant domain.

The action alphabet is a fixed, ordered list of 35 acts. Index order is
part of the contract: policies, wire messages and the Naive Bayes model
all address actions by catalog index.
"""

from __future__ import annotations

from dataclasses import dataclass

ACT_TYPES = (
    "Salutation",
    "Request",
    "AskFor",
    "Apology",
    "ExpConfirm",
    "ImpConfirm",
    "Retrieve",
    "Provide",
)

SLOTS = ("food", "price", "area")

# Canonical ordering of act arguments. Slot args follow (food, price, area);
# the remaining tokens only ever appear alone.
_ARG_ORDER = {name: i for i, name in enumerate(
    ("greeting", "closing", "hmihy", "more", "info", "known", "unknown",
     "food", "price", "area"))}

# Slot subsets in catalog order: singles first, then pairs, then the triple.
_SLOT_COMBOS = (
    ("food",), ("price",), ("area",),
    ("food", "price"), ("food", "area"), ("price", "area"),
    ("food", "price", "area"),
)


@dataclass(frozen=True)
class DialogueAct:
    """An act type plus an ordered tuple of arguments, e.g. Request(food, price)."""

    act_type: str
    args: tuple[str, ...]

    def __post_init__(self):
        if self.act_type not in ACT_TYPES:
            raise ValueError(f"unknown act type: {self.act_type!r}")
        for arg in self.args:
            if arg not in _ARG_ORDER:
                raise ValueError(f"unknown act argument: {arg!r}")
        ordered = tuple(sorted(self.args, key=_ARG_ORDER.__getitem__))
        object.__setattr__(self, "args", ordered)

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(a for a in self.args if a in SLOTS)

    def __str__(self) -> str:
        return f"{self.act_type}({','.join(self.args)})"

    @classmethod
    def parse(cls, text: str) -> "DialogueAct":
        """Parse an act string such as ``"ImpConfirm(food,price,area)"``.

        Whitespace around arguments is tolerated; argument order is
        normalised to the canonical form.
        """
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise ValueError(f"malformed act string: {text!r}")
        head, _, inner = text[:-1].partition("(")
        args = tuple(a.strip() for a in inner.split(",") if a.strip())
        return cls(head.strip(), args)


def _build_catalog() -> tuple[DialogueAct, ...]:
    acts = [DialogueAct("Salutation", ("greeting",)),
            DialogueAct("Request", ("hmihy",))]
    acts += [DialogueAct("Request", combo) for combo in _SLOT_COMBOS]
    acts.append(DialogueAct("AskFor", ("more",)))
    acts += [DialogueAct("Apology", combo) for combo in _SLOT_COMBOS]
    acts += [DialogueAct("ExpConfirm", combo) for combo in _SLOT_COMBOS]
    acts += [DialogueAct("ImpConfirm", combo) for combo in _SLOT_COMBOS]
    acts += [DialogueAct("Retrieve", ("info",)),
             DialogueAct("Provide", ("unknown",)),
             DialogueAct("Provide", ("known",)),
             DialogueAct("Salutation", ("closing",))]
    return tuple(acts)


#: The 35-act catalog, index 0 = Salutation(greeting) ... 34 = Salutation(closing).
CATALOG: tuple[DialogueAct, ...] = _build_catalog()

NUM_ACTIONS = len(CATALOG)

ACT_INDEX: dict[DialogueAct, int] = {act: i for i, act in enumerate(CATALOG)}

GREETING = ACT_INDEX[DialogueAct("Salutation", ("greeting",))]
CLOSING = ACT_INDEX[DialogueAct("Salutation", ("closing",))]
ASK_MORE = ACT_INDEX[DialogueAct("AskFor", ("more",))]
RETRIEVE = ACT_INDEX[DialogueAct("Retrieve", ("info",))]
PROVIDE_KNOWN = ACT_INDEX[DialogueAct("Provide", ("known",))]
PROVIDE_UNKNOWN = ACT_INDEX[DialogueAct("Provide", ("unknown",))]


def act_index(act: DialogueAct | str) -> int:
    """Catalog index of an act (by value or by act string)."""
    if isinstance(act, str):
        act = DialogueAct.parse(act)
    try:
        return ACT_INDEX[act]
    except KeyError:
        raise ValueError(f"act not in catalog: {act}") from None


# Acts after which the user is expected to speak. Salutations, implicit
# confirmations, retrieval and provision get no user turn.
def expects_user_input(act: DialogueAct) -> bool:
    return act.act_type in ("Request", "Apology", "ExpConfirm", "AskFor")
