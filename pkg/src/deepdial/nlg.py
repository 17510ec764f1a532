"""Template-based language generation.

Templates are data: one surface form per act per language, loaded from a
tab-separated file. Slot placeholders are filled from the values the
dialogue has accumulated; a slot referenced before it holds a value
falls back to the wildcard word so every cataloged act stays utterable.
"""

from __future__ import annotations

import re

from deepdial.acts import CATALOG, DialogueAct
from deepdial.text import tokenize

#: Surface word substituted for slot placeholders that have no value yet.
FALLBACK_WORD = "any"

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


class TemplateError(ValueError):
    pass


def parse_template_file(content: str) -> dict[str, str]:
    """Parse ``<key>\\t<template>`` lines; ``#`` starts a comment line."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise TemplateError(f"line {lineno}: expected <key>\\t<template>")
        key, template = line.split("\t", 1)
        entries[key.strip()] = template.strip()
    return entries


class TemplateSet:
    """Act-string -> template mapping covering the whole catalog."""

    def __init__(self, templates: dict[str, str]):
        missing = [str(act) for act in CATALOG if str(act) not in templates]
        if missing:
            raise TemplateError(f"templates missing for acts: {', '.join(missing)}")
        self.templates = dict(templates)

    def surface(self, act: DialogueAct, values: dict[str, str]) -> str:
        """Substitute ``values`` into the act's template, returning the surface string."""
        template = self.templates[str(act)]

        def sub(match: re.Match) -> str:
            name = match.group(1)
            value = values.get(name)
            if value is None:
                raise TemplateError(f"no value for placeholder slot: {name}")
            return value

        return _PLACEHOLDER.sub(sub, template)

    def lexicon_texts(self) -> list[str]:
        """Template texts with placeholders stripped, for vocabulary building."""
        return [_PLACEHOLDER.sub(" ", t) for t in self.templates.values()]


def verbalize(act: DialogueAct, values: dict[str, str],
              templates: TemplateSet) -> tuple[str, list[str]]:
    """Render an act to (surface string, token list).

    ``values`` supplies slot fills plus ``name``/``location`` for
    Provide(known). Missing food/price/area values fall back to the
    wildcard word; a missing name/location is an error.
    """
    fallback = dict(values)
    for slot in act.slots:
        fallback.setdefault(slot, FALLBACK_WORD)
    surface = templates.surface(act, fallback)
    return surface, tokenize(surface)
