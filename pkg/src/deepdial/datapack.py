"""Loading of the language data pack: templates, simulator responses,
restaurant database, vocabulary and per-slot value lexicons.

A data pack is self-contained per language; the vocabulary is the union
of every token appearing in any template, simulator rule or database
value, sorted lexicographically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from deepdial import nlg
from deepdial.acts import SLOTS
from deepdial.text import Vocabulary, tokenize

DB_COLUMNS = ("name", "food", "price", "area", "location")


class DataError(ValueError):
    """A data file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class Restaurant:
    name: str
    food: str
    price: str
    area: str
    location: str


class RestaurantDB:
    def __init__(self, rows: list[Restaurant]):
        if not rows:
            raise DataError("restaurant database is empty")
        self.rows = list(rows)

    def values(self, column: str) -> list[str]:
        """Distinct values of a column, in first-appearance order."""
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(getattr(row, column), None)
        return list(seen)

    def lookup(self, filled: dict[str, str]) -> Restaurant | None:
        """First restaurant matching every filled slot; unfilled slots match anything."""
        for row in self.rows:
            if all(getattr(row, slot) == value for slot, value in filled.items()
                   if slot in SLOTS):
                return row
        return None


def parse_restaurant_csv(content: str) -> RestaurantDB:
    reader = csv.reader(content.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("restaurant database has no header") from None
    if tuple(h.strip() for h in header) != DB_COLUMNS:
        raise DataError(f"restaurant header must be {','.join(DB_COLUMNS)}")
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields or not any(f.strip() for f in fields):
            continue
        if len(fields) != len(DB_COLUMNS):
            raise DataError(f"restaurants line {lineno}: expected {len(DB_COLUMNS)} fields")
        rows.append(Restaurant(*(f.strip().lower() for f in fields)))
    return RestaurantDB(rows)


class DataPack:
    """Everything the environment needs for one language."""

    def __init__(self, templates: nlg.TemplateSet, user_responses: dict[str, str],
                 db: RestaurantDB, language: str = "en"):
        self.language = language
        self.templates = templates
        self.user_responses = user_responses
        self.db = db
        self.slot_values: dict[str, list[str]] = {slot: db.values(slot) for slot in SLOTS}
        self.vocab = build_vocabulary(templates, user_responses, db)
        # Per-slot lexicons as token sequences, longest first for greedy matching.
        self.slot_lexicons: dict[str, list[tuple[str, ...]]] = {
            slot: sorted((tuple(tokenize(v)) for v in values),
                         key=len, reverse=True)
            for slot, values in self.slot_values.items()
        }

    def value_from_tokens(self, tokens: tuple[str, ...]) -> str:
        return " ".join(tokens)


def build_vocabulary(templates: nlg.TemplateSet, user_responses: dict[str, str],
                     db: RestaurantDB) -> Vocabulary:
    """Union of tokens from templates, simulator rules and DB values."""
    texts = templates.lexicon_texts()
    texts += [nlg._PLACEHOLDER.sub(" ", t) for t in user_responses.values()]
    for row in db.rows:
        texts += [row.name, row.food, row.price, row.area, row.location]
    texts.append(nlg.FALLBACK_WORD)
    return Vocabulary.from_texts(texts)


def default_data_dir() -> Path:
    return Path(str(resources.files("deepdial").joinpath("data")))


def load_data_pack(data_dir: str | Path | None = None, language: str = "en") -> DataPack:
    """Load a data pack from a directory (defaults to the shipped English pack)."""
    directory = Path(data_dir) if data_dir is not None else default_data_dir()
    template_path = directory / f"templates_{language}.tsv"
    responses_path = directory / f"user_responses_{language}.tsv"
    db_path = directory / "restaurants.csv"
    for path in (template_path, responses_path, db_path):
        if not path.exists():
            raise DataError(f"data file not found: {path}")
    try:
        templates = nlg.TemplateSet(nlg.parse_template_file(
            template_path.read_text(encoding="utf-8")))
    except nlg.TemplateError as exc:
        raise DataError(f"{template_path}: {exc}") from exc
    try:
        user_responses = nlg.parse_template_file(
            responses_path.read_text(encoding="utf-8"))
    except nlg.TemplateError as exc:
        raise DataError(f"{responses_path}: {exc}") from exc
    db = parse_restaurant_csv(db_path.read_text(encoding="utf-8"))
    return DataPack(templates, user_responses, db, language=language)
