"""Tokenisation, vocabulary and the raw-text state featurizer.

The dialogue state is a fixed-length vector with one entry per
vocabulary word: entries for words in the last system utterance are
binary, entries for words in the last (noisy) user utterance carry that
word's confidence score, and user evidence overrides system evidence on
overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Hard cap on vocabulary size (and therefore net input width).
MAX_VOCAB = 100

_PUNCT = ".,!?"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split ``. , ! ?`` into their own tokens."""
    out: list[str] = []
    for chunk in text.lower().split():
        word = ""
        for ch in chunk:
            if ch in _PUNCT:
                if word:
                    out.append(word)
                    word = ""
                out.append(ch)
            else:
                word += ch
        if word:
            out.append(word)
    return out


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, deduplicated list of lowercase tokens with a word->index map."""

    words: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise VocabularyError("duplicate words in vocabulary")
        if len(self.words) > MAX_VOCAB:
            overflow = self.words[MAX_VOCAB:]
            raise VocabularyError(
                f"vocabulary exceeds {MAX_VOCAB} words "
                f"({len(self.words)}); overflow: {', '.join(overflow)}")
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    @classmethod
    def from_texts(cls, texts: list[str]) -> "Vocabulary":
        """Union of all tokens in ``texts``, lowercased and sorted lexicographically."""
        seen: set[str] = set()
        for text in texts:
            seen.update(tokenize(text))
        return cls(tuple(sorted(seen)))


@dataclass
class ScoredUtterance:
    """User word sequence with per-word confidence scores in [0, 1]."""

    words: list[str]
    scores: list[float]

    def __post_init__(self):
        if len(self.words) != len(self.scores):
            raise ValueError("words and scores must have equal length")

    @classmethod
    def empty(cls) -> "ScoredUtterance":
        return cls([], [])

    @classmethod
    def certain(cls, words: list[str]) -> "ScoredUtterance":
        return cls(list(words), [1.0] * len(words))


def featurize(system_words: list[str], user: ScoredUtterance,
              vocab: Vocabulary) -> np.ndarray:
    """State vector over ``vocab``: system words 1.0, user words their score.

    User entries override system entries; repeated user words keep the
    maximum score; out-of-vocabulary words are ignored.
    """
    state = np.zeros(len(vocab), dtype=np.float64)
    for word in system_words:
        j = vocab.index.get(word)
        if j is not None:
            state[j] = 1.0
    overridden: set[int] = set()
    for word, score in zip(user.words, user.scores):
        j = vocab.index.get(word)
        if j is None:
            continue
        if j in overridden:
            state[j] = max(state[j], score)
        else:
            state[j] = score
            overridden.add(j)
    return state
