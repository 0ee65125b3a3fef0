"""Tokenization and lexicon-based part-of-speech tagging.

The engine only needs to know which caption words are nouns and which
are verbs.  A bundled plain-text lexicon keeps that decision
deterministic and dependency-free; anything the lexicon does not list
is tagged ``other``.  The lexicon file format is one entry per line,
``word<TAB>tag[,tag]``, UTF-8.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ValidationError

NOUN = "noun"
VERB = "verb"
OTHER = "other"

_VALID_TAGS = {NOUN, VERB}
_STRIP_CHARS = string.punctuation + string.whitespace

# Forms of "to be" used by the ambiguity heuristic.
_BE_FORMS = {"am", "is", "are", "was", "were", "be", "been", "being"}


def tokenize(text: str) -> list[str]:
    """Split on whitespace, strip surrounding punctuation, lowercase.

    Internal punctuation (hyphens, apostrophes) is preserved; tokens
    that are pure punctuation are dropped.
    """
    tokens = []
    for raw in text.split():
        word = raw.strip(_STRIP_CHARS).lower()
        if word:
            tokens.append(word)
    return tokens


class Lexicon:
    """Case-insensitive word -> admissible-tags lookup."""

    def __init__(self, entries: dict[str, frozenset[str]] | None = None):
        self._entries: dict[str, frozenset[str]] = {}
        if entries:
            for word, tags in entries.items():
                self.add(word, tags)

    def add(self, word: str, tags) -> None:
        tags = frozenset(tags)
        bad = tags - _VALID_TAGS
        if bad:
            raise ValidationError(f"unknown lexicon tags {sorted(bad)!r}")
        self._entries[word.lower()] = tags

    def tags_for(self, word: str) -> frozenset[str]:
        """Admissible tags for a word; unknown words map to no tags."""
        return self._entries.get(word.lower(), frozenset())

    def words(self, tag: str) -> list[str]:
        """All words that admit exactly the given single tag, sorted."""
        return sorted(
            w for w, tags in self._entries.items() if tags == frozenset({tag})
        )

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        lex = cls()
        text = Path(path).read_text(encoding="utf-8")
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(
                    f"expected 'word<TAB>tags', got {line!r}", line=lineno
                )
            word, tag_field = parts
            tags = [t.strip() for t in tag_field.split(",") if t.strip()]
            if not tags:
                raise ValidationError(f"no tags for {word!r}", line=lineno)
            try:
                lex.add(word, tags)
            except ValidationError as exc:
                raise ValidationError(str(exc), line=lineno)
        return lex


def default_lexicon() -> Lexicon:
    """Load the lexicon bundled with the package."""
    ref = resources.files("refrain").joinpath("data/lexicon.txt")
    with resources.as_file(ref) as path:
        return Lexicon.from_file(path)


@dataclass
class Caption:
    """A caption with its tokens and per-token noun/verb/other tags."""

    id: str
    text: str
    tokens: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)

    @classmethod
    def from_text(cls, cid: str, text: str, lexicon: Lexicon) -> "Caption":
        tokens = tokenize(text)
        tags = tag_tokens(tokens, lexicon)
        return cls(id=cid, text=text, tokens=tokens, tags=tags)


def _resolve_ambiguous(tokens: list[str], index: int) -> str:
    """Noun-or-verb call for a word the lexicon lists as both.

    Tagged verb when immediately preceded by a form of "to be" or by an
    adverb-looking ``-ly`` word, else noun.  Tagging quality is not the
    point here; the heuristic just has to be deterministic.
    """
    if index > 0:
        prev = tokens[index - 1]
        if prev in _BE_FORMS or prev.endswith("ly"):
            return VERB
    return NOUN


def tag_tokens(tokens: list[str], lexicon: Lexicon) -> list[str]:
    """Per-token tags using the lexicon plus the ambiguity heuristic."""
    tags = []
    for i, token in enumerate(tokens):
        admissible = lexicon.tags_for(token)
        if admissible == frozenset({NOUN}):
            tags.append(NOUN)
        elif admissible == frozenset({VERB}):
            tags.append(VERB)
        elif admissible == frozenset({NOUN, VERB}):
            tags.append(_resolve_ambiguous(tokens, i))
        else:
            tags.append(OTHER)
    return tags


def extract_keywords(caption: Caption, lexicon: Lexicon) -> tuple[list[str], list[str]]:
    """Noun and verb keyword lists in first-occurrence order.

    Duplicates collapse to their first occurrence, so a word can appear
    in at most one of the two lists.  Captions with no lexicon hits
    yield two empty lists.
    """
    tokens = caption.tokens
    tags = caption.tags
    if len(tokens) != len(tags):
        tags = tag_tokens(tokens, lexicon)
    nouns: list[str] = []
    verbs: list[str] = []
    seen: set[str] = set()
    for token, tag in zip(tokens, tags):
        if token in seen:
            continue
        seen.add(token)
        if tag == NOUN:
            nouns.append(token)
        elif tag == VERB:
            verbs.append(token)
    return nouns, verbs
