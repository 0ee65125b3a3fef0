"""Unit tests for tokenization, tagging, and keyword extraction."""
import pytest

from refrain.errors import ValidationError
from refrain.tagger import (
    Caption,
    Lexicon,
    extract_keywords,
    tag_tokens,
    tokenize,
)

CARS = "Three cars racing on a track, trying to outpace each other."
CAT = "A cat is panting like a dog and rolling around in a cat bed."


class TestTokenize:
    def test_basic_segmentation(self):
        assert tokenize("Three cars racing on a track.") == [
            "three", "cars", "racing", "on", "a", "track"]

    def test_empty_text(self):
        assert tokenize("") == []

    def test_punctuation_stripping_keeps_internal_hyphen(self):
        assert tokenize("cat-bed, rolling!") == ["cat-bed", "rolling"]

    def test_pure_punctuation_tokens_dropped(self):
        assert tokenize("hello - world ...") == ["hello", "world"]


class TestLexicon:
    def test_case_insensitive_lookup(self, lexicon):
        assert lexicon.tags_for("Cat") == lexicon.tags_for("cat")

    def test_unknown_word_has_no_tags(self, lexicon):
        assert lexicon.tags_for("zzgrumble") == frozenset()

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("cat\tnoun\nrun\tverb\nplay\tnoun,verb\n")
        lex = Lexicon.from_file(path)
        assert lex.tags_for("cat") == frozenset({"noun"})
        assert lex.tags_for("play") == frozenset({"noun", "verb"})

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("cat noun\n")
        with pytest.raises(ValidationError):
            Lexicon.from_file(path)

    def test_unknown_tag_rejected(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("cat\tadjective\n")
        with pytest.raises(ValidationError):
            Lexicon.from_file(path)


class TestAmbiguityHeuristic:
    @pytest.fixture
    def ambiguous(self):
        return Lexicon({"play": {"noun", "verb"}})

    def test_after_be_form_is_verb(self, ambiguous):
        tokens = tokenize("they are play acting")
        assert tag_tokens(tokens, ambiguous)[2] == "verb"

    def test_after_adverb_is_verb(self, ambiguous):
        tokens = tokenize("we quickly play chess")
        assert tag_tokens(tokens, ambiguous)[2] == "verb"

    def test_default_is_noun(self, ambiguous):
        tokens = tokenize("the play was great")
        assert tag_tokens(tokens, ambiguous)[1] == "noun"


class TestExtractKeywords:
    def test_cars_caption(self, lexicon):
        caption = Caption.from_text("q", CARS, lexicon)
        nouns, verbs = extract_keywords(caption, lexicon)
        assert nouns == ["cars", "track"]
        assert verbs == ["racing", "outpace"]

    def test_cat_caption(self, lexicon):
        caption = Caption.from_text("q", CAT, lexicon)
        nouns, verbs = extract_keywords(caption, lexicon)
        assert {"cat", "dog", "bed"} <= set(nouns)
        assert {"panting", "rolling"} <= set(verbs)

    def test_unknown_vocabulary(self, lexicon):
        caption = Caption.from_text("q", "zorp glipped the fnord", lexicon)
        assert extract_keywords(caption, lexicon) == ([], [])

    def test_keywords_subset_of_tokens(self, lexicon):
        caption = Caption.from_text("q", CAT, lexicon)
        nouns, verbs = extract_keywords(caption, lexicon)
        assert set(nouns) | set(verbs) <= set(caption.tokens)

    def test_lists_are_disjoint(self, lexicon):
        caption = Caption.from_text("q", CAT + " " + CARS, lexicon)
        nouns, verbs = extract_keywords(caption, lexicon)
        assert not set(nouns) & set(verbs)

    def test_deterministic_and_idempotent(self, lexicon):
        caption = Caption.from_text("q", CARS, lexicon)
        first = extract_keywords(caption, lexicon)
        second = extract_keywords(caption, lexicon)
        assert first == second

    def test_duplicates_collapse_to_first_occurrence(self, lexicon):
        caption = Caption.from_text("q", "cat chasing cat and dog", lexicon)
        nouns, _ = extract_keywords(caption, lexicon)
        assert nouns == ["cat", "dog"]
