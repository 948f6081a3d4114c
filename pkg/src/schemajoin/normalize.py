"""Attribute-name preprocessing: split raw names into lowercase word tokens,
expand abbreviations, cut run-together words against a wordlist, and pick a
tf-idf keyword for knowledge-base anchoring.

Rule tags follow the order the transformations run in:

    a  identity (delimiter and camel-case splitting only)
    b  abbreviation expansion
    c  dictionary word cutting
    d  manual override
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import NormalizationError

IDENTITY, ABBREVIATION, WORD_CUTTING, OTHER = "a", "b", "c", "d"
RULES = {IDENTITY: "identity", ABBREVIATION: "abbreviation", WORD_CUTTING: "word-cutting", OTHER: "other"}

_DELIMS = re.compile(r"[\s_\-./:,;()\[\]]+")
_CAMEL = re.compile(r"(?<=[a-z])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])|(?<=[^\W\d])(?=\d)|(?<=\d)(?=[^\W\d])")


@dataclass
class NormalizationRule:
    tag: str
    source: str = ""

    @property
    def name(self) -> str:
        return RULES[self.tag]


@dataclass
class TokenizedAttribute:
    raw: str
    tokens: list[str]
    rule_fired: str
    keyword: str
    unsplit: list[str] = field(default_factory=list)

    @property
    def phrase(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Dictionaries:
    abbrevs: dict[str, str] = field(default_factory=dict)
    wordlist: set[str] = field(default_factory=set)
    overrides: dict[str, list[str]] = field(default_factory=dict)

    @classmethod
    def load(cls, abbrev: str | Path | None = None, wordlist: str | Path | None = None,
             overrides: str | Path | None = None) -> "Dictionaries":
        d = cls()
        if abbrev:
            for line in Path(abbrev).read_text(encoding="utf-8").splitlines():
                if line.strip() and "\t" in line:
                    k, v = line.split("\t", 1)
                    d.abbrevs[k.strip().lower()] = v.strip()
        if wordlist:
            d.wordlist = {w.strip().lower() for w in
                          Path(wordlist).read_text(encoding="utf-8").splitlines() if w.strip()}
        if overrides:
            for line in Path(overrides).read_text(encoding="utf-8").splitlines():
                if line.strip() and "\t" in line:
                    k, v = line.split("\t", 1)
                    d.overrides[k.strip()] = [t.lower() for t in re.split(r"[\s,]+", v.strip()) if t]
        return d


def split_tokens(raw: str) -> list[str]:
    tokens = []
    for part in _DELIMS.split(raw):
        tokens.extend(p.lower() for p in _CAMEL.split(part) if p)
    return tokens


def cut_word(token: str, wordlist: set[str]) -> list[str] | None:
    """Greedy longest-match-from-the-left segmentation; None if it gets stuck."""
    out = []
    i = 0
    longest = max((len(w) for w in wordlist), default=0)
    while i < len(token):
        for j in range(min(len(token), i + longest), i, -1):
            if token[i:j] in wordlist:
                out.append(token[i:j])
                i = j
                break
        else:
            return None
    return out


def normalize_attribute(
    raw: str,
    abbrevs: Mapping[str, str] | None = None,
    wordlist: Iterable[str] | None = None,
    overrides: Mapping[str, Sequence[str]] | None = None,
) -> TokenizedAttribute:
    """Tokenize one attribute name. The recorded rule is the last stage that
    changed the tokens (override > word cutting > abbreviation > identity)."""
    if not raw or not raw.strip():
        raise NormalizationError("empty attribute name")
    abbrevs = {k.lower(): v for k, v in (abbrevs or {}).items()}
    words = set(w.lower() for w in (wordlist or ()))
    overrides = overrides or {}

    override = overrides.get(raw)
    if override is None:
        override = next((v for k, v in overrides.items() if k.lower() == raw.lower()), None)
    if override:
        tokens = [t.lower() for t in override]
        return TokenizedAttribute(raw, tokens, OTHER, tokens[0])

    tokens = split_tokens(raw)
    if not tokens:
        raise NormalizationError(f"no word characters in {raw!r}")
    rule = IDENTITY

    expanded = []
    for t in tokens:
        if t in abbrevs:
            expanded.extend(split_tokens(abbrevs[t]))
            rule = ABBREVIATION
        else:
            expanded.append(t)
    tokens = expanded

    unsplit = []
    if words:
        cut = []
        for t in tokens:
            if t in words or t.isdigit():
                cut.append(t)
                continue
            pieces = cut_word(t, words)
            if pieces is None:
                cut.append(t)
                unsplit.append(t)
            else:
                cut.extend(pieces)
                if len(pieces) > 1:
                    rule = WORD_CUTTING
        tokens = cut

    return TokenizedAttribute(raw, tokens, rule, tokens[0], unsplit)


def tf_idf(token: str, tokens: Sequence[str], corpus: Sequence[Sequence[str]]) -> float:
    """``tf = count / len(tokens)``; ``idf = ln(N / df)`` with ``df >= 1``."""
    tf = tokens.count(token) / len(tokens)
    n = len(corpus)
    if n == 0:
        return 0.0
    df = sum(1 for doc in corpus if token in doc)
    return tf * math.log(n / max(df, 1))


def select_keyword(tokens: Sequence[str], corpus: Sequence[Sequence[str]]) -> str:
    """Highest tf-idf token; ties go to the earliest position."""
    if not tokens:
        raise NormalizationError("cannot pick a keyword from no tokens")
    docs = [set(d) for d in corpus]
    best, best_score = tokens[0], None
    for t in tokens:
        score = tf_idf(t, tokens, docs)
        if best_score is None or score > best_score:
            best, best_score = t, score
    return best


def normalize_corpus(
    raws: Iterable[str],
    dicts: Dictionaries | None = None,
) -> tuple[dict[str, TokenizedAttribute], dict[str, str]]:
    """Normalize every name and choose keywords against the whole corpus.

    Returns the tokenizations and a ``raw -> error message`` map for names
    that could not be normalized.
    """
    dicts = dicts or Dictionaries()
    out: dict[str, TokenizedAttribute] = {}
    errors: dict[str, str] = {}
    for raw in raws:
        if raw in out or raw in errors:
            continue
        try:
            out[raw] = normalize_attribute(raw, dicts.abbrevs, dicts.wordlist, dicts.overrides)
        except NormalizationError as exc:
            errors[raw] = str(exc)
    corpus = [t.tokens for t in out.values()]
    for t in out.values():
        t.keyword = select_keyword(t.tokens, corpus)
    return out, errors
