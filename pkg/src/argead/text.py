"""Deterministic text primitives used by the scorers.

Tokenization, a gazetteer-driven rule tagger, suffix-stripping verb
lemmatization, roster name matching, and LCS-based string similarity.
Nothing here keeps global mutable state; every function is pure.
"""

from __future__ import annotations

import enum
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Collection, Hashable, Iterable, Sequence

from argead.store import ActionLexicon, nfc

_MARKS = "\u0300-\u036f\u1ab0-\u1aff\u1dc0-\u1dff\u20d0-\u20ff\ufe20-\ufe2f"
_WORD = rf"(?:\w[{_MARKS}]*)+"
# "'s" clitics split off so possessives keep the bare name as a token
_TOKEN_RE = re.compile(rf"{_WORD}(?:-{_WORD}|['’](?!s\b){_WORD})*|['’]s\b|[^\w\s]")
_WORD_START = re.compile(r"\w")
_NAME_PARTICLES = frozenset({"de", "da", "do", "dos", "das", "di", "del", "della", "van", "von", "der", "den", "la", "le", "el", "al", "bin", "ter"})

DEFAULT_PRONOUNS = frozenset({"he", "she", "him", "her", "his", "hers", "they", "them", "their", "it", "its"})

DEFAULT_SUFFIX_RULES = (
    ("ies", "y"),
    ("ied", "y"),
    ("ing", ""),
    ("ing", "e"),
    ("ed", ""),
    ("ed", "e"),
    ("es", ""),
    ("s", ""),
)

DEFAULT_IRREGULAR = {
    "sent": "send",
    "brought": "bring",
    "ran": "run",
    "caught": "catch",
    "threw": "throw",
    "thrown": "throw",
    "struck": "strike",
    "fed": "feed",
    "slid": "slide",
    "beaten": "beat",
}

DEFAULT_STOPWORD_NOUNS = frozenset(
    """
    ball pitch goal goals net box area corner kick free-kick player players team teams side crowd fans fan
    referee ref keeper goalkeeper defender defenders striker midfielder winger captain line flag shot pass
    cross header game match half minute minutes time play card foul post bar crossbar field wing penalty
    replay camera view bench coach manager stadium opponent opponents attack defence defense chance
    """.split()
)

DEFAULT_FUNCTION_WORDS = frozenset(
    """
    a an the and or but nor so yet if because although though while whereas to of in on at by for from with
    without into onto upon over under above below off out up down as about against between among along
    across through toward towards around behind beyond near past via within is are was were be been being
    am has have had having do does did doing will would shall should can could may might must this that
    these those there here then than very not no yes what which who whom whose where when why how all some
    any each every both either neither after before again back away forward forwards just now still also
    too only even once twice one two three four five six seven eight nine ten first second third last next
    another other such same more most less least much many few own i me my we us our you your himself
    herself itself themselves myself ourselves yourself
    """.split()
)


def fold(text: str) -> str:
    """Lowercase and strip combining marks after NFKD decomposition."""
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch)).lower()


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    span: tuple[int, int]

    @property
    def is_word(self) -> bool:
        return bool(_WORD_START.match(self.surface))


class Tag(str, enum.Enum):
    PROPER_NOUN = "ProperNoun"
    NOUN = "Noun"
    VERB = "Verb"
    PRONOUN = "Pronoun"
    OTHER = "Other"


@dataclass(frozen=True)
class TaggedToken:
    token: Token
    tag: Tag
    lemma: str | None = None

    @property
    def norm(self) -> str:
        return self.token.norm


@dataclass(frozen=True)
class Lexicons:
    """Closed word classes and lemmatization rules for the tagger."""

    pronouns: frozenset[str] = DEFAULT_PRONOUNS
    verb_suffix_rules: tuple[tuple[str, str], ...] = DEFAULT_SUFFIX_RULES
    stopword_nouns: frozenset[str] = DEFAULT_STOPWORD_NOUNS
    function_words: frozenset[str] = DEFAULT_FUNCTION_WORDS
    irregular_verbs: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_IRREGULAR), hash=False)

    def __post_init__(self) -> None:
        for name in ("pronouns", "stopword_nouns", "function_words"):
            words = getattr(self, name)
            bad = [w for w in words if not w or w != w.lower()]
            if bad:
                raise ValueError(f"{name} entries must be lowercase and non-empty: {bad}")
        for suffix, repl in self.verb_suffix_rules:
            if len(repl) >= len(suffix):
                raise ValueError(f"suffix rule {suffix!r}->{repl!r} does not shorten the word")

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicons":
        """Read ``lexicons.json``; keys present replace the defaults."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        kwargs = {}
        for key in ("pronouns", "stopword_nouns", "function_words"):
            if key in data:
                kwargs[key] = frozenset(data[key])
        if "verb_suffix_rules" in data:
            kwargs["verb_suffix_rules"] = tuple((s, r) for s, r in data["verb_suffix_rules"])
        if "irregular_verbs" in data:
            kwargs["irregular_verbs"] = dict(data["irregular_verbs"])
        return cls(**kwargs)


DEFAULT_LEXICONS = Lexicons()


def tokenize(text: str) -> list[Token]:
    """Split into word and punctuation tokens; whitespace is dropped.

    Hyphen and apostrophe joined words (``free-kick``, ``N'Golo``) stay a
    single token. ``span`` indexes into ``text`` as given.
    """
    return [Token(m.group(), fold(m.group()), m.span()) for m in _TOKEN_RE.finditer(text)]


def word_norms(text: str) -> list[str]:
    return [t.norm for t in tokenize(text) if t.is_word]


def lemmatize(word: str, lemmas: Collection[str], lexicons: Lexicons = DEFAULT_LEXICONS) -> str | None:
    """Map an inflected form onto a known lemma, or ``None``.

    Suffix rules are tried longest suffix first; a stripped stem ending in a
    doubled consonant is also tried undoubled (``running`` -> ``run``).
    """
    if word in lemmas:
        return word
    irregular = lexicons.irregular_verbs.get(word)
    if irregular in lemmas:
        return irregular
    for suffix, repl in sorted(lexicons.verb_suffix_rules, key=lambda r: -len(r[0])):
        if not word.endswith(suffix) or len(word) <= len(suffix):
            continue
        stem = word[: -len(suffix)] + repl
        if stem in lemmas:
            return stem
        if not repl and len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in "aeiou":
            if stem[:-1] in lemmas:
                return stem[:-1]
    return None


def _name_norms(name: str) -> tuple[str, ...]:
    return tuple(word_norms(nfc(name)))


def _name_windows(norms: Sequence[str], roster: Iterable[str]) -> list[tuple[int, int, str]]:
    """All (start, end, name) windows where a full roster name occurs."""
    hits = []
    for name in roster:
        target = _name_norms(name)
        k = len(target)
        if not k:
            continue
        for i in range(len(norms) - k + 1):
            if tuple(norms[i : i + k]) == target:
                hits.append((i, i + k, name))
    return hits


def pos_tag(
    tokens: Sequence[Token],
    roster: Collection[str] = (),
    lexicon: ActionLexicon | None = None,
    lexicons: Lexicons = DEFAULT_LEXICONS,
) -> list[TaggedToken]:
    """Assign one tag per token.

    Precedence: punctuation -> Other; pronoun list -> Pronoun; roster name
    token or full-name window -> ProperNoun; action-lexicon lemma -> Verb;
    function words, numbers and ``-ly``/``-ing``/``-ed`` forms -> Other;
    anything else -> Noun.
    """
    lemmas = lexicon.all_lemmas if lexicon is not None else frozenset()
    norms = [t.norm for t in tokens]
    name_tokens = {n for name in roster for n in _name_norms(name) if n not in _NAME_PARTICLES}
    in_window = set()
    for start, end, _ in _name_windows(norms, roster):
        in_window.update(range(start, end))

    out = []
    for i, tok in enumerate(tokens):
        norm = tok.norm
        lemma = None
        if not tok.is_word:
            tag = Tag.OTHER
        elif norm in lexicons.pronouns:
            tag = Tag.PRONOUN
        elif i in in_window or norm in name_tokens:
            tag = Tag.PROPER_NOUN
        elif (lemma := lemmatize(norm, lemmas, lexicons)) is not None:
            tag = Tag.VERB
        elif norm in lexicons.function_words or norm.isnumeric():
            tag = Tag.OTHER
        elif len(norm) > 4 and norm.endswith(("ly", "ing", "ed")):
            tag = Tag.OTHER
        else:
            tag = Tag.NOUN
        out.append(TaggedToken(tok, tag, lemma))
    return out


@dataclass(frozen=True)
class NameMatch:
    names: frozenset[str]
    ambiguous: frozenset[str] = frozenset()
    # token indexes covered by a matched mention
    covered: frozenset[int] = frozenset()

    def __bool__(self) -> bool:
        return bool(self.names)


_NOMINAL = (Tag.PROPER_NOUN, Tag.NOUN)


def match_player_names(
    tagged: Sequence[TaggedToken], roster: Collection[str], strict_full_name: bool = False
) -> NameMatch:
    """Roster names mentioned among the nominal tokens.

    A name matches on its full token sequence, or (unless
    ``strict_full_name``) on its surname, taken as the last name token. Names
    matched only through a surname that several roster players share are
    reported in ``ambiguous``.
    """
    norms = [t.norm if t.tag in _NOMINAL else None for t in tagged]
    full: dict[str, set[int]] = {}
    for start, end, name in _name_windows(norms, roster):
        full.setdefault(name, set()).update(range(start, end))

    surname_of = {name: _name_norms(name)[-1] for name in roster if _name_norms(name)}
    shared: dict[str, int] = {}
    for s in surname_of.values():
        shared[s] = shared.get(s, 0) + 1

    by_surname: dict[str, set[int]] = {}
    if not strict_full_name:
        positions: dict[str, set[int]] = {}
        for i, n in enumerate(norms):
            if n is not None:
                positions.setdefault(n, set()).add(i)
        for name, s in surname_of.items():
            if s in positions:
                by_surname[name] = positions[s]

    names = set(full) | set(by_surname)
    ambiguous = {n for n in names if n not in full and shared[surname_of[n]] > 1}
    covered = set().union(*full.values(), *by_surname.values()) if names else set()
    return NameMatch(frozenset(names), frozenset(ambiguous), frozenset(covered))


def match_actions(
    tagged: Sequence[TaggedToken], lexicon: ActionLexicon, detected: Collection[str] = ()
) -> frozenset[str]:
    """Labels whose verb lemmas occur among the Verb tokens.

    When ``detected`` is non-empty the result is restricted to those labels.
    """
    verbs = {t.lemma for t in tagged if t.tag is Tag.VERB and t.lemma}
    labels = {e.label for e in lexicon.entries if verbs.intersection(e.verb_lemmas)}
    if detected:
        labels &= set(detected)
    return frozenset(labels)


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Length of the longest common subsequence.

    Bit-parallel row update (one big-int operation per element of the
    shorter input), so long strings stay cheap in pure Python.
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    masks: dict[Hashable, int] = {}
    for i, item in enumerate(a):
        masks[item] = masks.get(item, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for item in b:
        u = v & masks.get(item, 0)
        v = ((v + u) | (v - u)) & full
    return len(a) - bin(v).count("1")


def levenshtein_ratio(a: str, b: str) -> float:
    """Normalized indel similarity ``2 * LCS / (len(a) + len(b))`` on folded text.

    Equivalent to ``1 - d / (len(a) + len(b))`` where ``d`` is the edit
    distance with insert/delete cost 1 and substitution cost 2.
    """
    a, b = fold(a), fold(b)
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2 * lcs_length(a, b) / total


def content_words(text: str, lexicons: Lexicons = DEFAULT_LEXICONS) -> frozenset[str]:
    """Folded word tokens minus function words and pronouns."""
    stop = lexicons.function_words | lexicons.pronouns
    return frozenset(n for n in word_norms(text) if n not in stop)

