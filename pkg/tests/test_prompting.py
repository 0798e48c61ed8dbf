import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from argead.prompting import (
    EMPTY_VALUE,
    PROFILES,
    ContextBundle,
    ContextFlags,
    PromptError,
    PromptTemplate,
    build_prompt,
    context_flags_from_profile,
    normalize_variant,
)
from argead.store import Action, ClipContext

INSTRUCTION = "Give an audio description of the given video."
CTX = ClipContext(
    "c1", commentary="What a hit!", players=("Ronaldo",), actions=(Action("Free-kick", 12.0),), previous_ad="Ronaldo lines it up."
)


def bundle(profile, ctx=CTX):
    return ContextBundle.from_context(ctx, context_flags_from_profile(profile))


def test_p1_without_context_is_the_instruction():
    assert build_prompt(PromptTemplate.load(1), ContextBundle()) == INSTRUCTION


def test_p3_players_actions_only():
    p = build_prompt(PromptTemplate.load(3), bundle("pa"))
    assert "guidelines" in p and "Ronaldo" in p and "Free-kick@12.0" in p
    assert "Commentary" not in p and "Previous" not in p


def test_missing_previous_ad_is_error():
    ctx = ClipContext("c1", players=("Ronaldo",))
    with pytest.raises(PromptError, match="previous_ad"):
        build_prompt(PromptTemplate.load(1), bundle("pa+c+prev", ctx))


def test_empty_cues_render_placeholder():
    p = build_prompt(PromptTemplate.load(1), bundle("pa+c", ClipContext("c1")))
    assert f"Players in the clip: {EMPTY_VALUE}" in p and f"Commentary: {EMPTY_VALUE}" in p


@pytest.mark.parametrize(
    "profile,flags",
    [(1, (False, False, False)), (2, (True, False, False)), (3, (True, True, False)), (4, (True, True, True)),
     ("pa+c", (True, True, False)), ("2", (True, False, False))],
)
def test_profiles(profile, flags):
    assert context_flags_from_profile(profile) == ContextFlags(*flags)


def test_bad_profile_and_variant():
    with pytest.raises(PromptError):
        context_flags_from_profile(5)
    with pytest.raises(PromptError):
        context_flags_from_profile("everything")
    with pytest.raises(PromptError):
        normalize_variant(4)
    assert normalize_variant("p2") == "P2" and normalize_variant(3) == "P3"


def test_all_twelve_combinations_distinct():
    prompts = {
        build_prompt(PromptTemplate.load(v), bundle(p)) for v, p in itertools.product((1, 2, 3), PROFILES)
    }
    assert len(prompts) == 12


def test_profile_order_grows_prompt():
    for v in (1, 2, 3):
        lengths = [len(build_prompt(PromptTemplate.load(v), bundle(p))) for p in ("none", "pa", "pa+c", "pa+c+prev")]
        assert lengths == sorted(lengths) and len(set(lengths)) == 4


def test_unknown_placeholder_rejected():
    with pytest.raises(PromptError):
        PromptTemplate("P1", "Describe {weather}")


def test_custom_directory(tmp_path):
    (tmp_path / "p2.txt").write_text("Say something.\nWho: {players}\n")
    t = PromptTemplate.load(2, tmp_path)
    assert build_prompt(t, bundle("pa")) == "Say something.\nWho: Ronaldo"


def test_literal_braces_survive():
    t = PromptTemplate("P1", "Answer as {{json}}.\nWho: {players}")
    assert build_prompt(t, bundle("none")) == "Answer as {json}."


texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=20)


@given(texts, texts)
def test_distinct_commentary_gives_distinct_prompt(c1, c2):
    t = PromptTemplate.load(3)
    p1 = build_prompt(t, bundle("pa+c", ClipContext("c", commentary=c1)))
    p2 = build_prompt(t, bundle("pa+c", ClipContext("c", commentary=c2)))
    same_render = (c1 or EMPTY_VALUE) == (c2 or EMPTY_VALUE)
    assert (p1 == p2) == same_render
