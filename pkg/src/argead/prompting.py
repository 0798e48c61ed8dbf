"""Generation prompts: a template variant plus the clip's enabled context cues.

Templates are plain text files with the placeholders ``{players}``,
``{actions}``, ``{commentary}`` and ``{previous_ad}``. A template line whose
cue is switched off is dropped entirely, so a prompt never carries an empty
section header.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

from argead.store import Action, ClipContext

VARIANTS = ("P1", "P2", "P3")
CUES = ("players", "actions", "commentary", "previous_ad")
EMPTY_VALUE = "(none)"


class PromptError(ValueError):
    pass


class ContextFlags(NamedTuple):
    players_actions: bool
    commentary: bool
    previous_ad: bool


# Context ablation rows: no context, players+actions, + commentary, + previous AD.
PROFILES = {
    "none": ContextFlags(False, False, False),
    "pa": ContextFlags(True, False, False),
    "pa+c": ContextFlags(True, True, False),
    "pa+c+prev": ContextFlags(True, True, True),
}
PROFILE_ROWS = {1: "none", 2: "pa", 3: "pa+c", 4: "pa+c+prev"}


def context_flags_from_profile(profile: str | int) -> ContextFlags:
    """Flags for a context profile name (``none``, ``pa``, ...) or ablation row 1-4."""
    if isinstance(profile, int) or (isinstance(profile, str) and profile.isdigit()):
        try:
            profile = PROFILE_ROWS[int(profile)]
        except KeyError:
            raise PromptError(f"context row must be 1-4, got {profile}") from None
    try:
        return PROFILES[profile]
    except KeyError:
        raise PromptError(f"unknown context profile {profile!r}; expected one of {list(PROFILES)}") from None


def normalize_variant(variant: str | int) -> str:
    v = str(variant).upper()
    v = v if v.startswith("P") else f"P{v}"
    if v not in VARIANTS:
        raise PromptError(f"prompt variant must be one of 1, 2, 3; got {variant!r}")
    return v


@dataclass(frozen=True)
class PromptTemplate:
    variant: str
    body: str

    def __post_init__(self) -> None:
        unknown = self.placeholders() - set(CUES)
        if unknown:
            raise PromptError(f"template {self.variant} uses unknown placeholders {sorted(unknown)}")

    def placeholders(self, text: str | None = None) -> set[str]:
        return {name for _, name, _, _ in string.Formatter().parse(self.body if text is None else text) if name}

    @classmethod
    def load(cls, variant: str | int, directory: str | Path | None = None) -> "PromptTemplate":
        """Read ``p1.txt``/``p2.txt``/``p3.txt`` from ``directory`` or the bundled defaults."""
        v = normalize_variant(variant)
        name = f"p{v[1]}.txt"
        if directory is None:
            text = resources.files("argead").joinpath("prompts", name).read_text(encoding="utf-8")
        else:
            text = (Path(directory) / name).read_text(encoding="utf-8")
        return cls(v, text.rstrip("\n"))


@dataclass(frozen=True)
class ContextBundle:
    include_players_actions: bool = False
    include_commentary: bool = False
    include_previous_ad: bool = False
    players: tuple[str, ...] = ()
    actions: tuple[Action, ...] = ()
    commentary: str | None = None
    previous_ad: str | None = None

    @classmethod
    def from_context(cls, context: ClipContext, flags: ContextFlags) -> "ContextBundle":
        return cls(
            include_players_actions=flags.players_actions,
            include_commentary=flags.commentary,
            include_previous_ad=flags.previous_ad,
            players=context.players,
            actions=context.actions,
            commentary=context.commentary,
            previous_ad=context.previous_ad,
        )

    def enabled(self, cue: str) -> bool:
        if cue in ("players", "actions"):
            return self.include_players_actions
        return self.include_commentary if cue == "commentary" else self.include_previous_ad


def format_actions(actions: tuple[Action, ...]) -> str:
    return ", ".join(f"{a.label}@{float(a.t_s)!r}" for a in actions)


def _render(cue: str, bundle: ContextBundle) -> str:
    if cue == "players":
        return ", ".join(bundle.players) or EMPTY_VALUE
    if cue == "actions":
        return format_actions(bundle.actions) or EMPTY_VALUE
    value = getattr(bundle, cue)
    if value is None:
        raise PromptError(f"template needs {cue!r} but the context bundle has none")
    return value or EMPTY_VALUE


def build_prompt(template: PromptTemplate, bundle: ContextBundle) -> str:
    """Expand ``template`` with the enabled cues of ``bundle``."""
    lines = []
    for line in template.body.split("\n"):
        cues = template.placeholders(line)
        if not cues:
            lines.append(line.replace("{{", "{").replace("}}", "}"))
            continue
        if not all(bundle.enabled(c) for c in cues):
            continue
        lines.append(line.format_map({c: _render(c, bundle) for c in cues}))
    return "\n".join(lines)
