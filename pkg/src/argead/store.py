"""Game metadata and per-clip context store.

The store is built once from the JSON/JSONL source files (or a snapshot) and
is read-only afterwards. Every query is a pure read, so a single instance can
be shared freely between threads.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TEAMS = ("home", "away")


class IngestError(ValueError):
    """A source record could not be ingested."""

    def __init__(self, source: str, message: str, *, line: int | None = None, field: str | None = None):
        self.source = source
        self.line = line
        self.field = field
        where = source if line is None else f"{source}:{line}"
        if field is not None:
            where = f"{where} [{field}]"
        super().__init__(f"{where}: {message}")


class UnknownKeyError(LookupError):
    pass


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class Game:
    game_id: str
    season: str
    league: str
    home_team: str
    away_team: str

    def to_record(self) -> dict[str, Any]:
        return {
            "game_id": self.game_id,
            "season": self.season,
            "league": self.league,
            "home": self.home_team,
            "away": self.away_team,
        }


@dataclass(frozen=True)
class Player:
    game_id: str
    team: str
    jersey_number: int
    player_name: str

    def to_record(self) -> dict[str, Any]:
        return {
            "game_id": self.game_id,
            "team": self.team,
            "jersey": self.jersey_number,
            "player_name": self.player_name,
        }


@dataclass(frozen=True)
class LexiconEntry:
    label: str
    verb_lemmas: tuple[str, ...]


@dataclass(frozen=True)
class ActionLexicon:
    """Action labels and the verb lemmas that express them."""

    entries: tuple[LexiconEntry, ...]

    def __post_init__(self) -> None:
        seen = set()
        for entry in self.entries:
            if entry.label in seen:
                raise ValueError(f"duplicate action label {entry.label!r}")
            seen.add(entry.label)
            for lemma in entry.verb_lemmas:
                if not lemma or lemma != lemma.lower():
                    raise ValueError(f"lemma {lemma!r} of {entry.label!r} must be lowercase and non-empty")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.entries)

    @property
    def all_lemmas(self) -> frozenset[str]:
        return frozenset(lemma for e in self.entries for lemma in e.verb_lemmas)

    def lemmas_for(self, label: str) -> tuple[str, ...]:
        for entry in self.entries:
            if entry.label == label:
                return entry.verb_lemmas
        raise UnknownKeyError(f"unknown action label {label!r}")

    def __contains__(self, label: object) -> bool:
        return any(e.label == label for e in self.entries)

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]], source: str = "<lexicon>") -> "ActionLexicon":
        entries = []
        for i, rec in enumerate(records, 1):
            label = _field(rec, "label", str, source, i)
            lemmas = _field(rec, "verb_lemmas", list, source, i)
            if not all(isinstance(x, str) for x in lemmas):
                raise IngestError(source, "verb_lemmas must be strings", line=i, field="verb_lemmas")
            entries.append(LexiconEntry(nfc(label), tuple(lemmas)))
        try:
            return cls(tuple(entries))
        except ValueError as exc:
            raise IngestError(source, str(exc)) from None

    @classmethod
    def default(cls) -> "ActionLexicon":
        text = resources.files("argead").joinpath("data/action_lexicon.json").read_text(encoding="utf-8")
        return cls.from_records(json.loads(text), source="default lexicon")

    def to_records(self) -> list[dict[str, Any]]:
        return [{"label": e.label, "verb_lemmas": list(e.verb_lemmas)} for e in self.entries]


@dataclass(frozen=True)
class Clip:
    clip_id: str
    game_id: str
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.start_s < 0:
            raise ValueError(f"clip {self.clip_id}: start_s must be >= 0")
        if self.end_s <= self.start_s:
            raise ValueError(f"clip {self.clip_id}: end_s must exceed start_s")

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s

    def to_record(self) -> dict[str, Any]:
        return {"clip_id": self.clip_id, "game_id": self.game_id, "start_s": self.start_s, "end_s": self.end_s}


@dataclass(frozen=True)
class Action:
    label: str
    t_s: float


@dataclass(frozen=True)
class ClipContext:
    clip_id: str
    commentary: str = ""
    players: tuple[str, ...] = ()
    actions: tuple[Action, ...] = ()
    previous_ad: str | None = None

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "clip_id": self.clip_id,
            "commentary": self.commentary,
            "players": list(self.players),
            "actions": [{"label": a.label, "t_s": a.t_s} for a in self.actions],
        }
        if self.previous_ad is not None:
            rec["previous_ad"] = self.previous_ad
        return rec


# ---------------------------------------------------------------- parsing


def _field(rec: Mapping[str, Any], name: str, kind, source: str, line: int, *, optional: bool = False):
    if not isinstance(rec, Mapping):
        raise IngestError(source, "record must be a JSON object", line=line)
    if name not in rec:
        if optional:
            return None
        raise IngestError(source, "missing field", line=line, field=name)
    value = rec[name]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise IngestError(source, f"expected {kind.__name__}, got {type(value).__name__}", line=line, field=name)
    return value


def read_json_array(path: str | Path) -> list[Any]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(str(path), f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, list):
        raise IngestError(str(path), "top-level value must be an array")
    return data


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield ``(line_number, record)`` for every non-blank line."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise IngestError(str(path), f"invalid JSON: {exc.msg}", line=lineno) from None


def write_jsonl(path: str | Path, records: Iterable[Mapping[str, Any]]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def parse_game(rec, source: str, line: int) -> Game:
    return Game(
        game_id=_field(rec, "game_id", str, source, line),
        season=_field(rec, "season", str, source, line),
        league=_field(rec, "league", str, source, line),
        home_team=nfc(_field(rec, "home", str, source, line)),
        away_team=nfc(_field(rec, "away", str, source, line)),
    )


def parse_player(rec, source: str, line: int) -> Player:
    team = _field(rec, "team", str, source, line)
    if team not in TEAMS:
        raise IngestError(source, f"team must be one of {TEAMS}, got {team!r}", line=line, field="team")
    jersey = _field(rec, "jersey", int, source, line)
    if jersey < 0:
        raise IngestError(source, "jersey must be non-negative", line=line, field="jersey")
    name = nfc(_field(rec, "player_name", str, source, line)).strip()
    if not name:
        raise IngestError(source, "player_name must be non-empty", line=line, field="player_name")
    return Player(_field(rec, "game_id", str, source, line), team, jersey, name)


def parse_clip(rec, source: str, line: int) -> Clip:
    try:
        return Clip(
            clip_id=_field(rec, "clip_id", str, source, line),
            game_id=_field(rec, "game_id", str, source, line),
            start_s=_field(rec, "start_s", float, source, line),
            end_s=_field(rec, "end_s", float, source, line),
        )
    except ValueError as exc:
        if isinstance(exc, IngestError):
            raise
        raise IngestError(source, str(exc), line=line, field="end_s") from None


def parse_context(rec, source: str, line: int) -> ClipContext:
    players = _field(rec, "players", list, source, line)
    if not all(isinstance(p, str) for p in players):
        raise IngestError(source, "players must be strings", line=line, field="players")
    actions = []
    for a in _field(rec, "actions", list, source, line):
        actions.append(
            Action(nfc(_field(a, "label", str, source, line)), _field(a, "t_s", float, source, line))
        )
    previous = _field(rec, "previous_ad", str, source, line, optional=True)
    return ClipContext(
        clip_id=_field(rec, "clip_id", str, source, line),
        commentary=_field(rec, "commentary", str, source, line),
        players=tuple(nfc(p) for p in players),
        actions=tuple(actions),
        previous_ad=previous,
    )


# ---------------------------------------------------------------- store


def _freeze(d: dict) -> Mapping:
    return MappingProxyType(d)


@dataclass(frozen=True, eq=False)
class Store:
    games: tuple[Game, ...]
    players: tuple[Player, ...]
    clips: tuple[Clip, ...]
    contexts: tuple[ClipContext, ...]
    lexicon: ActionLexicon
    _games_by_id: Mapping[str, Game] = field(repr=False, default=None)
    _roster: Mapping[str, tuple[Player, ...]] = field(repr=False, default=None)
    _jersey: Mapping[tuple[str, str, int], Player] = field(repr=False, default=None)
    _clips_by_id: Mapping[str, Clip] = field(repr=False, default=None)
    _context_by_id: Mapping[str, ClipContext] = field(repr=False, default=None)

    @classmethod
    def build(
        cls,
        games: Iterable[Game],
        players: Iterable[Player],
        clips: Iterable[Clip] = (),
        contexts: Iterable[ClipContext] = (),
        lexicon: ActionLexicon | None = None,
        *,
        sources: Mapping[str, str] | None = None,
    ) -> "Store":
        """Validate keys and references, build indexes, and return the frozen store."""
        src = {"games": "games", "rosters": "rosters", "clips": "clips", "context": "context"}
        src.update(sources or {})
        lexicon = lexicon if lexicon is not None else ActionLexicon.default()

        games = tuple(games)
        by_id: dict[str, Game] = {}
        by_fixture: dict[tuple, str] = {}
        for i, g in enumerate(games, 1):
            if g.game_id in by_id:
                raise IngestError(src["games"], f"duplicate game_id {g.game_id!r}", line=i, field="game_id")
            fixture = (g.season, g.league, g.home_team, g.away_team)
            if fixture in by_fixture:
                raise IngestError(
                    src["games"], f"duplicate fixture {fixture} (also {by_fixture[fixture]!r})", line=i
                )
            by_id[g.game_id] = g
            by_fixture[fixture] = g.game_id

        players = tuple(players)
        jersey: dict[tuple[str, str, int], Player] = {}
        roster: dict[str, list[Player]] = {gid: [] for gid in by_id}
        for i, p in enumerate(players, 1):
            if p.game_id not in by_id:
                raise IngestError(src["rosters"], f"unknown game_id {p.game_id!r}", line=i, field="game_id")
            key = (p.game_id, p.team, p.jersey_number)
            if key in jersey:
                raise IngestError(
                    src["rosters"],
                    f"duplicate jersey number {p.jersey_number} for {p.team} team of game {p.game_id!r}",
                    line=i,
                    field="jersey",
                )
            jersey[key] = p
            roster[p.game_id].append(p)

        clips = tuple(clips)
        clips_by_id: dict[str, Clip] = {}
        for i, c in enumerate(clips, 1):
            if c.clip_id in clips_by_id:
                raise IngestError(src["clips"], f"duplicate clip_id {c.clip_id!r}", line=i, field="clip_id")
            if c.game_id not in by_id:
                raise IngestError(src["clips"], f"clip references unknown game {c.game_id!r}", line=i, field="game_id")
            clips_by_id[c.clip_id] = c

        contexts = tuple(contexts)
        ctx_by_id: dict[str, ClipContext] = {}
        for i, ctx in enumerate(contexts, 1):
            if ctx.clip_id in ctx_by_id:
                raise IngestError(src["context"], f"duplicate context for clip {ctx.clip_id!r}", line=i, field="clip_id")
            clip = clips_by_id.get(ctx.clip_id)
            if clip is None:
                raise IngestError(src["context"], f"context references unknown clip {ctx.clip_id!r}", line=i, field="clip_id")
            for a in ctx.actions:
                if a.label not in lexicon:
                    raise IngestError(src["context"], f"action label {a.label!r} not in lexicon", line=i, field="actions")
                if not clip.start_s <= a.t_s <= clip.end_s:
                    raise IngestError(
                        src["context"],
                        f"action {a.label!r} at {a.t_s}s outside clip [{clip.start_s}, {clip.end_s}]",
                        line=i,
                        field="actions",
                    )
            ctx_by_id[ctx.clip_id] = ctx

        return cls(
            games,
            players,
            clips,
            contexts,
            lexicon,
            _freeze(by_id),
            _freeze({k: tuple(v) for k, v in roster.items()}),
            _freeze(jersey),
            _freeze(clips_by_id),
            _freeze(ctx_by_id),
        )

    # -- queries

    def counts(self) -> dict[str, int]:
        return {
            "games": len(self.games),
            "players": len(self.players),
            "clips": len(self.clips),
            "contexts": len(self.contexts),
            "actions": len(self.lexicon.entries),
        }

    def game(self, game_id: str) -> Game:
        try:
            return self._games_by_id[game_id]
        except KeyError:
            raise UnknownKeyError(f"unknown game {game_id!r}") from None

    def lookup_game(
        self,
        season: str | None = None,
        league: str | None = None,
        home: str | None = None,
        away: str | None = None,
    ) -> list[Game]:
        """Games matching every given field exactly; omitted fields match anything."""
        wanted = [
            (attr, value if attr in ("season", "league") else nfc(value))
            for attr, value in (("season", season), ("league", league), ("home_team", home), ("away_team", away))
            if value is not None
        ]
        return [g for g in self.games if all(getattr(g, attr) == value for attr, value in wanted)]

    def roster(self, game_id: str) -> tuple[Player, ...]:
        self.game(game_id)
        return self._roster[game_id]

    def roster_names(self, game_id: str) -> frozenset[str]:
        return frozenset(p.player_name for p in self.roster(game_id))

    def player_by_jersey(self, game_id: str, team: str, jersey_number: int) -> Player | None:
        self.game(game_id)
        return self._jersey.get((game_id, team, jersey_number))

    def clip(self, clip_id: str) -> Clip:
        try:
            return self._clips_by_id[clip_id]
        except KeyError:
            raise UnknownKeyError(f"unknown clip {clip_id!r}") from None

    def has_clip(self, clip_id: str) -> bool:
        return clip_id in self._clips_by_id

    def context(self, clip_id: str) -> ClipContext:
        """Context for a clip; clips without annotations get an empty context."""
        self.clip(clip_id)
        return self._context_by_id.get(clip_id) or ClipContext(clip_id)

    # -- serialization

    def to_snapshot(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "games": [g.to_record() for g in self.games],
            "rosters": [p.to_record() for p in self.players],
            "clips": [c.to_record() for c in self.clips],
            "context": [c.to_record() for c in self.contexts],
            "action_lexicon": self.lexicon.to_records(),
        }

    def save_snapshot(self, path: str | Path) -> None:
        text = json.dumps(self.to_snapshot(), ensure_ascii=False, sort_keys=True, indent=1)
        Path(path).write_text(text + "\n", encoding="utf-8")

    def export(self, directory: str | Path) -> dict[str, Path]:
        """Write the five canonical source files into ``directory``."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        snap = self.to_snapshot()
        paths = {
            "games_file": out / "games.json",
            "rosters_file": out / "rosters.json",
            "clips_file": out / "clips.jsonl",
            "context_file": out / "context.jsonl",
            "lexicon_file": out / "action_lexicon.json",
        }
        for key, name in (("games_file", "games"), ("rosters_file", "rosters"), ("lexicon_file", "action_lexicon")):
            paths[key].write_text(json.dumps(snap[name], ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
        write_jsonl(paths["clips_file"], snap["clips"])
        write_jsonl(paths["context_file"], snap["context"])
        return paths


def _from_records(sections: Mapping[str, Iterable[tuple[int, Any]]], names: Mapping[str, str], lexicon) -> Store:
    games = [parse_game(r, names["games"], i) for i, r in sections["games"]]
    players = [parse_player(r, names["rosters"], i) for i, r in sections["rosters"]]
    clips = [parse_clip(r, names["clips"], i) for i, r in sections["clips"]]
    contexts = [parse_context(r, names["context"], i) for i, r in sections["context"]]
    return Store.build(games, players, clips, contexts, lexicon, sources=names)


def ingest(
    games_file: str | Path,
    rosters_file: str | Path,
    clips_file: str | Path,
    context_file: str | Path,
    lexicon_file: str | Path | None = None,
) -> Store:
    """Load the source files into a validated :class:`Store`.

    Any malformed record, duplicate key or dangling reference aborts with an
    :class:`IngestError` naming the file, record and field.
    """
    if lexicon_file is not None:
        lexicon = ActionLexicon.from_records(read_json_array(lexicon_file), source=str(lexicon_file))
    else:
        lexicon = ActionLexicon.default()
    names = {"games": str(games_file), "rosters": str(rosters_file), "clips": str(clips_file), "context": str(context_file)}
    store = _from_records(
        {
            "games": enumerate(read_json_array(games_file), 1),
            "rosters": enumerate(read_json_array(rosters_file), 1),
            "clips": iter_jsonl(clips_file),
            "context": iter_jsonl(context_file),
        },
        names,
        lexicon,
    )
    log.info("ingested %s", ", ".join(f"{v} {k}" for k, v in store.counts().items()))
    return store


def load_snapshot(path: str | Path) -> Store:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise IngestError(str(path), f"unsupported schema_version {version!r}")
    lexicon = ActionLexicon.from_records(data["action_lexicon"], source=f"{path}#action_lexicon")
    names = {k: f"{path}#{k}" for k in ("games", "rosters", "clips", "context")}
    return _from_records({k: enumerate(data[k], 1) for k in names}, names, lexicon)
