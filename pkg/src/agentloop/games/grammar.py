"""Tag-delimited message grammar for the negotiation games.

Responses are sequences of ``<tag> content </tag>`` spans over a fixed
vocabulary. Each game declares which tags a response must contain and in
what order; everything between a tag pair is opaque content (it may itself
contain angle brackets, e.g. ``<ZUP>``). Parsing is strict: tag names are
exact lowercase, the required set and order must match, and the trade
grammar admits integer amounts only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..errors import (
    DuplicateTag,
    MalformedTag,
    MissingTag,
    NonIntegerAmount,
    TradeSyntaxError,
    UnknownResource,
    UnknownTag,
)

TAG_VOCABULARY = (
    "my name",
    "move",
    "proposal count",
    "my resources",
    "my goals",
    "reason",
    "player answer",
    "message",
    "newly proposed trade",
)

# Required tags, in required order, per game kind.
RESPONSE_CONTRACTS: dict[str, tuple[str, ...]] = {
    "resource-exchange": (
        "my name",
        "my resources",
        "my goals",
        "reason",
        "player answer",
        "message",
        "newly proposed trade",
    ),
    "sell-buy": (
        "proposal count",
        "my resources",
        "my goals",
        "reason",
        "player answer",
        "newly proposed trade",
        "message",
    ),
    "ultimatum": (
        "my name",
        "move",
        "my resources",
        "reason",
        "player answer",
        "message",
        "newly proposed trade",
    ),
}

_TOKEN = re.compile("</?(?:%s)>" % "|".join(re.escape(name) for name in TAG_VOCABULARY))

PLAYERS = ("RED", "BLUE")

NONE_LITERAL = "NONE"


@dataclass(frozen=True)
class TagMessage:
    """Parsed response: (tag, content) pairs in the order they appeared."""

    fields: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "fields", tuple((name, content.strip()) for name, content in self.fields)
        )

    def __getitem__(self, name: str) -> str:
        for tag, content in self.fields:
            if tag == name:
                return content
        raise KeyError(name)

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        try:
            return self[name]
        except KeyError:
            return default

    @property
    def answer(self) -> str:
        return self["player answer"]

    @property
    def trade_text(self) -> str:
        return self["newly proposed trade"]


def parse_message(raw: str, game_kind: str) -> TagMessage:
    """Extract and validate the tag spans of one response."""
    contract = RESPONSE_CONTRACTS[str(game_kind)]
    tokens = list(_TOKEN.finditer(raw))
    found: list[tuple[str, str]] = []
    i = 0
    while i < len(tokens):
        token = tokens[i]
        text = token.group(0)
        if text.startswith("</"):
            raise MalformedTag(token.start(), f"closing {text} without a matching opening tag")
        name = text[1:-1]
        if i + 1 >= len(tokens):
            raise MalformedTag(token.start(), f"<{name}> is never closed")
        closing = tokens[i + 1]
        if closing.group(0) != f"</{name}>":
            raise MalformedTag(
                closing.start(), f"expected </{name}>, found {closing.group(0)}"
            )
        found.append((name, raw[token.end():closing.start()]))
        i += 2

    names = [name for name, _ in found]
    for name in names:
        if names.count(name) > 1:
            raise DuplicateTag(name)
        if name not in contract:
            raise UnknownTag(name)
    for name in contract:
        if name not in names:
            raise MissingTag(name)
    if names != list(contract):
        for position, (got, expected) in enumerate(zip(names, contract)):
            if got != expected:
                raise MalformedTag(
                    position, f"tag <{got}> out of order, expected <{expected}>"
                )
    return TagMessage(tuple(found))


def render_message(message: TagMessage) -> str:
    """Canonical text form; parse(render(m)) == m for well-formed messages."""
    return "\n".join(f"<{name}> {content} </{name}>" for name, content in message.fields)


@dataclass(frozen=True)
class TradeProposal:
    """What each player hands over if the proposal is accepted."""

    gives: tuple[tuple[str, tuple[tuple[str, int], ...]], ...]

    def amounts(self, player: str) -> dict[str, int]:
        for name, items in self.gives:
            if name == player:
                return dict(items)
        return {}

    @classmethod
    def build(cls, gives: dict[str, dict[str, int]]) -> "TradeProposal":
        return cls(
            tuple((player, tuple(items.items())) for player, items in gives.items())
        )


_SIDE = re.compile(r"^\s*Player\s+([A-Z]+)\s+Gives\s*(.*?)\s*$", re.DOTALL)
_ITEM = re.compile(r"^\s*([A-Za-z][A-Za-z0-9]*)\s*:\s*(\S+)\s*$")
_INTEGER = re.compile(r"^\d+$")
_DECIMAL = re.compile(r"^-?\d+\.\d+$")


def parse_trade(text: str, resources: Optional[tuple[str, ...]] = None) -> Optional[TradeProposal]:
    """Parse a trade span; the literal NONE means no proposal."""
    stripped = text.strip()
    if stripped == NONE_LITERAL:
        return None
    parts = stripped.split("|")
    if len(parts) != 2:
        raise TradeSyntaxError(f"expected two 'Player X Gives' sides separated by '|': {text!r}")
    gives: dict[str, dict[str, int]] = {}
    for part, expected_player in zip(parts, PLAYERS):
        side = _SIDE.match(part)
        if not side:
            raise TradeSyntaxError(f"cannot parse trade side {part!r}")
        player = side.group(1)
        if player != expected_player:
            raise TradeSyntaxError(f"expected Player {expected_player}, got Player {player}")
        items: dict[str, int] = {}
        body = side.group(2).strip()
        if not body:
            raise TradeSyntaxError(f"Player {player} gives nothing; use an explicit amount")
        for chunk in body.split(","):
            item = _ITEM.match(chunk)
            if not item:
                raise TradeSyntaxError(f"cannot parse trade item {chunk!r}")
            name, amount = item.group(1), item.group(2)
            if _DECIMAL.match(amount):
                raise NonIntegerAmount(amount)
            if not _INTEGER.match(amount):
                raise TradeSyntaxError(f"bad amount {amount!r} for {name}")
            if resources is not None and name not in resources:
                raise UnknownResource(name)
            if name in items:
                raise TradeSyntaxError(f"resource {name} listed twice for Player {player}")
            items[name] = int(amount)
        gives[player] = items
    return TradeProposal.build(gives)


def render_trade(proposal: Optional[TradeProposal]) -> str:
    if proposal is None:
        return NONE_LITERAL
    sides = []
    for player, items in proposal.gives:
        listed = ", ".join(f"{name}: {amount}" for name, amount in items)
        sides.append(f"Player {player} Gives {listed}")
    return " | ".join(sides)
