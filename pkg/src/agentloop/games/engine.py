"""Rules, state machines, and utilities for the three negotiation games.

All three games are two-player, turn-alternating, and end on acceptance,
rejection, or a round cap. One round is one player's move. Utilities follow
the game cards: resource exchange scores total holdings, ultimatum and
sell-buy score the deal relative to a reference point (zero-sum on
acceptance).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from ..errors import (
    AcceptWithoutPending,
    InsufficientResources,
    InvalidMove,
    NotYourTurn,
    ProposalLimitExceeded,
    StateFrozen,
)
from .grammar import NONE_LITERAL, PLAYERS, TagMessage, TradeProposal, parse_trade

RED, BLUE = PLAYERS


class GameKind(str, Enum):
    RESOURCE_EXCHANGE = "resource-exchange"
    ULTIMATUM = "ultimatum"
    SELL_BUY = "sell-buy"


class Outcome(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    NO_DEAL = "no-deal"


# Legal <player answer> values per game.
ANSWERS: dict[GameKind, tuple[str, ...]] = {
    GameKind.RESOURCE_EXCHANGE: ("ACCEPT", "NONE"),
    GameKind.ULTIMATUM: ("ACCEPT", "REJECT", "NONE"),
    GameKind.SELL_BUY: ("PROPOSAL", "ACCEPT", "REJECT"),
}


@dataclass(frozen=True)
class GameConfig:
    game_kind: GameKind
    resources: tuple[str, ...]
    initial: tuple[tuple[str, tuple[tuple[str, int], ...]], ...]
    max_rounds: int
    proposal_limit: int
    reference: float = 50.0
    # Private beliefs for sell-buy prompts; they do not enter the utility.
    cost: int = 40
    willingness: int = 60
    first_player: str = RED

    def initial_holdings(self) -> dict[str, dict[str, int]]:
        return {player: dict(items) for player, items in self.initial}

    @property
    def moves_each(self) -> int:
        return self.max_rounds // 2

    @staticmethod
    def resource_exchange(p1=(25, 5), p2=(5, 25)) -> "GameConfig":
        return GameConfig(
            game_kind=GameKind.RESOURCE_EXCHANGE,
            resources=("X", "Y"),
            initial=((RED, (("X", p1[0]), ("Y", p1[1]))), (BLUE, (("X", p2[0]), ("Y", p2[1])))),
            max_rounds=8,
            proposal_limit=3,
        )

    @staticmethod
    def ultimatum(pot=100) -> "GameConfig":
        return GameConfig(
            game_kind=GameKind.ULTIMATUM,
            resources=("Dollars",),
            initial=((RED, (("Dollars", pot),)), (BLUE, (("Dollars", 0),))),
            max_rounds=8,
            proposal_limit=4,
            reference=pot / 2,
        )

    @staticmethod
    def sell_buy(cost=40, willingness=60, zup=100) -> "GameConfig":
        return GameConfig(
            game_kind=GameKind.SELL_BUY,
            resources=("X", "ZUP"),
            initial=((RED, (("X", 1),)), (BLUE, (("ZUP", zup),))),
            max_rounds=10,
            proposal_limit=4,
            cost=cost,
            willingness=willingness,
        )


GAME_PRESETS = {
    "resource-exchange": GameConfig.resource_exchange,
    "resource-exchange-35-15": lambda: GameConfig.resource_exchange((35, 15), (15, 35)),
    "ultimatum": GameConfig.ultimatum,
    "ultimatum-1000": lambda: GameConfig.ultimatum(1000),
    "sell-buy": GameConfig.sell_buy,
    "sell-buy-30-70": lambda: GameConfig.sell_buy(30, 70),
}


@dataclass(frozen=True)
class GameState:
    holdings: dict[str, dict[str, int]]
    pending: Optional[TradeProposal] = None
    pending_by: Optional[str] = None
    proposal_counts: dict[str, int] = field(default_factory=lambda: {RED: 0, BLUE: 0})
    move_index: int = 0
    transcript: tuple[tuple[str, TagMessage], ...] = ()
    outcome: Optional[Outcome] = None

    @staticmethod
    def initial(cfg: GameConfig) -> "GameState":
        return GameState(holdings=cfg.initial_holdings())

    def moves_taken(self, player: str) -> int:
        return sum(1 for who, _ in self.transcript if who == player)


def expected_player(state: GameState, cfg: GameConfig) -> str:
    order = (cfg.first_player, BLUE if cfg.first_player == RED else RED)
    return order[state.move_index % 2]


def _execute_transfer(
    holdings: dict[str, dict[str, int]], trade: TradeProposal
) -> dict[str, dict[str, int]]:
    updated = {player: dict(items) for player, items in holdings.items()}
    for giver in PLAYERS:
        receiver = BLUE if giver == RED else RED
        for resource, amount in trade.amounts(giver).items():
            held = updated[giver].get(resource, 0)
            if held < amount:
                raise InsufficientResources(
                    f"{giver} holds {held} {resource}, cannot give {amount}"
                )
            updated[giver][resource] = held - amount
            updated[receiver][resource] = updated[receiver].get(resource, 0) + amount
    return updated


def apply_move(state: GameState, player: str, message: TagMessage, cfg: GameConfig) -> GameState:
    """Apply one player's parsed message; returns the successor state."""
    if state.outcome is not None:
        raise StateFrozen("the game already has an outcome")
    if player != expected_player(state, cfg):
        raise NotYourTurn(f"it is not {player}'s turn")
    answer = message.answer
    if answer not in ANSWERS[cfg.game_kind]:
        raise InvalidMove(f"answer {answer!r} is not legal in {cfg.game_kind.value}")
    trade = parse_trade(message.trade_text, cfg.resources)

    holdings = state.holdings
    pending = state.pending
    pending_by = state.pending_by
    counts = dict(state.proposal_counts)
    outcome: Optional[Outcome] = None

    if answer == "ACCEPT":
        if trade is not None:
            raise InvalidMove("ACCEPT must come with trade NONE")
        if state.pending is None:
            raise AcceptWithoutPending("nothing to accept")
        holdings = _execute_transfer(holdings, state.pending)
        pending, pending_by = None, None
        outcome = Outcome.ACCEPTED
    elif answer == "REJECT":
        if trade is not None:
            raise InvalidMove("REJECT must come with trade NONE")
        outcome = Outcome.REJECTED
        if cfg.game_kind is GameKind.ULTIMATUM:
            # Rejection burns the pot: both players lose everything.
            holdings = {p: {r: 0 for r in items} for p, items in holdings.items()}
    elif trade is not None:
        # A new proposal (answer NONE in exchange/ultimatum, PROPOSAL in sell-buy).
        if cfg.game_kind is GameKind.SELL_BUY and answer != "PROPOSAL":
            raise InvalidMove("sell-buy proposals must use the PROPOSAL answer")
        if (
            cfg.game_kind is GameKind.ULTIMATUM
            and player == BLUE
            and state.moves_taken(player) + 1 >= cfg.moves_each
        ):
            raise ProposalLimitExceeded(
                f"{player} must ACCEPT or REJECT on its final move"
            )
        counts[player] += 1
        if counts[player] > cfg.proposal_limit:
            raise ProposalLimitExceeded(
                f"{player} exceeded the proposal limit of {cfg.proposal_limit}"
            )
        pending, pending_by = trade, player
    else:
        # NONE/NONE: wait for a new offer. Sell-buy and ultimatum have no
        # pass move; sell-buy NONE never reaches here (PROPOSAL requires a
        # trade, checked above).
        if answer == "PROPOSAL":
            raise InvalidMove("PROPOSAL answer requires a newly proposed trade")
        if cfg.game_kind is GameKind.ULTIMATUM:
            raise InvalidMove("ultimatum moves must accept, reject, or propose")

    move_index = state.move_index + 1
    if outcome is None and move_index >= cfg.max_rounds:
        outcome = Outcome.NO_DEAL
    return replace(
        state,
        holdings=holdings,
        pending=pending,
        pending_by=pending_by,
        proposal_counts=counts,
        move_index=move_index,
        transcript=state.transcript + ((player, message),),
        outcome=outcome,
    )


def utility(state: GameState, cfg: GameConfig, player: str) -> float:
    """Final payoff for one player; requires a finished game."""
    if state.outcome is None:
        raise ValueError("utility is defined only once the game has an outcome")
    held = state.holdings[player]
    if cfg.game_kind is GameKind.RESOURCE_EXCHANGE:
        return float(sum(held.values()))
    if cfg.game_kind is GameKind.ULTIMATUM:
        if state.outcome is Outcome.NO_DEAL:
            return 0.0
        return float(held.get("Dollars", 0)) - cfg.reference
    if cfg.game_kind is GameKind.SELL_BUY:
        if state.outcome is not Outcome.ACCEPTED:
            return 0.0
        price = float(state.holdings[RED].get("ZUP", 0))
        return price - cfg.reference if player == RED else cfg.reference - price
    raise ValueError(f"unsupported game kind {cfg.game_kind}")


def relative_utility(state: GameState, cfg: GameConfig, player: str) -> float:
    """Utility relative to the player's reference point, for good-set filtering.

    Ultimatum and sell-buy utilities are already reference-relative; resource
    exchange is measured against the initial endowment.
    """
    value = utility(state, cfg, player)
    if cfg.game_kind is GameKind.RESOURCE_EXCHANGE:
        value -= float(sum(cfg.initial_holdings()[player].values()))
    return value


@dataclass(frozen=True)
class MatchResult:
    outcome: Outcome
    holdings: dict[str, dict[str, int]]
    utilities: dict[str, float]
    winner: Optional[str]
    rounds_used: int
    forfeited_by: Optional[str] = None

    @property
    def decisive(self) -> bool:
        return self.winner is not None


def settle(state: GameState, cfg: GameConfig, forfeited_by: Optional[str] = None) -> MatchResult:
    """Score a finished game. No-deal games and equal utilities are ties."""
    utilities = {p: utility(state, cfg, p) for p in PLAYERS}
    winner: Optional[str] = None
    if state.outcome is not Outcome.NO_DEAL and utilities[RED] != utilities[BLUE]:
        winner = RED if utilities[RED] > utilities[BLUE] else BLUE
    return MatchResult(
        outcome=state.outcome,
        holdings={p: dict(items) for p, items in state.holdings.items()},
        utilities=utilities,
        winner=winner,
        rounds_used=state.move_index,
        forfeited_by=forfeited_by,
    )


def reject_state(state: GameState, cfg: GameConfig) -> GameState:
    """Force a rejection outcome (used when a player forfeits)."""
    holdings = state.holdings
    if cfg.game_kind is GameKind.ULTIMATUM:
        holdings = {p: {r: 0 for r in items} for p, items in holdings.items()}
    return replace(state, holdings=holdings, outcome=Outcome.REJECTED)


NONE_TRADE = NONE_LITERAL
