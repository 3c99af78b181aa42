"""Playing matches: policies, the turn harness, tournaments, and harvesting.

A policy maps a player's view of the game to raw response text. The harness
parses and applies each response; a player that cannot produce a legal,
well-formed response within the retry budget forfeits, which counts as a
rejection. Full transcripts are retained so match play can feed the
experience library.
"""

from __future__ import annotations

import csv
import io
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

from ..backends import Runtime
from ..core import AgentSpec
from ..errors import GameRuleError, MessageParseError, TradeParseError
from ..experience import StepRecord, Trajectory
from .. import prompts
from .engine import (
    ANSWERS,
    BLUE,
    RED,
    GameConfig,
    GameKind,
    GameState,
    MatchResult,
    Outcome,
    apply_move,
    expected_player,
    reject_state,
    relative_utility,
    settle,
)
from .grammar import (
    PLAYERS,
    RESPONSE_CONTRACTS,
    TagMessage,
    parse_message,
    render_message,
)

log = logging.getLogger(__name__)

MAX_FORMAT_RETRIES = 3


@dataclass
class PlayerView:
    """What a policy sees when asked for its next move."""

    cfg: GameConfig
    player: str
    state: GameState
    transcript: list[tuple[str, str]]  # (player, raw text) of prior valid turns
    rng: random.Random
    retry_error: Optional[str] = None

    @property
    def move_number(self) -> int:
        return self.state.moves_taken(self.player) + 1


class Policy(Protocol):
    def next_message(self, view: PlayerView) -> str: ...


@dataclass
class TurnRecord:
    player: str
    raw: str
    message: Optional[TagMessage]
    error: Optional[str]
    snapshot: dict

    def to_record(self) -> dict:
        return {
            "player": self.player,
            "raw": self.raw,
            "parsed": dict(self.message.fields) if self.message else None,
            "error": self.error,
            "state": self.snapshot,
        }


@dataclass
class MatchRecord:
    cfg: GameConfig
    result: MatchResult
    turns: list[TurnRecord] = field(default_factory=list)

    def valid_turns(self, player: Optional[str] = None) -> list[TurnRecord]:
        return [
            t
            for t in self.turns
            if t.error is None and (player is None or t.player == player)
        ]


def _snapshot(state: GameState) -> dict:
    return {
        "holdings": {p: dict(h) for p, h in state.holdings.items()},
        "move_index": state.move_index,
        "proposal_counts": dict(state.proposal_counts),
        "outcome": state.outcome.value if state.outcome else None,
    }


def run_match(
    cfg: GameConfig,
    policy_red: Policy,
    policy_blue: Policy,
    seed: int = 0,
    max_format_retries: int = MAX_FORMAT_RETRIES,
) -> MatchRecord:
    """Alternate turns until acceptance, rejection, forfeit, or the round cap."""
    policies = {RED: policy_red, BLUE: policy_blue}
    rng = random.Random(seed)
    state = GameState.initial(cfg)
    turns: list[TurnRecord] = []
    transcript: list[tuple[str, str]] = []
    forfeited_by: Optional[str] = None

    while state.outcome is None:
        player = expected_player(state, cfg)
        error: Optional[str] = None
        applied = False
        for _ in range(max_format_retries):
            view = PlayerView(cfg, player, state, list(transcript), rng, retry_error=error)
            raw = policies[player].next_message(view)
            try:
                message = parse_message(raw, cfg.game_kind.value)
                state = apply_move(state, player, message, cfg)
            except (MessageParseError, TradeParseError, GameRuleError) as exc:
                error = f"{type(exc).__name__}: {exc}"
                turns.append(TurnRecord(player, raw, None, error, _snapshot(state)))
                continue
            turns.append(TurnRecord(player, raw, message, None, _snapshot(state)))
            transcript.append((player, raw))
            applied = True
            break
        if not applied:
            log.warning("%s forfeits after %d malformed responses", player, max_format_retries)
            forfeited_by = player
            state = reject_state(state, cfg)

    result = settle(state, cfg, forfeited_by=forfeited_by)
    return MatchRecord(cfg=cfg, result=result, turns=turns)


# --- score aggregation ----------------------------------------------------------


@dataclass(frozen=True)
class ScoreRow:
    pairing: str
    matches: int
    decisive_games: int
    win_rate_p1: Optional[float]
    win_rate_p2: Optional[float]
    mean_payoff_p1: float
    mean_payoff_p2: float


def score_matches(results: Sequence[MatchResult], pairing: str = "") -> ScoreRow:
    """Win rate over decisive games only; payoffs averaged over all games."""
    decisive = [r for r in results if r.decisive]
    wins_p1 = sum(1 for r in decisive if r.winner == RED)
    wins_p2 = sum(1 for r in decisive if r.winner == BLUE)
    n_decisive = len(decisive)
    return ScoreRow(
        pairing=pairing,
        matches=len(results),
        decisive_games=n_decisive,
        win_rate_p1=(100.0 * wins_p1 / n_decisive) if n_decisive else None,
        win_rate_p2=(100.0 * wins_p2 / n_decisive) if n_decisive else None,
        mean_payoff_p1=sum(r.utilities[RED] for r in results) / len(results),
        mean_payoff_p2=sum(r.utilities[BLUE] for r in results) / len(results),
    )


def run_tournament(
    cfg: GameConfig,
    policy_red_factory: Callable[[], Policy],
    policy_blue_factory: Callable[[], Policy],
    n_matches: int,
    seed: int = 0,
    pairing: str = "",
) -> tuple[ScoreRow, list[MatchRecord]]:
    """Repeated matches of one pairing; fresh policy instances per match."""
    if n_matches < 1:
        raise ValueError("n_matches must be >= 1")
    records = [
        run_match(cfg, policy_red_factory(), policy_blue_factory(), seed=seed + i)
        for i in range(n_matches)
    ]
    return score_matches([r.result for r in records], pairing=pairing), records


SCORE_COLUMNS = (
    "pairing",
    "decisive_games",
    "win_rate_p1",
    "win_rate_p2",
    "mean_payoff_p1",
    "mean_payoff_p2",
)


def scores_to_csv(rows: Sequence[ScoreRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(SCORE_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row.pairing,
                row.decisive_games,
                "" if row.win_rate_p1 is None else f"{row.win_rate_p1:.2f}",
                "" if row.win_rate_p2 is None else f"{row.win_rate_p2:.2f}",
                f"{row.mean_payoff_p1:.2f}",
                f"{row.mean_payoff_p2:.2f}",
            ]
        )
    return buffer.getvalue()


# --- prompt construction for model-backed play and harvesting -------------------


def _render_holdings(holdings: dict[str, int]) -> str:
    return ", ".join(f"{name}: {amount}" for name, amount in holdings.items())


def system_prompt_for(cfg: GameConfig, player: str) -> str:
    resources = _render_holdings(cfg.initial_holdings()[player])
    if cfg.game_kind is GameKind.RESOURCE_EXCHANGE:
        per_resource = sum(cfg.initial_holdings()[player].values()) // (2 * len(cfg.resources))
        goals = ", ".join(f"{r}: {per_resource * 2 // len(cfg.resources)}" for r in cfg.resources)
        return prompts.RESOURCE_EXCHANGE_SYSTEM.format(
            proposal_limit=cfg.proposal_limit,
            resource_names=", ".join(cfg.resources),
            resources=resources,
            goals=goals,
            player_name=player,
        )
    if cfg.game_kind is GameKind.SELL_BUY:
        if player == RED:
            goals = prompts.SELL_BUY_SELLER_GOALS.format(cost=cfg.cost)
        else:
            goals = prompts.SELL_BUY_BUYER_GOALS.format(willingness=cfg.willingness)
        return prompts.SELL_BUY_SYSTEM.format(
            proposal_limit=cfg.proposal_limit,
            resources=resources,
            goals=goals,
            player_name=player,
        )
    if cfg.game_kind is GameKind.ULTIMATUM:
        pot = cfg.initial_holdings()[RED].get("Dollars", 0)
        return prompts.ULTIMATUM_SYSTEM.format(
            pot=pot, moves_each=cfg.moves_each, resources=resources
        )
    raise ValueError(f"unsupported game kind {cfg.game_kind}")


def turn_prompt_for(
    cfg: GameConfig, player: str, transcript: Sequence[tuple[str, str]], move_number: int
) -> str:
    """Deterministic user prompt for one turn; shared by play and harvesting."""
    lines: list[str] = []
    if transcript:
        lines.append("Messages so far:")
        for who, raw in transcript:
            lines.append(f"[Player {who}]")
            lines.append(raw)
        lines.append("")
    else:
        lines.append("The game begins; no messages have been exchanged yet.")
        lines.append("")
    lines.append(
        f"You are Player {player}. It is your move ({move_number} of {cfg.moves_each}). "
        "Respond with the required tags in the required order."
    )
    return "\n".join(lines)


@dataclass
class ModelPolicy:
    """A policy backed by a generation agent."""

    agent: AgentSpec
    runtime: Runtime

    def next_message(self, view: PlayerView) -> str:
        prompt = turn_prompt_for(view.cfg, view.player, view.transcript, view.move_number)
        if view.retry_error:
            prompt += (
                f"\n\nYour previous response was invalid ({view.retry_error}). "
                "Reply again with exactly the required tags."
            )
        return self.runtime.ask(self.agent, prompt)


def model_policy(cfg: GameConfig, player: str, agent: AgentSpec, runtime: Runtime) -> ModelPolicy:
    spec = AgentSpec(
        agent_id=agent.agent_id,
        role_name=agent.role_name,
        system_prompt=system_prompt_for(cfg, player),
        turn_template=agent.turn_template,
        model_ref=agent.model_ref,
    )
    return ModelPolicy(spec, runtime)


# --- scripted policies ------------------------------------------------------------


@dataclass
class ScriptPolicy:
    """Emits a fixed sequence of raw responses (including across retries)."""

    texts: list[str]
    _cursor: int = 0

    def next_message(self, view: PlayerView) -> str:
        if self._cursor >= len(self.texts):
            raise IndexError("scripted game policy ran out of responses")
        text = self.texts[self._cursor]
        self._cursor += 1
        return text


def build_message(
    cfg: GameConfig,
    view: PlayerView,
    answer: str,
    trade_text: str = "NONE",
    reason: str = "scripted",
    note: str = "scripted",
) -> str:
    """Assemble a contract-complete response for the given game."""
    state = view.state
    values = {
        "my name": f"Player {view.player}",
        "move": f"{view.move_number} / {cfg.moves_each}",
        "proposal count": str(
            state.proposal_counts[view.player] + (1 if trade_text != "NONE" else 0)
        ),
        "my resources": _render_holdings(state.holdings[view.player]),
        "my goals": "play the scripted line",
        "reason": reason,
        "player answer": answer,
        "message": note,
        "newly proposed trade": trade_text,
    }
    contract = RESPONSE_CONTRACTS[cfg.game_kind.value]
    return render_message(TagMessage(tuple((name, values[name]) for name in contract)))


def _fair_trade(cfg: GameConfig) -> str:
    if cfg.game_kind is GameKind.RESOURCE_EXCHANGE:
        return "Player RED Gives X: 10 | Player BLUE Gives Y: 10"
    if cfg.game_kind is GameKind.ULTIMATUM:
        pot = cfg.initial_holdings()[RED].get("Dollars", 0)
        return f"Player RED Gives Dollars: {pot // 2} | Player BLUE Gives Dollars: 0"
    return f"Player RED Gives X: 1 | Player BLUE Gives ZUP: {int(cfg.reference)}"


@dataclass
class RulePolicy:
    """Small deterministic behaviors for demos and tests.

    always-none waits forever (and rejects where waiting is illegal), accept2
    accepts the first pending offer, propose-accept opens with a fair offer
    and accepts the counterparty's, reject ends the game immediately.
    """

    behavior: str

    def _move_or_reject(self, view: PlayerView, trade: str) -> str:
        # Games without a pass move force a proposal; past the proposal
        # limit the only legal endings are ACCEPT/REJECT.
        cfg = view.cfg
        if view.state.proposal_counts[view.player] >= cfg.proposal_limit:
            return build_message(cfg, view, "REJECT")
        answer = "PROPOSAL" if cfg.game_kind is GameKind.SELL_BUY else "NONE"
        return build_message(cfg, view, answer, trade)

    def next_message(self, view: PlayerView) -> str:
        cfg = view.cfg
        pending = view.state.pending is not None and view.state.pending_by != view.player
        can_pass = cfg.game_kind is GameKind.RESOURCE_EXCHANGE
        if self.behavior == "reject":
            if "REJECT" in ANSWERS[cfg.game_kind]:
                return build_message(cfg, view, "REJECT")
            return build_message(cfg, view, "NONE")
        if self.behavior == "always-none":
            if can_pass:
                return build_message(cfg, view, "NONE")
            return build_message(cfg, view, "REJECT")
        if self.behavior == "accept2":
            if pending:
                return build_message(cfg, view, "ACCEPT")
            if can_pass:
                return build_message(cfg, view, "NONE")
            return self._move_or_reject(view, _fair_trade(cfg))
        if self.behavior == "propose-accept":
            if view.state.moves_taken(view.player) == 0:
                return self._move_or_reject(view, _fair_trade(cfg))
            if pending:
                return build_message(cfg, view, "ACCEPT")
            if can_pass:
                return build_message(cfg, view, "NONE")
            return self._move_or_reject(view, _fair_trade(cfg))
        raise ValueError(f"unknown scripted behavior {self.behavior!r}")


POLICY_BEHAVIORS = ("always-none", "accept2", "propose-accept", "reject")


def make_policy(spec: str, cfg: GameConfig, player: str, runtime: Optional[Runtime] = None) -> Policy:
    """Build a policy from a CLI-style spec: ``scripted:<behavior>`` or ``model:<name>``."""
    kind, _, arg = spec.partition(":")
    if kind == "scripted":
        if arg not in POLICY_BEHAVIORS:
            raise ValueError(f"unknown scripted policy {arg!r}; choose from {POLICY_BEHAVIORS}")
        return RulePolicy(arg)
    if kind == "model":
        if runtime is None:
            raise ValueError("model policies need a runtime")
        from ..core import BackendKind, ModelRef

        agent = AgentSpec(
            agent_id=f"player-{player.lower()}",
            role_name=f"Player {player}",
            system_prompt="",
            turn_template="",
            model_ref=ModelRef(BackendKind.REMOTE_CHAT, arg or "base"),
        )
        return model_policy(cfg, player, agent, runtime)
    raise ValueError(f"unknown policy spec {spec!r}")


# --- experience harvesting ----------------------------------------------------------


def match_to_trajectory(record: MatchRecord, match_id: str = "match") -> Trajectory:
    """One trajectory per match: each player's valid turns become its steps.

    Step prompts are the same deterministic turn prompts a model-backed
    player would have seen, so harvested examples match live play. Rewards
    are reference-relative utilities (positive means the player came out
    ahead), so threshold filtering at 0 keeps winner-side turns.
    """
    cfg = record.cfg
    steps: list[StepRecord] = []
    transcript_so_far: list[tuple[str, str]] = []
    move_numbers = {RED: 0, BLUE: 0}
    for turn in record.valid_turns():
        move_numbers[turn.player] += 1
        prompt = turn_prompt_for(cfg, turn.player, transcript_so_far, move_numbers[turn.player])
        steps.append(StepRecord(turn.player, prompt, turn.raw))
        transcript_so_far.append((turn.player, turn.raw))

    utilities = dict(record.result.utilities)
    if cfg.game_kind is GameKind.RESOURCE_EXCHANGE:
        for player in PLAYERS:
            utilities[player] -= float(sum(cfg.initial_holdings()[player].values()))
    return Trajectory(
        problem_id=match_id,
        steps=steps,
        final_answer=record.result.outcome.value,
        game_utilities=utilities,
        rewards=dict(utilities),
    )
