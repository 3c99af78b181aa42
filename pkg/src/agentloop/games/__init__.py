"""Negotiation game environments: grammar, rules, and match harness."""

from .engine import (
    ANSWERS,
    BLUE,
    GAME_PRESETS,
    RED,
    GameConfig,
    GameKind,
    GameState,
    MatchResult,
    Outcome,
    apply_move,
    expected_player,
    relative_utility,
    settle,
    utility,
)
from .grammar import (
    PLAYERS,
    RESPONSE_CONTRACTS,
    TAG_VOCABULARY,
    TagMessage,
    TradeProposal,
    parse_message,
    parse_trade,
    render_message,
    render_trade,
)
from .match import (
    MatchRecord,
    ModelPolicy,
    PlayerView,
    Policy,
    RulePolicy,
    ScriptPolicy,
    ScoreRow,
    build_message,
    make_policy,
    match_to_trajectory,
    run_match,
    run_tournament,
    score_matches,
    scores_to_csv,
    system_prompt_for,
    turn_prompt_for,
)

__all__ = [
    "ANSWERS",
    "BLUE",
    "GAME_PRESETS",
    "PLAYERS",
    "RED",
    "RESPONSE_CONTRACTS",
    "TAG_VOCABULARY",
    "GameConfig",
    "GameKind",
    "GameState",
    "MatchRecord",
    "MatchResult",
    "ModelPolicy",
    "Outcome",
    "PlayerView",
    "Policy",
    "RulePolicy",
    "ScoreRow",
    "ScriptPolicy",
    "TagMessage",
    "TradeProposal",
    "apply_move",
    "build_message",
    "expected_player",
    "make_policy",
    "match_to_trajectory",
    "parse_message",
    "parse_trade",
    "relative_utility",
    "render_message",
    "render_trade",
    "run_match",
    "run_tournament",
    "score_matches",
    "scores_to_csv",
    "settle",
    "system_prompt_for",
    "turn_prompt_for",
    "utility",
]
