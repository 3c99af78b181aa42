"""Exception types shared across the package."""

from __future__ import annotations


class AgentLoopError(Exception):
    """Base class for all package errors."""


# --- prompt rendering / answer extraction ---------------------------------


class MissingPlaceholder(AgentLoopError):
    def __init__(self, name: str):
        super().__init__(f"template placeholder {{{name}}} has no binding")
        self.name = name


class AnswerNotFound(AgentLoopError):
    """No recognizable answer marker in the model output."""


# --- backends --------------------------------------------------------------


class BackendError(AgentLoopError):
    """Transport or server failure talking to a generation backend."""

    def __init__(self, message: str, *, retryable: bool = False, attempts: int = 1):
        super().__init__(message)
        self.retryable = retryable
        self.attempts = attempts


class ScriptExhausted(AgentLoopError):
    def __init__(self, agent_id: str, call_index: int):
        super().__init__(f"scripted backend has no response for {agent_id!r} call #{call_index}")
        self.agent_id = agent_id
        self.call_index = call_index


class ScriptMismatch(AgentLoopError):
    """A scripted response's expected prompt pattern did not match the actual prompt."""


# --- communication graphs ---------------------------------------------------


class GraphError(AgentLoopError):
    pass


class CycleDetected(GraphError):
    def __init__(self, path: list[str]):
        super().__init__(f"communication graph contains a cycle: {' -> '.join(path)}")
        self.path = path


class DanglingEdge(GraphError):
    def __init__(self, edge: tuple[str, str]):
        super().__init__(f"edge {edge} references a node that does not exist")
        self.edge = edge


class UnknownAgent(GraphError):
    def __init__(self, agent_id: str):
        super().__init__(f"agent {agent_id!r} is not a node of the graph")
        self.agent_id = agent_id


# --- experience / rewards ---------------------------------------------------


class SettingMismatch(AgentLoopError):
    """Trajectory shape does not match the configured reward setting."""


class EmptyFeedback(AgentLoopError):
    """The feedback agent returned empty output."""


# --- game message grammar ----------------------------------------------------


class MessageParseError(AgentLoopError):
    pass


class MissingTag(MessageParseError):
    def __init__(self, name: str):
        super().__init__(f"required tag <{name}> is missing")
        self.name = name


class MalformedTag(MessageParseError):
    def __init__(self, position: int, reason: str):
        super().__init__(f"malformed tag structure at offset {position}: {reason}")
        self.position = position
        self.reason = reason


class DuplicateTag(MessageParseError):
    def __init__(self, name: str):
        super().__init__(f"tag <{name}> appears more than once")
        self.name = name


class UnknownTag(MessageParseError):
    def __init__(self, name: str):
        super().__init__(f"tag <{name}> is not part of this game's response contract")
        self.name = name


class TradeParseError(AgentLoopError):
    pass


class NonIntegerAmount(TradeParseError):
    def __init__(self, token: str):
        super().__init__(f"trade amounts must be integers, got {token!r}")
        self.token = token


class UnknownResource(TradeParseError):
    def __init__(self, name: str):
        super().__init__(f"resource {name!r} is not part of this game")
        self.name = name


class TradeSyntaxError(TradeParseError):
    pass


# --- game rules --------------------------------------------------------------


class GameRuleError(AgentLoopError):
    pass


class ProposalLimitExceeded(GameRuleError):
    pass


class AcceptWithoutPending(GameRuleError):
    pass


class NotYourTurn(GameRuleError):
    pass


class InsufficientResources(GameRuleError):
    pass


class StateFrozen(GameRuleError):
    """The game already has an outcome; no further moves are accepted."""


class InvalidMove(GameRuleError):
    """The message is well-formed but not a legal move in this game."""


# --- training loop -------------------------------------------------------------


class EmptyDataset(AgentLoopError):
    """A fine-tune submission was rejected because its dataset has no records."""


class IterationHalted(AgentLoopError):
    """A fine-tune provider failure stopped the iteration; resume from checkpoint."""


# --- configuration / CLI ------------------------------------------------------


class ConfigError(AgentLoopError):
    """Invalid run configuration; maps to CLI exit code 2."""
