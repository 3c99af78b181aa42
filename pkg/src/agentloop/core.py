"""Agent identities, prompt templating, and final-answer extraction.

An agent is a named role bound to a system prompt, a per-turn prompt
template, and a model reference. Templates use ``{placeholder}`` markers
that are substituted verbatim in a single pass.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .errors import AnswerNotFound, MissingPlaceholder

log = logging.getLogger(__name__)

_PLACEHOLDER = re.compile(r"\{([a-zA-Z_][a-zA-Z0-9_]*)\}")


class TaskKind(str, Enum):
    MULTIPLE_CHOICE = "multiple-choice"
    YES_NO_MAYBE = "yes-no-maybe"
    JUDGMENT = "judgment"


class BackendKind(str, Enum):
    REMOTE_CHAT = "remote-chat"
    SCRIPTED = "scripted"


@dataclass(frozen=True)
class Decoding:
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ModelRef:
    """Reference to the model (and decoding settings) an agent currently uses."""

    backend_kind: BackendKind = BackendKind.SCRIPTED
    model_name: str = "base"
    decoding: Decoding = field(default_factory=Decoding)

    def with_model(self, model_name: str) -> "ModelRef":
        return ModelRef(self.backend_kind, model_name, self.decoding)


@dataclass(frozen=True)
class AgentSpec:
    """One role in a pipeline: identity, prompts, and current model."""

    agent_id: str
    role_name: str
    system_prompt: str
    turn_template: str
    model_ref: ModelRef = field(default_factory=ModelRef)
    # Template used when the agent redoes a step from feedback; agents
    # without a dedicated one fall back to a generic revision template.
    regenerate_template: Optional[str] = None

    def with_model(self, model_ref: ModelRef) -> "AgentSpec":
        return AgentSpec(
            self.agent_id,
            self.role_name,
            self.system_prompt,
            self.turn_template,
            model_ref,
            self.regenerate_template,
        )


class Speaker(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatTurn:
    speaker: Speaker
    content: str


@dataclass(frozen=True)
class ProblemInstance:
    """One problem: question, optional long context, and its canonical answer."""

    problem_id: str
    question: str
    gold_answer: str
    task_kind: TaskKind = TaskKind.YES_NO_MAYBE
    context: Optional[str] = None


def placeholders_in(template: str) -> list[str]:
    """Placeholder names in order of first appearance."""
    seen: list[str] = []
    for m in _PLACEHOLDER.finditer(template):
        if m.group(1) not in seen:
            seen.append(m.group(1))
    return seen


def render_prompt(template: str, bindings: Mapping[str, str]) -> str:
    """Substitute every ``{name}`` marker in ``template`` with its binding.

    Substitution is a single pass: binding values are inserted verbatim and
    never re-scanned. Every placeholder must have a binding; bindings that
    match no placeholder are ignored with a warning.
    """
    needed = set(placeholders_in(template))
    for name in needed:
        if name not in bindings:
            raise MissingPlaceholder(name)
    unused = set(bindings) - needed
    if unused:
        log.warning("ignoring bindings with no matching placeholder: %s", sorted(unused))
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template)


_ANSWER_LETTER = re.compile(r"Answer:\s*\(?([A-Za-z])\)?(?![a-zA-Z])", re.IGNORECASE)
_ANSWER_YNM = re.compile(r"Answer:\s*\"?(yes|no|maybe)\b", re.IGNORECASE)
_OPINION = re.compile(r"Opinion:\s*\"?(true|false)\b", re.IGNORECASE)


def extract_final_answer(text: str, task_kind: TaskKind) -> str | bool:
    """Pull the canonical answer token out of a model response.

    The *last* marker wins: revision traces legitimately contain earlier,
    superseded answers. Raises AnswerNotFound when no marker is present;
    callers score that as incorrect rather than failing.
    """
    if not text:
        raise AnswerNotFound("empty response")
    if task_kind == TaskKind.MULTIPLE_CHOICE:
        matches = _ANSWER_LETTER.findall(text)
        if not matches:
            raise AnswerNotFound("no 'Answer: <letter>' marker")
        return matches[-1].upper()
    if task_kind == TaskKind.YES_NO_MAYBE:
        matches = _ANSWER_YNM.findall(text)
        if not matches:
            raise AnswerNotFound("no 'Answer: yes|no|maybe' marker")
        return matches[-1].lower()
    if task_kind == TaskKind.JUDGMENT:
        matches = _OPINION.findall(text)
        if not matches:
            raise AnswerNotFound("no 'Opinion: True|False' marker")
        return matches[-1].lower() == "true"
    raise ValueError(f"unsupported task kind: {task_kind}")


def normalize_gold(gold: str, task_kind: TaskKind) -> str | bool:
    """Canonicalize a task file's gold answer the same way extraction does."""
    if task_kind == TaskKind.MULTIPLE_CHOICE:
        return gold.strip().upper()
    if task_kind == TaskKind.YES_NO_MAYBE:
        return gold.strip().lower()
    if task_kind == TaskKind.JUDGMENT:
        return gold.strip().lower() == "true"
    raise ValueError(f"unsupported task kind: {task_kind}")
