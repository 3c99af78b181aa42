"""Trajectory records, reward evaluation, and the per-agent experience library.

A trajectory is one problem's full interaction record. Rewards are computed
per setting; steps from trajectories whose reward clears the threshold are
deduplicated into per-(iteration, agent) training examples and exported as
chat-format JSON Lines.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

from .core import ProblemInstance, TaskKind, normalize_gold
from .errors import SettingMismatch

if TYPE_CHECKING:  # pragma: no cover
    from .topology import ActorCriticTrace

log = logging.getLogger(__name__)


class Provenance(str, Enum):
    DIRECT = "direct"
    AUGMENTED = "augmented"


class Setting(str, Enum):
    PROBLEM_SOLVING = "problem-solving"
    ACTOR_CRITIC = "actor-critic"
    COMPETITIVE = "competitive"


@dataclass(frozen=True)
class RewardConfig:
    setting: Setting = Setting.PROBLEM_SOLVING
    # Good-set membership requires reward strictly above epsilon. 0.5 splits
    # the {0, 1} correctness rewards; competitive settings use 0 (utility
    # above the reference point).
    epsilon: float = 0.5


@dataclass(frozen=True)
class StepRecord:
    agent_id: str
    rendered_prompt: str
    output: str
    provenance: Provenance = Provenance.DIRECT
    iteration: int = 0


@dataclass
class Trajectory:
    problem_id: str
    steps: list[StepRecord] = field(default_factory=list)
    final_answer: Optional[str | bool] = None
    rewards: dict[str, float] = field(default_factory=dict)
    correct: Optional[bool] = None
    actor_critic: Optional["ActorCriticTrace"] = None
    # Reference-relative utilities when the trajectory came from a game.
    game_utilities: Optional[dict[str, float]] = None

    @property
    def answered(self) -> bool:
        return self.final_answer is not None

    def agent_ids(self) -> list[str]:
        seen: list[str] = []
        for step in self.steps:
            if step.agent_id not in seen:
                seen.append(step.agent_id)
        return seen

    def last_step(self, agent_id: str) -> Optional[StepRecord]:
        for step in reversed(self.steps):
            if step.agent_id == agent_id:
                return step
        return None


def evaluate_rewards(
    trajectory: Trajectory, problem: ProblemInstance, cfg: RewardConfig
) -> dict[str, float]:
    """Per-agent rewards for one trajectory under the configured setting."""
    if cfg.setting is Setting.PROBLEM_SOLVING:
        if trajectory.actor_critic is not None or trajectory.game_utilities is not None:
            raise SettingMismatch("trajectory is not a plain problem-solving run")
        gold = normalize_gold(problem.gold_answer, problem.task_kind)
        value = 1.0 if trajectory.final_answer == gold else 0.0
        return {agent_id: value for agent_id in trajectory.agent_ids()}

    if cfg.setting is Setting.ACTOR_CRITIC:
        trace = trajectory.actor_critic
        if trace is None:
            raise SettingMismatch("trajectory has no actor-critic trace")
        gold = normalize_gold(problem.gold_answer, problem.task_kind)
        initial_correct = trace.actor_answer == gold
        final_correct = trace.final_answer == gold
        rewards = {
            trace.actor_id: 1.0 if final_correct else 0.0,
            trace.judgment_id: 1.0 if trace.judgment_verdict == initial_correct else 0.0,
        }
        if trace.critic_feedback is not None:
            corrected = (
                not trace.judgment_verdict
                and trace.regenerated_answer is not None
                and trace.regenerated_answer == gold
            )
            rewards[trace.critic_id] = 1.0 if corrected else 0.0
        return rewards

    if cfg.setting is Setting.COMPETITIVE:
        if trajectory.game_utilities is None:
            raise SettingMismatch("trajectory has no game utilities")
        return dict(trajectory.game_utilities)

    raise SettingMismatch(f"unsupported setting: {cfg.setting}")


@dataclass(frozen=True)
class TrainingExample:
    """One chat-format fine-tuning record plus its provenance."""

    agent_id: str
    system: str
    user: str
    assistant: str
    provenance: Provenance = Provenance.DIRECT
    problem_id: str = ""
    reward: float = 1.0

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for part in (self.agent_id, self.user, self.assistant):
            digest.update(part.encode("utf-8"))
            digest.update(b"\x00")
        return digest.hexdigest()

    def to_record(self) -> dict:
        return {
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
                {"role": "assistant", "content": self.assistant},
            ]
        }


def filter_good(
    trajectories: Sequence[Trajectory],
    agent_id: str,
    epsilon: float,
    system_prompt: str = "",
) -> list[TrainingExample]:
    """Training examples for one agent from trajectories with reward > epsilon.

    The agent's last step in each qualifying trajectory becomes the example
    (the step that produced the answer the reward was computed on).
    Duplicates by (agent, prompt, output) content are dropped.
    """
    out: list[TrainingExample] = []
    seen: set[str] = set()
    for trajectory in trajectories:
        reward = trajectory.rewards.get(agent_id)
        if reward is None or reward <= epsilon:
            continue
        step = trajectory.last_step(agent_id)
        if step is None:
            continue
        example = TrainingExample(
            agent_id=agent_id,
            system=system_prompt,
            user=step.rendered_prompt,
            assistant=step.output,
            provenance=step.provenance,
            problem_id=trajectory.problem_id,
            reward=reward,
        )
        key = example.content_hash()
        if key in seen:
            continue
        seen.add(key)
        out.append(example)
    return out


class ExperienceLibrary:
    """Deduplicated training examples keyed by (iteration, agent)."""

    def __init__(self):
        self._examples: dict[tuple[int, str], list[TrainingExample]] = {}
        self._hashes: dict[tuple[int, str], set[str]] = {}

    def add(self, iteration: int, example: TrainingExample) -> bool:
        """Store one example; returns False when it was a duplicate."""
        key = (iteration, example.agent_id)
        hashes = self._hashes.setdefault(key, set())
        content = example.content_hash()
        if content in hashes:
            return False
        hashes.add(content)
        self._examples.setdefault(key, []).append(example)
        return True

    def extend(self, iteration: int, examples: Iterable[TrainingExample]) -> int:
        return sum(1 for ex in examples if self.add(iteration, ex))

    def examples(self, iteration: int, agent_id: str) -> list[TrainingExample]:
        return list(self._examples.get((iteration, agent_id), []))

    def agents(self, iteration: int) -> list[str]:
        return sorted({agent for it, agent in self._examples if it == iteration})

    def iterations(self) -> list[int]:
        return sorted({it for it, _ in self._examples})


def library_stats(lib: ExperienceLibrary, iteration: int, agent_id: str) -> dict:
    """Direct/augmented counts and the augmentation ratio as a percentage.

    The ratio is augmented/direct; it is reported as None when there are no
    direct examples to divide by.
    """
    examples = lib.examples(iteration, agent_id)
    direct = sum(1 for ex in examples if ex.provenance is Provenance.DIRECT)
    augmented = sum(1 for ex in examples if ex.provenance is Provenance.AUGMENTED)
    ratio = (100.0 * augmented / direct) if direct > 0 else None
    return {
        "direct_count": direct,
        "augmented_count": augmented,
        "augmentation_ratio": ratio,
    }


def export_dataset(
    lib: ExperienceLibrary, iteration: int, agent_id: str, path: str | Path
) -> int:
    """Write one agent's examples as chat-format JSON Lines; returns the count.

    An empty example set still produces the (zero-record) file, with a
    warning, so downstream tooling sees a consistent layout.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    examples = lib.examples(iteration, agent_id)
    with path.open("w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(example.to_record(), ensure_ascii=False) + "\n")
    if not examples:
        log.warning("exported empty dataset for %s (iteration %d) to %s", agent_id, iteration, path)
    return len(examples)


_ROLES = ("system", "user", "assistant")


def parse_dataset(path: str | Path) -> list[tuple[str, str, str]]:
    """Parse and validate an exported dataset; returns (system, user, assistant) triples."""
    triples: list[tuple[str, str, str]] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            messages = record.get("messages")
            if not isinstance(messages, list) or len(messages) != len(_ROLES):
                raise ValueError(f"{path}:{lineno}: expected exactly {len(_ROLES)} messages")
            contents = []
            for message, role in zip(messages, _ROLES):
                if message.get("role") != role:
                    raise ValueError(f"{path}:{lineno}: expected role {role!r}")
                content = message.get("content")
                if not isinstance(content, str):
                    raise ValueError(f"{path}:{lineno}: {role} content must be a string")
                contents.append(content)
            triples.append(tuple(contents))
    return triples


def write_manifest(directory: str | Path, iteration: int, counts: dict[str, dict]) -> Path:
    """Write the per-iteration manifest (counts and file hashes per agent)."""
    directory = Path(directory)
    manifest = {"iteration": iteration, "agents": counts}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_library(
    lib: ExperienceLibrary, directory: str | Path, iteration: int
) -> dict[str, dict]:
    """Persist one iteration of the library: one dataset per agent plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    counts: dict[str, dict] = {}
    for agent_id in lib.agents(iteration):
        dataset = directory / f"{agent_id}.jsonl"
        count = export_dataset(lib, iteration, agent_id, dataset)
        stats = library_stats(lib, iteration, agent_id)
        counts[agent_id] = {
            "count": count,
            "direct": stats["direct_count"],
            "augmented": stats["augmented_count"],
            "sha256": file_sha256(dataset),
        }
    write_manifest(directory, iteration, counts)
    return counts


def load_problems(path: str | Path) -> list[ProblemInstance]:
    """Load a task file: one JSON record per line with id/question/gold/task_kind."""
    problems: list[ProblemInstance] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            try:
                problems.append(
                    ProblemInstance(
                        problem_id=str(record["id"]),
                        question=record["question"],
                        gold_answer=str(record["gold"]),
                        task_kind=TaskKind(record.get("task_kind", "yes-no-maybe")),
                        context=record.get("context"),
                    )
                )
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc}") from exc
    return problems


def mark_augmented(step: StepRecord) -> StepRecord:
    return replace(step, provenance=Provenance.AUGMENTED)
