"""The outer fine-tuning loop: sample, filter, augment, export, fine-tune.

Each iteration runs every training problem with the previous iteration's
models, harvests reward-filtered examples (augmenting what failed), exports
per-agent datasets, and submits fine-tune jobs. Registry entries for an
iteration are written only when every job is terminal, and all at once, so
a killed run can resume from its checkpoint without divergence.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol

import requests

from .augmentation import AugmentBudgets, AugmentationNote, augment_trajectory, default_rephraser
from .backends import Runtime, ScriptedBackend, ScriptEntry, RemoteChatBackend
from .core import AgentSpec, BackendKind, Decoding, ModelRef, normalize_gold
from .errors import ConfigError, EmptyDataset, IterationHalted
from .experience import (
    ExperienceLibrary,
    Provenance,
    RewardConfig,
    Setting,
    Trajectory,
    TrainingExample,
    evaluate_rewards,
    filter_good,
    load_problems,
    save_library,
)
from .topology import TopologyPreset, build_preset, execute_pipeline, run_actor_critic
from . import prompts

log = logging.getLogger(__name__)

POOLED_AGENT = "pooled"


# --- configuration ---------------------------------------------------------------


@dataclass
class RunConfig:
    topology: str
    tasks: str
    iterations: int = 1
    epsilon: float = 0.5
    budgets: AugmentBudgets = field(default_factory=AugmentBudgets)
    feedback_rounds: int = 1
    provider: dict = field(default_factory=lambda: {"kind": "null"})
    workers: int = 1
    pooled: bool = False
    backend: dict = field(default_factory=lambda: {"kind": "scripted", "scripts": {}})
    models: dict[str, str] = field(default_factory=dict)
    decoding: Decoding = field(default_factory=Decoding)
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            budgets = AugmentBudgets(
                max_sol=raw.get("max_sol", 3),
                max_f=raw.get("max_f", 2),
                max_re=raw.get("max_re", 2),
            )
            decoding_raw = raw.get("decoding", {})
            provider = raw.get("provider", "null")
            if isinstance(provider, str):
                provider = {"kind": provider}
            return cls(
                topology=raw["topology"],
                tasks=raw["tasks"],
                iterations=raw.get("iterations", 1),
                epsilon=raw.get("epsilon", 0.5),
                budgets=budgets,
                feedback_rounds=raw.get("feedback_rounds", 1),
                provider=provider,
                workers=raw.get("workers", 1),
                pooled=raw.get("pooled", False),
                backend=raw.get("backend", {"kind": "scripted", "scripts": {}}),
                models=dict(raw.get("models", {})),
                decoding=Decoding(
                    temperature=decoding_raw.get("temperature", 0.0),
                    max_tokens=decoding_raw.get("max_tokens", 1024),
                ),
                seed=raw.get("seed", 0),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        cfg = cls.from_dict(raw)
        # Task paths are resolved relative to the config file.
        tasks = Path(cfg.tasks)
        if not tasks.is_absolute():
            cfg.tasks = str(path.parent / tasks)
        return cfg


def build_runtime(cfg: RunConfig) -> Runtime:
    backends: dict[BackendKind, object] = {}
    kind = cfg.backend.get("kind", "scripted")
    if kind == "scripted":
        scripted = ScriptedBackend()
        for agent_id, entries in cfg.backend.get("scripts", {}).items():
            for entry in entries:
                if isinstance(entry, str):
                    scripted.push(agent_id, entry)
                    continue
                repeat = int(entry.get("repeat", 1))
                scripted.push_entries(
                    agent_id,
                    [ScriptEntry(entry["text"], entry.get("expect"))] * repeat,
                )
        backends[BackendKind.SCRIPTED] = scripted
    elif kind == "remote-chat":
        backends[BackendKind.REMOTE_CHAT] = RemoteChatBackend(
            base_url=cfg.backend.get("base_url"),
            api_key=cfg.backend.get("api_key"),
        )
    else:
        raise ConfigError(f"unknown backend kind {kind!r}")
    return Runtime(backends=backends)


def _backend_kind(cfg: RunConfig) -> BackendKind:
    return (
        BackendKind.SCRIPTED
        if cfg.backend.get("kind", "scripted") == "scripted"
        else BackendKind.REMOTE_CHAT
    )


# --- model registry ---------------------------------------------------------------


class ModelRegistry:
    """Immutable (iteration, agent) -> model map with atomic persistence."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self._entries: dict[int, dict[str, ModelRef]] = {}

    def has_iteration(self, iteration: int) -> bool:
        return iteration in self._entries

    def model_for(self, iteration: int, agent_id: str) -> ModelRef:
        try:
            return self._entries[iteration][agent_id]
        except KeyError as exc:
            raise KeyError(f"no registry entry for iteration {iteration}, agent {agent_id}") from exc

    def agents(self, iteration: int) -> list[str]:
        return sorted(self._entries.get(iteration, {}))

    def set_iteration(self, iteration: int, models: dict[str, ModelRef]) -> None:
        """Write one iteration's entries, all at once; existing entries are immutable."""
        if iteration in self._entries:
            raise ValueError(f"registry entries for iteration {iteration} already exist")
        self._entries[iteration] = dict(models)
        if self.path is not None:
            self.save()

    def complete_through(self, iteration: int) -> bool:
        if not self._entries:
            return False
        agents = set(self._entries.get(0, {}))
        return all(
            set(self._entries.get(t, {})) == agents and bool(agents)
            for t in range(iteration + 1)
        )

    def to_dict(self) -> dict:
        return {
            str(t): {
                agent: {
                    "backend": ref.backend_kind.value,
                    "model": ref.model_name,
                    "temperature": ref.decoding.temperature,
                    "max_tokens": ref.decoding.max_tokens,
                }
                for agent, ref in entries.items()
            }
            for t, entries in self._entries.items()
        }

    def save(self) -> None:
        assert self.path is not None
        _atomic_write_json(self.path, self.to_dict())

    @classmethod
    def load(cls, path: Path) -> "ModelRegistry":
        registry = cls(path)
        if path.exists():
            raw = json.loads(path.read_text(encoding="utf-8"))
            for t, entries in raw.items():
                registry._entries[int(t)] = {
                    agent: ModelRef(
                        BackendKind(info["backend"]),
                        info["model"],
                        Decoding(info.get("temperature", 0.0), info.get("max_tokens", 1024)),
                    )
                    for agent, info in entries.items()
                }
        return registry


def _atomic_write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- fine-tune providers --------------------------------------------------------------


class JobStatus(str, Enum):
    SUBMITTED = "submitted"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


@dataclass
class FineTuneJob:
    agent_id: str
    dataset_path: str
    base_model: str
    status: JobStatus = JobStatus.SUBMITTED
    resulting_model: Optional[str] = None
    message: str = ""


class FineTuneProvider(Protocol):
    def run(self, job: FineTuneJob) -> FineTuneJob: ...


class NullProvider:
    """Dry-run provider: succeeds immediately and keeps the base model."""

    def run(self, job: FineTuneJob) -> FineTuneJob:
        return replace(job, status=JobStatus.SUCCEEDED, resulting_model=job.base_model)


class RecordedProvider:
    """Replays canned outcomes in submission order."""

    def __init__(self, outcomes: list[dict]):
        self._outcomes = list(outcomes)
        self._cursor = 0

    def run(self, job: FineTuneJob) -> FineTuneJob:
        if self._cursor >= len(self._outcomes):
            raise IterationHalted("recorded provider has no outcome for this submission")
        outcome = self._outcomes[self._cursor]
        self._cursor += 1
        status = JobStatus(outcome.get("status", "succeeded"))
        model = outcome.get("model", job.base_model)
        return replace(
            job,
            status=status,
            resulting_model=model if status is JobStatus.SUCCEEDED else None,
            message=outcome.get("message", ""),
        )


class RemoteProvider:
    """Uploads the dataset and polls the fine-tuning job until terminal."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        poll_seconds: float = 5.0,
        timeout_seconds: float = 3600.0,
    ):
        self.base_url = (base_url or os.getenv("API_BASE_URL", "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.getenv("API_KEY", "")
        self.poll_seconds = poll_seconds
        self.timeout_seconds = timeout_seconds
        if not self.base_url:
            raise ConfigError("remote fine-tuning needs API_BASE_URL")

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}

    def run(self, job: FineTuneJob) -> FineTuneJob:
        with open(job.dataset_path, "rb") as fh:
            upload = requests.post(
                f"{self.base_url}/files",
                files={"file": (Path(job.dataset_path).name, fh)},
                data={"purpose": "fine-tune"},
                headers=self._headers(),
                timeout=120,
            )
        upload.raise_for_status()
        file_id = upload.json()["id"]
        created = requests.post(
            f"{self.base_url}/fine_tuning/jobs",
            json={"training_file": file_id, "model": job.base_model},
            headers=self._headers(),
            timeout=60,
        )
        created.raise_for_status()
        job_id = created.json()["id"]
        deadline = time.monotonic() + self.timeout_seconds
        while time.monotonic() < deadline:
            status_resp = requests.get(
                f"{self.base_url}/fine_tuning/jobs/{job_id}",
                headers=self._headers(),
                timeout=60,
            )
            status_resp.raise_for_status()
            body = status_resp.json()
            if body.get("status") == "succeeded":
                return replace(
                    job, status=JobStatus.SUCCEEDED, resulting_model=body["fine_tuned_model"]
                )
            if body.get("status") in ("failed", "cancelled"):
                return replace(job, status=JobStatus.FAILED, message=str(body.get("error", "")))
            time.sleep(self.poll_seconds)
        return replace(job, status=JobStatus.FAILED, message="fine-tune polling timed out")


def build_provider(spec: dict) -> FineTuneProvider:
    kind = spec.get("kind", "null")
    if kind == "null":
        return NullProvider()
    if kind == "recorded":
        return RecordedProvider(spec.get("outcomes", []))
    if kind == "remote":
        return RemoteProvider(base_url=spec.get("base_url"), api_key=spec.get("api_key"))
    raise ConfigError(f"unknown fine-tune provider {kind!r}")


def submit_finetune(provider: FineTuneProvider, job: FineTuneJob) -> FineTuneJob:
    """Validate and run one fine-tune job to a terminal status."""
    path = Path(job.dataset_path)
    if not path.exists():
        raise EmptyDataset(f"dataset file does not exist: {path}")
    with path.open("r", encoding="utf-8") as fh:
        if not any(line.strip() for line in fh):
            raise EmptyDataset(f"dataset has no records: {path}")
    return provider.run(job)


# --- iteration driver ---------------------------------------------------------------


@dataclass
class AgentReport:
    direct: int = 0
    augmented: int = 0
    unsolved: int = 0


@dataclass
class IterationReport:
    iteration: int
    problems: int
    agents: dict[str, AgentReport] = field(default_factory=dict)
    resumed: bool = False

    def to_record(self) -> dict:
        return {
            "iteration": self.iteration,
            "problems": self.problems,
            "resumed": self.resumed,
            "agents": {
                agent: {"direct": r.direct, "augmented": r.augmented, "unsolved": r.unsolved}
                for agent, r in self.agents.items()
            },
        }


def _iteration_dir(out_dir: Path, iteration: int) -> Path:
    return out_dir / f"iter_{iteration:03d}"


def _solve_problem(
    preset: TopologyPreset,
    agents: dict[str, AgentSpec],
    problem,
    runtime: Runtime,
    cfg: RunConfig,
    iteration: int,
) -> Trajectory:
    attempts = cfg.budgets.max_sol if cfg.decoding.temperature > 0 else 1
    trajectory: Trajectory
    for attempt in range(attempts):
        if preset.setting is Setting.ACTOR_CRITIC:
            trajectory = run_actor_critic(
                agents, problem, runtime, feedback_rounds=cfg.feedback_rounds, iteration=iteration
            )
        else:
            trajectory = execute_pipeline(preset.graph, agents, problem, runtime, iteration)
        if trajectory.correct:
            break
    return trajectory


def run_iteration(
    cfg: RunConfig,
    registry: ModelRegistry,
    iteration: int,
    runtime: Runtime,
    out_dir: str | Path,
    stop_after: Optional[str] = None,
) -> IterationReport:
    """One full iteration; see the module docstring for the phase order.

    ``stop_after="export"`` ends the iteration after datasets and checkpoint
    are on disk, simulating a crash before fine-tuning.
    """
    out_dir = Path(out_dir)
    iter_dir = _iteration_dir(out_dir, iteration)
    checkpoint_path = iter_dir / "checkpoint.json"
    datasets_dir = iter_dir / "datasets"
    if not registry.complete_through(iteration - 1):
        raise ConfigError(f"registry is not complete through iteration {iteration - 1}")

    preset = build_preset(cfg.topology)
    agents = {
        agent_id: spec.with_model(registry.model_for(iteration - 1, agent_id))
        for agent_id, spec in preset.agents.items()
    }
    problems = load_problems(cfg.tasks)
    report = IterationReport(iteration=iteration, problems=len(problems))

    checkpoint = _read_checkpoint(checkpoint_path)
    if checkpoint.get("phase") == "exported":
        log.info("iteration %d resuming from exported checkpoint", iteration)
        report.resumed = True
        manifest = json.loads((datasets_dir / "manifest.json").read_text(encoding="utf-8"))
        for agent_id, info in manifest["agents"].items():
            report.agents[agent_id] = AgentReport(
                direct=info["direct"],
                augmented=info["augmented"],
                unsolved=len(problems) - info["direct"] - info["augmented"],
            )
        _finetune_and_register(cfg, registry, iteration, agents, datasets_dir)
        _write_checkpoint(checkpoint_path, {"phase": "completed"})
        _atomic_write_json(iter_dir / "report.json", report.to_record())
        return report

    reward_cfg = RewardConfig(setting=preset.setting, epsilon=cfg.epsilon)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            trajectories = list(
                pool.map(
                    lambda p: _solve_problem(preset, agents, p, runtime, cfg, iteration), problems
                )
            )
    else:
        trajectories = [
            _solve_problem(preset, agents, p, runtime, cfg, iteration) for p in problems
        ]
    for trajectory, problem in zip(trajectories, problems):
        trajectory.rewards = evaluate_rewards(trajectory, problem, reward_cfg)

    library = ExperienceLibrary()
    for agent_id, spec in agents.items():
        library.extend(
            iteration,
            filter_good(trajectories, agent_id, cfg.epsilon, system_prompt=spec.system_prompt),
        )

    notes: list[AugmentationNote] = []
    if preset.setting is Setting.PROBLEM_SOLVING:
        ext = AgentSpec(
            "feedback",
            "Feedback",
            prompts.FEEDBACK_SYSTEM,
            prompts.FEEDBACK_TURN,
            model_ref=ModelRef(_backend_kind(cfg), cfg.models.get("feedback", "base"), cfg.decoding),
        )
        rephraser = default_rephraser(
            ModelRef(_backend_kind(cfg), cfg.models.get("rephraser", "base"), cfg.decoding)
        )
        for trajectory, problem in zip(trajectories, problems):
            if trajectory.correct:
                continue
            note = augment_trajectory(
                preset.graph,
                agents,
                ext,
                problem,
                trajectory,
                cfg.budgets,
                runtime,
                rephraser=rephraser,
                iteration=iteration,
            )
            if note is None:
                continue
            notes.append(note)
            for step in note.example_steps:
                library.add(
                    iteration,
                    TrainingExample(
                        agent_id=step.agent_id,
                        system=agents[step.agent_id].system_prompt,
                        user=step.rendered_prompt,
                        assistant=step.output,
                        provenance=Provenance.AUGMENTED,
                        problem_id=problem.problem_id,
                    ),
                )

    for agent_id in agents:
        examples = library.examples(iteration, agent_id)
        direct = sum(1 for ex in examples if ex.provenance is Provenance.DIRECT)
        augmented = sum(1 for ex in examples if ex.provenance is Provenance.AUGMENTED)
        report.agents[agent_id] = AgentReport(
            direct=direct, augmented=augmented, unsolved=len(problems) - direct - augmented
        )

    datasets_dir.mkdir(parents=True, exist_ok=True)
    if cfg.pooled:
        _export_pooled(library, iteration, agents, datasets_dir)
    else:
        save_library(library, datasets_dir, iteration)
    with (iter_dir / "notes.jsonl").open("w", encoding="utf-8") as fh:
        for note in notes:
            fh.write(json.dumps(note.to_record(), ensure_ascii=False) + "\n")
    _write_checkpoint(checkpoint_path, {"phase": "exported"})
    if stop_after == "export":
        log.info("iteration %d stopped after export (requested)", iteration)
        return report

    _finetune_and_register(cfg, registry, iteration, agents, datasets_dir)
    _write_checkpoint(checkpoint_path, {"phase": "completed"})
    _atomic_write_json(iter_dir / "report.json", report.to_record())
    return report


def _export_pooled(
    library: ExperienceLibrary,
    iteration: int,
    agents: dict[str, AgentSpec],
    datasets_dir: Path,
) -> None:
    # Single-model ablation: all roles' examples in one dataset.
    pooled = ExperienceLibrary()
    for agent_id in agents:
        for example in library.examples(iteration, agent_id):
            pooled.add(iteration, replace(example, agent_id=POOLED_AGENT))
    save_library(pooled, datasets_dir, iteration)


def _finetune_and_register(
    cfg: RunConfig,
    registry: ModelRegistry,
    iteration: int,
    agents: dict[str, AgentSpec],
    datasets_dir: Path,
) -> None:
    provider = build_provider(cfg.provider)
    backend_kind = _backend_kind(cfg)
    new_models: dict[str, ModelRef] = {}
    job_agents = [POOLED_AGENT] if cfg.pooled else sorted(agents)
    results: dict[str, str] = {}
    for agent_id in job_agents:
        base_ref = (
            agents[sorted(agents)[0]].model_ref if cfg.pooled else agents[agent_id].model_ref
        )
        dataset = datasets_dir / f"{agent_id}.jsonl"
        if not dataset.exists() or dataset.stat().st_size == 0:
            # Nothing to train on: the model rolls forward unchanged.
            log.warning("no training data for %s at iteration %d", agent_id, iteration)
            results[agent_id] = base_ref.model_name
            continue
        job = submit_finetune(
            provider,
            FineTuneJob(
                agent_id=agent_id, dataset_path=str(dataset), base_model=base_ref.model_name
            ),
        )
        if job.status is not JobStatus.SUCCEEDED:
            raise IterationHalted(
                f"fine-tune for {agent_id} ended {job.status.value}: {job.message}"
            )
        results[agent_id] = job.resulting_model or base_ref.model_name

    for agent_id, spec in agents.items():
        model_name = results[POOLED_AGENT] if cfg.pooled else results[agent_id]
        new_models[agent_id] = ModelRef(backend_kind, model_name, cfg.decoding)
    registry.set_iteration(iteration, new_models)


def _read_checkpoint(path: Path) -> dict:
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return {}


def _write_checkpoint(path: Path, payload: dict) -> None:
    _atomic_write_json(path, payload)


def run_pipeline(
    cfg: RunConfig,
    out_dir: str | Path,
    runtime: Optional[Runtime] = None,
    stop_after: Optional[str] = None,
) -> list[IterationReport]:
    """Run (or resume) all configured iterations under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runtime = runtime or build_runtime(cfg)
    registry = ModelRegistry.load(out_dir / "registry.json")
    if not registry.has_iteration(0):
        preset = build_preset(cfg.topology)
        backend_kind = _backend_kind(cfg)
        registry.set_iteration(
            0,
            {
                agent_id: ModelRef(backend_kind, cfg.models.get(agent_id, "base"), cfg.decoding)
                for agent_id in preset.agents
            },
        )
    reports: list[IterationReport] = []
    for t in range(1, cfg.iterations + 1):
        if registry.has_iteration(t):
            log.info("iteration %d already registered; skipping", t)
            continue
        reports.append(run_iteration(cfg, registry, t, runtime, out_dir, stop_after=stop_after))
        if stop_after is not None:
            break
    return reports


# --- evaluation --------------------------------------------------------------------


@dataclass
class EvalResult:
    problems: int
    correct: int
    tp: Optional[int] = None  # actor-critic only

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.problems if self.problems else 0.0

    @property
    def tp_accuracy(self) -> Optional[float]:
        if self.tp is None:
            return None
        return 100.0 * self.tp / self.problems if self.problems else 0.0


def evaluate_registry(
    cfg: RunConfig,
    registry: ModelRegistry,
    iteration: int,
    runtime: Runtime,
    tasks_path: Optional[str] = None,
) -> EvalResult:
    """Score one registry iteration on a held-out task file.

    For actor-critic, also counts true positives: problems whose initial
    answer was correct and judged True.
    """
    preset = build_preset(cfg.topology)
    agents = {
        agent_id: spec.with_model(registry.model_for(iteration, agent_id))
        for agent_id, spec in preset.agents.items()
    }
    problems = load_problems(tasks_path or cfg.tasks)
    correct = 0
    tp: Optional[int] = 0 if preset.setting is Setting.ACTOR_CRITIC else None
    for problem in problems:
        if preset.setting is Setting.ACTOR_CRITIC:
            trajectory = run_actor_critic(
                agents, problem, runtime, feedback_rounds=cfg.feedback_rounds
            )
            trace = trajectory.actor_critic
            gold = normalize_gold(problem.gold_answer, problem.task_kind)
            if trace.actor_answer == gold and trace.judgment_verdict:
                tp += 1
        else:
            trajectory = execute_pipeline(preset.graph, agents, problem, runtime)
        if trajectory.correct:
            correct += 1
    return EvalResult(problems=len(problems), correct=correct, tp=tp)
