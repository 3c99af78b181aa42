"""Communication graphs and single-problem execution.

A pipeline is a DAG of agents. Each agent's prompt is rendered from the
problem plus the outputs of exactly its predecessors, and agents run once
each in topological order. The actor-critic control loop (answer, judge,
critique, regenerate) lives here too since it is an execution topology,
just not a pure feed-forward one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .backends import Runtime
from .core import (
    AgentSpec,
    ProblemInstance,
    TaskKind,
    extract_final_answer,
    normalize_gold,
    render_prompt,
)
from .errors import AnswerNotFound, CycleDetected, DanglingEdge, UnknownAgent
from .experience import Setting, StepRecord, Trajectory
from . import prompts

log = logging.getLogger(__name__)

# Binding sources: what each placeholder of a node's turn template is fed
# from. "question"/"context" come from the problem, "format" is the
# answer-format instruction for the task kind, and "output:<agent>" is a
# predecessor's output.
SOURCE_QUESTION = "question"
SOURCE_CONTEXT = "context"
SOURCE_FORMAT = "format"
OUTPUT_PREFIX = "output:"


@dataclass(frozen=True)
class CommGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    # node -> placeholder name -> binding source
    bindings: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    def terminal_nodes(self) -> list[str]:
        sources = {src for src, _ in self.edges}
        return [n for n in self.nodes if n not in sources]


def validate_graph(graph: CommGraph) -> None:
    """Raise unless the graph is acyclic, edge-consistent, and binding-consistent."""
    nodes = set(graph.nodes)
    for edge in graph.edges:
        if edge[0] not in nodes or edge[1] not in nodes:
            raise DanglingEdge(edge)

    # Kahn's algorithm; whatever remains when no zero-indegree node is left
    # lies on a cycle, and a directed walk inside it recovers a cycle path.
    indegree = {n: 0 for n in graph.nodes}
    for _, dst in graph.edges:
        indegree[dst] += 1
    ready = [n for n in graph.nodes if indegree[n] == 0]
    visited = 0
    while ready:
        node = ready.pop()
        visited += 1
        for src, dst in graph.edges:
            if src == node:
                indegree[dst] -= 1
                if indegree[dst] == 0:
                    ready.append(dst)
    if visited != len(graph.nodes):
        remaining = {n for n in graph.nodes if indegree[n] > 0}
        path = [next(iter(sorted(remaining)))]
        while True:
            successors = [d for s, d in graph.edges if s == path[-1] and d in remaining]
            nxt = sorted(successors)[0]
            if nxt in path:
                path.append(nxt)
                raise CycleDetected(path[path.index(nxt):])
            path.append(nxt)

    # Bindings must reference the node's predecessors exactly: this is what
    # guarantees an agent sees all of Pre(it) and nothing else.
    for node, binding in graph.bindings.items():
        if node not in nodes:
            raise UnknownAgent(node)
        referenced = {
            src[len(OUTPUT_PREFIX):] for src in binding.values() if src.startswith(OUTPUT_PREFIX)
        }
        expected = predecessors(graph, node)
        if referenced != expected:
            raise DanglingEdge(
                (node, f"bindings reference {sorted(referenced)}, predecessors are {sorted(expected)}")
            )


def predecessors(graph: CommGraph, agent_id: str) -> set[str]:
    if agent_id not in graph.nodes:
        raise UnknownAgent(agent_id)
    return {src for src, dst in graph.edges if dst == agent_id}


def successors_closure(graph: CommGraph, agent_id: str) -> set[str]:
    """All strict descendants of ``agent_id`` (reachable via one or more edges)."""
    if agent_id not in graph.nodes:
        raise UnknownAgent(agent_id)
    closure: set[str] = set()
    frontier = [agent_id]
    while frontier:
        current = frontier.pop()
        for src, dst in graph.edges:
            if src == current and dst not in closure:
                closure.add(dst)
                frontier.append(dst)
    return closure


def topological_order(graph: CommGraph) -> list[str]:
    """Deterministic topological order (declaration order breaks ties)."""
    indegree = {n: 0 for n in graph.nodes}
    for _, dst in graph.edges:
        indegree[dst] += 1
    order: list[str] = []
    remaining = list(graph.nodes)
    while remaining:
        node = next(n for n in remaining if indegree[n] == 0)
        remaining.remove(node)
        order.append(node)
        for src, dst in graph.edges:
            if src == node:
                indegree[dst] -= 1
    return order


def resolve_bindings(
    binding: Mapping[str, str],
    problem: ProblemInstance,
    outputs: Mapping[str, str],
) -> dict[str, str]:
    resolved: dict[str, str] = {}
    for placeholder, source in binding.items():
        if source == SOURCE_QUESTION:
            resolved[placeholder] = problem.question
        elif source == SOURCE_CONTEXT:
            resolved[placeholder] = problem.context or ""
        elif source == SOURCE_FORMAT:
            resolved[placeholder] = prompts.FORMAT_PROMPTS.get(problem.task_kind, "")
        elif source.startswith(OUTPUT_PREFIX):
            resolved[placeholder] = outputs[source[len(OUTPUT_PREFIX):]]
        else:
            raise ValueError(f"unknown binding source {source!r}")
    return resolved


def execute_pipeline(
    graph: CommGraph,
    agents: Mapping[str, AgentSpec],
    problem: ProblemInstance,
    runtime: Runtime,
    iteration: int = 0,
) -> Trajectory:
    """Run one problem through the DAG; one step per agent, topological order.

    A terminal output without an answer marker yields an unanswered
    trajectory (scored 0), not a failure.
    """
    validate_graph(graph)
    for node in graph.nodes:
        if node not in agents:
            raise UnknownAgent(node)
    terminals = graph.terminal_nodes()
    if len(terminals) != 1:
        raise DanglingEdge((terminals and terminals[0] or "?", "pipeline needs exactly one terminal node"))

    outputs: dict[str, str] = {}
    steps: list[StepRecord] = []
    for node in topological_order(graph):
        spec = agents[node]
        bound = resolve_bindings(graph.bindings.get(node, {}), problem, outputs)
        prompt = render_prompt(spec.turn_template, bound)
        output = runtime.ask(spec, prompt)
        outputs[node] = output
        steps.append(StepRecord(node, prompt, output, iteration=iteration))

    trajectory = Trajectory(problem_id=problem.problem_id, steps=steps)
    try:
        trajectory.final_answer = extract_final_answer(outputs[terminals[0]], problem.task_kind)
    except AnswerNotFound:
        trajectory.final_answer = None
    if problem.gold_answer:
        gold = normalize_gold(problem.gold_answer, problem.task_kind)
        trajectory.correct = trajectory.final_answer == gold
    return trajectory


@dataclass
class PipelineState:
    """Problem plus transcript view of a finished (or partial) run."""

    problem: ProblemInstance
    transcript: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def from_trajectory(cls, problem: ProblemInstance, trajectory: Trajectory) -> "PipelineState":
        return cls(problem, [(s.agent_id, s.output) for s in trajectory.steps])


# --- actor-critic control loop ------------------------------------------------


@dataclass
class ActorCriticTrace:
    actor_id: str
    judgment_id: str
    critic_id: str
    actor_answer: Optional[str]
    judgment_verdict: bool
    critic_feedback: Optional[str] = None
    regenerated_answer: Optional[str] = None
    final_answer: Optional[str] = None
    events: list[str] = field(default_factory=list)


def run_actor_critic(
    agents: Mapping[str, AgentSpec],
    problem: ProblemInstance,
    runtime: Runtime,
    feedback_rounds: int = 1,
    iteration: int = 0,
) -> Trajectory:
    """Answer, judge, and (on a False verdict) critique-and-regenerate.

    The critic never sees the gold answer. An unparsable judgment is treated
    as a False verdict so the correction path still runs; the event is
    recorded on the trace.
    """
    for role in ("actor", "judgment", "critic"):
        if role not in agents:
            raise UnknownAgent(role)
    actor, judgment, critic = agents["actor"], agents["judgment"], agents["critic"]
    base = {"context": problem.context or "", "question": problem.question}
    fmt = prompts.FORMAT_PROMPTS.get(problem.task_kind, "")
    events: list[str] = []
    steps: list[StepRecord] = []

    actor_prompt = render_prompt(actor.turn_template, {**base, "format_prompt": fmt})
    actor_out = runtime.ask(actor, actor_prompt)
    steps.append(StepRecord(actor.agent_id, actor_prompt, actor_out, iteration=iteration))
    try:
        actor_answer = extract_final_answer(actor_out, problem.task_kind)
    except AnswerNotFound:
        actor_answer = None
        events.append("actor output had no answer marker")

    judgment_prompt = render_prompt(
        judgment.turn_template, {**base, "original_response": actor_out}
    )
    judgment_out = runtime.ask(judgment, judgment_prompt)
    steps.append(StepRecord(judgment.agent_id, judgment_prompt, judgment_out, iteration=iteration))
    try:
        verdict = bool(extract_final_answer(judgment_out, TaskKind.JUDGMENT))
    except AnswerNotFound:
        verdict = False
        events.append("judgment output unparsable; treated as False")
        log.warning("judgment output unparsable for %s; treating as False", problem.problem_id)

    critic_feedback: Optional[str] = None
    regenerated_answer: Optional[str] = None
    final_answer = actor_answer
    current_out = actor_out
    if not verdict:
        regen_template = actor.regenerate_template or prompts.ACTOR_REGENERATE_TURN
        for _ in range(max(1, feedback_rounds)):
            critic_prompt = render_prompt(
                critic.turn_template, {**base, "original_response": current_out}
            )
            critic_feedback = runtime.ask(critic, critic_prompt)
            steps.append(
                StepRecord(critic.agent_id, critic_prompt, critic_feedback, iteration=iteration)
            )
            regen_prompt = render_prompt(
                regen_template,
                {
                    **base,
                    "original_response": current_out,
                    "feedback": critic_feedback,
                    "format_prompt": fmt,
                },
            )
            current_out = runtime.ask(actor, regen_prompt)
            steps.append(StepRecord(actor.agent_id, regen_prompt, current_out, iteration=iteration))
            try:
                regenerated_answer = extract_final_answer(current_out, problem.task_kind)
            except AnswerNotFound:
                regenerated_answer = None
                events.append("regenerated output had no answer marker")
            final_answer = regenerated_answer

    trace = ActorCriticTrace(
        actor_id=actor.agent_id,
        judgment_id=judgment.agent_id,
        critic_id=critic.agent_id,
        actor_answer=actor_answer,
        judgment_verdict=verdict,
        critic_feedback=critic_feedback,
        regenerated_answer=regenerated_answer,
        final_answer=final_answer,
        events=events,
    )
    trajectory = Trajectory(
        problem_id=problem.problem_id,
        steps=steps,
        final_answer=final_answer,
        actor_critic=trace,
    )
    if problem.gold_answer:
        gold = normalize_gold(problem.gold_answer, problem.task_kind)
        trajectory.correct = final_answer == gold
    return trajectory


# --- presets -------------------------------------------------------------------


@dataclass(frozen=True)
class TopologyPreset:
    name: str
    setting: Setting
    agents: dict[str, AgentSpec]
    graph: Optional[CommGraph] = None


def _expert_chain(
    name: str,
    expert_id: str,
    expert_role: str,
    system: str,
    expert_turn: str,
    math_turn: str,
    sum_turn: str,
) -> TopologyPreset:
    agents = {
        expert_id: AgentSpec(expert_id, expert_role, system, expert_turn),
        "mathematician": AgentSpec("mathematician", "Mathematician", system, math_turn),
        "summarizer": AgentSpec("summarizer", "Final Answer Synthesizer", system, sum_turn),
    }
    graph = CommGraph(
        nodes=(expert_id, "mathematician", "summarizer"),
        edges=frozenset(
            {
                (expert_id, "mathematician"),
                (expert_id, "summarizer"),
                ("mathematician", "summarizer"),
            }
        ),
        bindings={
            expert_id: {"question": SOURCE_QUESTION},
            "mathematician": {
                "question": SOURCE_QUESTION,
                "agent_1_response": OUTPUT_PREFIX + expert_id,
            },
            "summarizer": {
                "question": SOURCE_QUESTION,
                "agent_1_response": OUTPUT_PREFIX + expert_id,
                "agent_2_response": OUTPUT_PREFIX + "mathematician",
                "format_prompt": SOURCE_FORMAT,
            },
        },
    )
    return TopologyPreset(name, Setting.PROBLEM_SOLVING, agents, graph)


def _analyst_solver() -> TopologyPreset:
    system = prompts.EVIDENCE_TEAM_SYSTEM
    agents = {
        "analyst": AgentSpec("analyst", "Context Analyst", system, prompts.ANALYST_TURN),
        "solver": AgentSpec("solver", "Problem Solver", system, prompts.SOLVER_TURN),
    }
    graph = CommGraph(
        nodes=("analyst", "solver"),
        edges=frozenset({("analyst", "solver")}),
        bindings={
            "analyst": {"context": SOURCE_CONTEXT},
            "solver": {
                "question": SOURCE_QUESTION,
                "agent_1_response": OUTPUT_PREFIX + "analyst",
                "format_prompt": SOURCE_FORMAT,
            },
        },
    )
    return TopologyPreset("analyst-solver", Setting.PROBLEM_SOLVING, agents, graph)


def _actor_critic() -> TopologyPreset:
    agents = {
        "actor": AgentSpec(
            "actor",
            "Actor",
            prompts.ACTOR_SYSTEM,
            prompts.ACTOR_TURN,
            regenerate_template=prompts.ACTOR_REGENERATE_TURN,
        ),
        "judgment": AgentSpec("judgment", "Judgment", prompts.JUDGMENT_SYSTEM, prompts.JUDGMENT_TURN),
        "critic": AgentSpec("critic", "Critic", prompts.CRITIC_SYSTEM, prompts.CRITIC_TURN),
    }
    return TopologyPreset("actor-critic", Setting.ACTOR_CRITIC, agents, graph=None)


def build_preset(name: str) -> TopologyPreset:
    """Topology presets selectable by name in run configurations."""
    if name == "expert-chain-physics":
        return _expert_chain(
            name,
            "physicist",
            "Physicist",
            prompts.PHYSICS_TEAM_SYSTEM,
            prompts.PHYSICIST_TURN,
            prompts.MATHEMATICIAN_TURN_PHYSICS,
            prompts.SUMMARIZER_TURN_PHYSICS,
        )
    if name == "expert-chain-chemistry":
        return _expert_chain(
            name,
            "chemist",
            "Chemist",
            prompts.CHEMISTRY_TEAM_SYSTEM,
            prompts.CHEMIST_TURN,
            prompts.MATHEMATICIAN_TURN_CHEMISTRY,
            prompts.SUMMARIZER_TURN_CHEMISTRY,
        )
    if name == "analyst-solver":
        return _analyst_solver()
    if name == "actor-critic":
        return _actor_critic()
    raise ValueError(f"unknown topology preset {name!r}")


PRESET_NAMES = (
    "expert-chain-physics",
    "expert-chain-chemistry",
    "analyst-solver",
    "actor-critic",
)
