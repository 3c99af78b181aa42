"""Turning failed trajectories into training data.

For a failed problem: an external agent that can see the gold answer writes
feedback, the selected agent redoes its step, everything downstream of it
re-executes on the regenerated output, and the result is verified against
gold. Accepted outputs are rephrased so they read as direct solutions before
entering the library. Feedback and regeneration tries are budgeted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .backends import Runtime
from .core import AgentSpec, ProblemInstance, extract_final_answer, normalize_gold, placeholders_in, render_prompt
from .errors import AnswerNotFound, EmptyFeedback, UnknownAgent
from .experience import Provenance, StepRecord, Trajectory
from .topology import (
    CommGraph,
    predecessors,
    resolve_bindings,
    successors_closure,
    topological_order,
)
from . import prompts

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentBudgets:
    max_sol: int = 3
    max_f: int = 2
    max_re: int = 2

    def __post_init__(self):
        if min(self.max_sol, self.max_f, self.max_re) < 1:
            raise ValueError("augmentation budgets must all be >= 1")


@dataclass
class AugmentationNote:
    """Audit record of one successful augmentation."""

    target_agent: str
    feedback: str
    regenerated_output: str
    rephrased_output: str
    attempts: tuple[int, int]  # (feedback tries, regeneration tries)
    problem_id: str = ""
    # Rephrased steps for the target and every re-executed downstream agent,
    # ready to enter the library as augmented examples.
    example_steps: list[StepRecord] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "target_agent": self.target_agent,
            "feedback": self.feedback,
            "regenerated_output": self.regenerated_output,
            "rephrased_output": self.rephrased_output,
            "attempts": {"feedback": self.attempts[0], "regeneration": self.attempts[1]},
            "example_agents": [s.agent_id for s in self.example_steps],
        }


def default_rephraser(model_ref=None) -> AgentSpec:
    spec = AgentSpec("rephraser", "Rephraser", prompts.REPHRASE_SYSTEM, prompts.REPHRASE_TURN)
    return spec if model_ref is None else spec.with_model(model_ref)


def _render_filtered(template: str, bindings: Mapping[str, str]) -> str:
    # Drop surplus bindings so render_prompt does not warn about them; which
    # placeholders a template uses varies by agent.
    needed = set(placeholders_in(template))
    return render_prompt(template, {k: v for k, v in bindings.items() if k in needed})


def generate_feedback(
    ext: AgentSpec,
    problem: ProblemInstance,
    original_output: str,
    gold: str,
    runtime: Runtime,
) -> str:
    """Gold-grounded feedback on a failed step, written by the external agent."""
    prompt = _render_filtered(
        ext.turn_template or prompts.FEEDBACK_TURN,
        {
            "question": problem.question,
            "context": problem.context or "",
            "original_response": original_output,
            "gold_answer": gold,
        },
    )
    feedback = runtime.ask(ext, prompt)
    if not feedback.strip():
        raise EmptyFeedback(f"feedback agent returned empty output for {problem.problem_id}")
    return feedback


def regenerate_step(
    agent: AgentSpec,
    problem: ProblemInstance,
    original_output: str,
    feedback: str,
    runtime: Runtime,
    format_prompt: str = "",
) -> str:
    """Redo one agent's step conditioned on its original output and the feedback."""
    template = agent.regenerate_template or prompts.GENERIC_REGENERATE_TURN
    prompt = _render_filtered(
        template,
        {
            "role_name": agent.role_name,
            "question": problem.question,
            "context": problem.context or "",
            "original_response": original_output,
            "feedback": feedback,
            "format_prompt": format_prompt,
        },
    )
    return runtime.ask(agent, prompt)


def propagate_downstream(
    graph: CommGraph,
    agents: Mapping[str, AgentSpec],
    problem: ProblemInstance,
    failed: Trajectory,
    target: str,
    regenerated: str,
    runtime: Runtime,
    iteration: int = 0,
) -> tuple[list[StepRecord], Optional[str | bool]]:
    """Re-execute every agent downstream of ``target`` on the regenerated output.

    Each downstream agent reads regenerated outputs for predecessors that are
    the target or downstream of it, and the original trajectory's outputs for
    everything else. Returns the re-executed steps and the resulting final
    answer (extracted from the regenerated target itself when it is terminal).
    """
    if target not in graph.nodes:
        raise UnknownAgent(target)
    originals = {step.agent_id: step.output for step in failed.steps}
    regenerated_outputs: dict[str, str] = {target: regenerated}
    closure = successors_closure(graph, target)
    steps: list[StepRecord] = []
    for node in topological_order(graph):
        if node not in closure:
            continue
        replaced = ({target} | closure) & predecessors(graph, node)
        merged = dict(originals)
        merged.update({a: regenerated_outputs[a] for a in replaced})
        bound = resolve_bindings(graph.bindings.get(node, {}), problem, merged)
        prompt = render_prompt(agents[node].turn_template, bound)
        output = runtime.ask(agents[node], prompt)
        regenerated_outputs[node] = output
        steps.append(StepRecord(node, prompt, output, iteration=iteration))

    terminal = graph.terminal_nodes()[0]
    final_output = regenerated_outputs.get(terminal, regenerated if target == terminal else None)
    if final_output is None:
        raise UnknownAgent(terminal)
    try:
        final_answer = extract_final_answer(final_output, problem.task_kind)
    except AnswerNotFound:
        final_answer = None
    return steps, final_answer


def rephrase(
    rephraser: AgentSpec,
    problem: ProblemInstance,
    solution: str,
    runtime: Runtime,
) -> str:
    """Rewrite a corrected solution so it reads as if produced directly."""
    prompt = _render_filtered(
        rephraser.turn_template,
        {"question": problem.question, "original_response": solution},
    )
    output = runtime.ask(rephraser, prompt)
    if not output.strip():
        log.warning("empty rephrase output for %s; keeping the regenerated text", problem.problem_id)
        return solution
    return output


def augment_failed(
    graph: CommGraph,
    agents: Mapping[str, AgentSpec],
    ext: AgentSpec,
    problem: ProblemInstance,
    failed: Trajectory,
    budgets: AugmentBudgets,
    target: str,
    runtime: Runtime,
    rephraser: Optional[AgentSpec] = None,
    iteration: int = 0,
) -> Optional[AugmentationNote]:
    """Feedback/regenerate/verify loop for one failed trajectory and target agent.

    Tries up to max_f feedbacks, each with up to max_re regenerations. The
    first regeneration whose propagated final answer matches gold wins: the
    target's regenerated step and every re-executed downstream step are
    rephrased and returned as augmented examples. Exhausting the budget is a
    normal outcome and returns None.
    """
    if rephraser is None:
        rephraser = default_rephraser(ext.model_ref)
    gold = normalize_gold(problem.gold_answer, problem.task_kind)
    original_step = failed.last_step(target)
    if original_step is None:
        raise UnknownAgent(target)
    terminal = graph.terminal_nodes()[0]
    format_prompt = (
        prompts.FORMAT_PROMPTS.get(problem.task_kind, "") if target == terminal else ""
    )

    for f_try in range(1, budgets.max_f + 1):
        try:
            feedback = generate_feedback(
                ext, problem, original_step.output, problem.gold_answer, runtime
            )
        except EmptyFeedback:
            log.info("empty feedback on try %d for %s", f_try, problem.problem_id)
            continue
        for re_try in range(1, budgets.max_re + 1):
            regenerated = regenerate_step(
                agents[target], problem, original_step.output, feedback, runtime, format_prompt
            )
            downstream, final_answer = propagate_downstream(
                graph, agents, problem, failed, target, regenerated, runtime, iteration
            )
            if final_answer != gold:
                continue
            example_steps = [
                StepRecord(
                    target,
                    original_step.rendered_prompt,
                    rephrase(rephraser, problem, regenerated, runtime),
                    provenance=Provenance.AUGMENTED,
                    iteration=iteration,
                )
            ]
            for step in downstream:
                example_steps.append(
                    StepRecord(
                        step.agent_id,
                        step.rendered_prompt,
                        rephrase(rephraser, problem, step.output, runtime),
                        provenance=Provenance.AUGMENTED,
                        iteration=iteration,
                    )
                )
            return AugmentationNote(
                target_agent=target,
                feedback=feedback,
                regenerated_output=regenerated,
                rephrased_output=example_steps[0].output,
                attempts=(f_try, re_try),
                problem_id=problem.problem_id,
                example_steps=example_steps,
            )
    return None


def augment_trajectory(
    graph: CommGraph,
    agents: Mapping[str, AgentSpec],
    ext: AgentSpec,
    problem: ProblemInstance,
    failed: Trajectory,
    budgets: AugmentBudgets,
    runtime: Runtime,
    rephraser: Optional[AgentSpec] = None,
    iteration: int = 0,
) -> Optional[AugmentationNote]:
    """Try targets in topological order; upstream repairs take precedence."""
    for target in topological_order(graph):
        note = augment_failed(
            graph, agents, ext, problem, failed, budgets, target, runtime, rephraser, iteration
        )
        if note is not None:
            return note
    return None
