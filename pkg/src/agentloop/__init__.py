"""Self-improving multi-agent LLM pipelines.

Execute agent DAGs on problems, harvest reward-filtered trajectories into an
experience library, repair failures through feedback and regeneration, and
assemble per-agent fine-tuning datasets across iterations. Ships with three
fully-ruled negotiation game environments and a strict tag-message grammar.
"""

from .backends import CallLog, CallRecord, RemoteChatBackend, Runtime, ScriptedBackend
from .core import (
    AgentSpec,
    BackendKind,
    ChatTurn,
    Decoding,
    ModelRef,
    ProblemInstance,
    Speaker,
    TaskKind,
    extract_final_answer,
    normalize_gold,
    render_prompt,
)
from .experience import (
    ExperienceLibrary,
    Provenance,
    RewardConfig,
    Setting,
    StepRecord,
    TrainingExample,
    Trajectory,
    evaluate_rewards,
    export_dataset,
    filter_good,
    library_stats,
    load_problems,
    parse_dataset,
)
from .topology import (
    ActorCriticTrace,
    CommGraph,
    PipelineState,
    TopologyPreset,
    build_preset,
    execute_pipeline,
    predecessors,
    run_actor_critic,
    successors_closure,
    topological_order,
    validate_graph,
)
from .augmentation import (
    AugmentBudgets,
    AugmentationNote,
    augment_failed,
    augment_trajectory,
    generate_feedback,
    propagate_downstream,
    regenerate_step,
    rephrase,
)
from .train import (
    FineTuneJob,
    IterationReport,
    JobStatus,
    ModelRegistry,
    NullProvider,
    RecordedProvider,
    RunConfig,
    build_runtime,
    evaluate_registry,
    run_iteration,
    run_pipeline,
    submit_finetune,
)

__version__ = "0.1.0"
