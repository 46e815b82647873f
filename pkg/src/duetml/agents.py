"""The two agents and their collaboration loop.

The Reasoning agent interprets a user instruction, dispatches tools in a
ReAct loop, and reports back. The Coding agent turns a task description
into a pipeline script, executes it, and repairs it from diagnostics. The
Reasoning agent never touches the environment directly: every change goes
through a committed script execution.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import IntEnum

from . import data_toolkit as dt
from .clock import Clock, SystemClock
from .dsl import (
    Env,
    EnvSummary,
    dsl_reference,
    execute,
    parse,
    render_observation,
    validate,
)
from .errors import (
    DslSyntax,
    DuetError,
    NoModel,
    NoTestTable,
)
from .llm_backend import Backend, CompletionRequest
from .ml_toolkit import DIRECTION, predict as ml_predict, predictions_to_csv
from .react_core import (
    ChatMessage,
    Role,
    ToolSpec,
    Trace,
    parse_turn,
    render_system_prompt,
    serialize_step,
)
from .errors import ReactMalformed


class Stage(IntEnum):
    INIT = 0
    EXPLORED = 1
    PROCESSED = 2
    MODEL_SELECTED = 3
    TUNED = 4

    @property
    def label(self) -> str:
        return {0: "Init", 1: "Explored", 2: "Processed",
                3: "ModelSelected", 4: "Tuned"}[int(self)]


#: intent keyword rules, checked in order; LLM classification is the
#: fallback when nothing matches
INTENT_KEYWORDS = [
    ("tune", ("tune", "fine", "optimize", "optimise", "hyperparameter")),
    ("select", ("select", "model", "choose")),
    ("process", ("process", "clean", "prepare", "preprocess")),
    ("explore", ("explore", "profile", "understand", "inspect")),
]

INTENT_STAGE = {
    "explore": Stage.EXPLORED,
    "process": Stage.PROCESSED,
    "select": Stage.MODEL_SELECTED,
    "tune": Stage.TUNED,
}


@dataclass
class AgentConfig:
    max_react_steps: int = 12
    max_repair_attempts: int = 3
    reasoning_temperature: float = 0.0
    coding_temperature: float = 0.0
    observation_max_chars: int = 2000
    history_window: int = 20
    default_tune_strategy: str = "halving"
    max_script_seconds: float = 300.0
    max_script_cells: int = 10_000_000

    def __post_init__(self):
        assert self.max_react_steps > 0 and self.max_repair_attempts > 0


@dataclass
class AgentEvent:
    kind: str
    payload: dict
    seq: int
    ts: int  # UTC milliseconds


@dataclass
class SessionState:
    config: AgentConfig = field(default_factory=AgentConfig)
    stage: Stage = Stage.INIT
    env: Env = field(default_factory=Env)
    reasoning_trace: Trace = field(default_factory=Trace)
    transcript: list = field(default_factory=list)  # (instruction, reply)
    target_column: str | None = None
    chosen_model: str | None = None
    chosen_by_fallback: bool = False
    metric_history: list = field(default_factory=list)
    # (model_name, metric, value) parsed from evaluate/tune results
    next_seq: int = 1


TOOLS = [
    ToolSpec("inspect", "summarize the datasets, models, and metrics so far"),
    ToolSpec("delegate_code",
             "hand a data/ML task to the coding agent, which writes and "
             "runs a pipeline script", "a plain-language task description"),
    ToolSpec("read_docs", "read the pipeline language reference",
             "optional topic keyword, e.g. tune"),
    ToolSpec("set_target", "record which column is the prediction target",
             "the column name"),
    ToolSpec("choose_model",
             "pick the single model that will produce the final predictions",
             "a model name from the environment"),
]


def classify_intent(instruction: str, backend: Backend | None = None) -> str | None:
    words = set(re.findall(r"[a-z]+", instruction.lower()))
    for intent, keys in INTENT_KEYWORDS:
        if words & set(keys):
            return intent
    if backend is None:
        return None
    messages = [
        ChatMessage(Role.SYSTEM,
                    "Classify the user instruction as exactly one word: "
                    "explore, process, select, tune, or other."),
        ChatMessage(Role.USER, instruction),
    ]
    try:
        reply = backend.complete(CompletionRequest(messages=messages,
                                                   max_tokens=8)).strip().lower()
    except DuetError:
        return None
    return reply if reply in INTENT_STAGE else None


def profile_digest(env: Env, target: str | None) -> str:
    lines = []
    for name, table in env.tables.items():
        if name not in ("train", "test"):
            continue
        prof = dt.profile(table, target if target and
                          table.has_column(target) else None)
        cols = []
        for cp in prof.columns[:15]:
            bits = [cp.ctype.value]
            if cp.missing_rate:
                bits.append(f"missing={cp.missing_rate:.2f}")
            if cp.correlation is not None:
                bits.append(f"r={cp.correlation:.2f}")
            cols.append(f"{cp.name}({', '.join(bits)})")
        task = f" task={prof.task}" if prof.task else ""
        lines.append(f"{name}: {prof.row_count}x{prof.column_count}{task} "
                     + "; ".join(cols))
    return "\n".join(lines) if lines else "(no datasets attached)"


def _stage_context(state: SessionState) -> str:
    parts = [
        f"Pipeline stage: {state.stage.label}",
        f"Target column: {state.target_column or '(not set)'}",
        f"Chosen model: {state.chosen_model or '(not chosen)'}",
        "Datasets:",
        profile_digest(state.env, state.target_column),
        "Environment:",
        state.env.summary_text(),
    ]
    if state.metric_history:
        parts.append("Metrics so far: " + "; ".join(
            f"{m}={v:.4f} ({name})" for name, m, v in state.metric_history[-8:]
        ))
    return "\n".join(parts)


class _Emitter:
    def __init__(self, state: SessionState, clock: Clock, sink=None):
        self.state = state
        self.clock = clock
        self.sink = sink
        self.events: list[AgentEvent] = []

    def emit(self, kind: str, **payload) -> AgentEvent:
        ev = AgentEvent(kind=kind, payload=payload, seq=self.state.next_seq,
                        ts=self.clock.now_ms())
        self.state.next_seq += 1
        self.events.append(ev)
        if self.sink is not None:
            self.sink(ev)
        return ev


_CODE_BLOCK_RE = re.compile(r"```(?:[a-z]*\n)?(.*?)```", re.DOTALL)


def extract_code_block(completion: str) -> tuple[str | None, int]:
    """(first fenced block contents, total block count)."""
    blocks = _CODE_BLOCK_RE.findall(completion)
    if not blocks:
        return None, 0
    return blocks[0].strip(), len(blocks)


def coding_round(task_description: str, env: Env, config: AgentConfig,
                 backend: Backend, emitter: _Emitter,
                 artifact_dir=None, clock: Clock | None = None):
    """Generate, execute, and repair a script for one task.

    Returns (new_env or None, report or None, attempts) where attempts is
    a list of (script_text, diagnostics or None). None env means repair
    was exhausted and nothing was committed.
    """
    system = ChatMessage(Role.SYSTEM, "\n".join([
        "You write pipeline scripts. Reply with exactly one fenced code",
        "block (``` ... ```) containing the script, one statement per line.",
        "",
        dsl_reference(),
    ]))
    user_parts = [
        "Environment:",
        env.summary_text(),
        "",
        "Task: " + task_description,
    ]
    attempts = []
    for attempt in range(1, config.max_repair_attempts + 1):
        messages = [system, ChatMessage(Role.USER, "\n".join(user_parts))]
        completion = backend.complete(CompletionRequest(
            messages=messages, temperature=config.coding_temperature,
        ))
        script_text, n_blocks = extract_code_block(completion)
        if script_text is None:
            diag = "no fenced code block found"
            attempts.append((completion, diag))
            emitter.emit("script_attempt", attempt=attempt, script="",
                         error=diag)
            user_parts += ["", f"Attempt {attempt} failed: {diag}",
                           "Reply with one fenced code block."]
            continue
        if n_blocks > 1:
            emitter.emit("error", level="warning",
                         message=f"{n_blocks} code blocks in one completion; "
                                 "using the first")
        emitter.emit("script_attempt", attempt=attempt, script=script_text)
        try:
            script = parse(script_text)
        except DslSyntax as exc:
            diag = f"{exc.code}: {exc}"
            attempts.append((script_text, diag))
            emitter.emit("exec_result", attempt=attempt, ok=False,
                         error=diag)
            user_parts += ["", f"Attempt {attempt} failed to parse: {diag}",
                           "Fix the script and reply with one fenced code block."]
            continue
        static_errors = validate(script, EnvSummary.of_env(env))
        if static_errors:
            diag = "; ".join(e.render() for e in static_errors)
            attempts.append((script_text, diag))
            emitter.emit("exec_result", attempt=attempt, ok=False,
                         error=diag)
            user_parts += ["", f"Attempt {attempt} failed validation: {diag}",
                           "Fix the script and reply with one fenced code block."]
            continue
        from .dsl import Limits

        new_env, report = execute(
            script, env,
            limits=Limits(config.max_script_seconds, config.max_script_cells),
            artifact_dir=artifact_dir,
            default_strategy=config.default_tune_strategy,
            clock=clock,
        )
        emitter.emit("exec_result", attempt=attempt, ok=report.ok,
                     report=report.to_json())
        if report.ok:
            attempts.append((script_text, None))
            return new_env, report, attempts
        diag = render_observation(report, config.observation_max_chars)
        attempts.append((script_text, diag))
        user_parts += ["", f"Attempt {attempt} failed at runtime:", diag,
                       "Fix the script and reply with one fenced code block."]
    return None, None, attempts


_METRIC_LINE_RE = re.compile(
    r"\b(rmse|mae|accuracy|logloss|auc)=([0-9.]+)")
_EVALUATE_RE = re.compile(r"^evaluate ([a-z_][a-z0-9_]*) on ")
_MODEL_LINE_RE = re.compile(r"\bmodel ([a-z_][a-z0-9_]*):")


def _harvest_metrics(state: SessionState, report) -> None:
    """Pull model names and metric values out of committed results so the
    reasoning agent's context and the finalize fallback can rank models."""
    for entry in report.entries:
        if not entry.ok:
            continue
        m = _EVALUATE_RE.match(entry.rendered) or \
            _MODEL_LINE_RE.search(entry.result)
        if m is None:
            continue
        name = m.group(1)
        for metric_name, value in _METRIC_LINE_RE.findall(entry.result):
            state.metric_history.append((name, metric_name, float(value)))


def tool_dispatch(state: SessionState, action: str, action_input: str,
                  backend: Backend, emitter: _Emitter,
                  artifact_dir=None, clock: Clock | None = None) -> str:
    """Run one tool; failures become observations, never exceptions."""
    if action == "inspect":
        return _stage_context(state)
    if action == "read_docs":
        return dsl_reference(action_input or None)
    if action == "set_target":
        col = action_input.strip()
        train = state.env.tables.get("train")
        if train is None:
            return "no train table attached yet"
        if not train.has_column(col):
            return (f"no column {col!r} in train; columns: "
                    + ", ".join(train.column_names()))
        state.target_column = col
        return f"target column set to {col}"
    if action == "choose_model":
        name = action_input.strip()
        if name not in state.env.models:
            known = ", ".join(state.env.models) or "(none trained yet)"
            return f"no model {name!r}; available: {known}"
        state.chosen_model = name
        state.chosen_by_fallback = False
        return f"chosen model set to {name}"
    if action == "delegate_code":
        new_env, report, attempts = coding_round(
            action_input, state.env, state.config, backend, emitter,
            artifact_dir=artifact_dir, clock=clock,
        )
        if new_env is None:
            last_diag = attempts[-1][1] if attempts else "no attempts"
            emitter.emit("error", level="error", code="E_REPAIR_EXHAUSTED",
                         message=f"coding agent failed after "
                                 f"{len(attempts)} attempts")
            return ("E_REPAIR_EXHAUSTED: coding agent failed after "
                    f"{len(attempts)} attempts; last diagnostics:\n{last_diag}")
        state.env = new_env
        _harvest_metrics(state, report)
        return render_observation(report, state.config.observation_max_chars)
    known = ", ".join(t.name for t in TOOLS)
    return f"unknown tool {action!r}; available: {known}"


def handle_instruction(state: SessionState, instruction: str,
                       backend: Backend, clock: Clock | None = None,
                       sink=None, artifact_dir=None):
    """Run the Reasoning agent's ReAct loop for one user instruction.

    Returns (state, user_reply, events). The state is mutated in place and
    also returned for convenience.
    """
    clock = clock or SystemClock()
    emitter = _Emitter(state, clock, sink)
    emitter.emit("user_instruction", text=instruction)

    if "train" not in state.env.tables:
        reply = ("No dataset is attached yet. Please attach a train CSV "
                 "(and optionally a test CSV) before giving instructions.")
        emitter.emit("user_reply", text=reply)
        state.transcript.append((instruction, reply))
        return state, reply, emitter.events

    intent = classify_intent(instruction, backend)
    cfg = state.config
    base = [ChatMessage(Role.SYSTEM,
                        render_system_prompt(TOOLS, _stage_context(state)))]
    for past_instruction, past_reply in state.transcript[-cfg.history_window:]:
        base.append(ChatMessage(Role.USER, past_instruction))
        base.append(ChatMessage(Role.ASSISTANT, past_reply))
    base.append(ChatMessage(Role.USER, instruction))

    convo = list(base)
    trace = Trace()
    state.reasoning_trace = trace
    reply = None
    for _ in range(cfg.max_react_steps):
        completion = backend.complete(CompletionRequest(
            messages=convo, temperature=cfg.reasoning_temperature,
        ))
        try:
            turn = parse_turn(completion)
        except ReactMalformed as exc:
            observation = (f"your reply was malformed ({exc}); use the "
                           "Thought/Action/Action Input or Final Answer format")
            emitter.emit("error", level="warning", message=str(exc))
            convo.append(ChatMessage(Role.ASSISTANT, completion))
            convo.append(ChatMessage(Role.USER, f"Observation: {observation}"))
            continue
        if turn.is_final:
            trace.set_final(turn.final)
            reply = turn.final
            break
        step = turn.step
        if step.thought:
            emitter.emit("thought", text=step.thought)
        emitter.emit("action", tool=step.action, input=step.action_input)
        observation = tool_dispatch(state, step.action, step.action_input,
                                    backend, emitter,
                                    artifact_dir=artifact_dir, clock=clock)
        emitter.emit("observation", text=observation)
        trace.append(step, observation)
        convo.append(ChatMessage(Role.ASSISTANT, serialize_step(step)))
        convo.append(ChatMessage(Role.USER, f"Observation: {observation}"))

    budget_exhausted = reply is None
    if budget_exhausted:
        done = len(trace.entries)
        reply = (f"I ran out of reasoning steps ({cfg.max_react_steps}) "
                 f"before finishing; {done} tool steps completed. "
                 "The partial progress is preserved.")
        emitter.emit("error", level="warning", message="E_STEP_BUDGET")

    if intent is not None and not budget_exhausted:
        target_stage = INTENT_STAGE[intent]
        if target_stage <= state.stage:
            emitter.emit("error", level="warning",
                         message=f"instruction intent {intent!r} is out of "
                                 f"order at stage {state.stage.label}")
        elif int(target_stage) > int(state.stage) + 1:
            emitter.emit("error", level="warning",
                         message=f"instruction intent {intent!r} skips ahead "
                                 f"from stage {state.stage.label}")
        if target_stage > state.stage:
            state.stage = target_stage
            emitter.emit("stage_change", stage=state.stage.label)

    emitter.emit("user_reply", text=reply)
    state.transcript.append((instruction, reply))
    return state, reply, emitter.events


@dataclass
class FinalReport:
    model_name: str
    family: str
    hyperparams: dict
    task: str
    target: str
    metrics: list  # (model_name, metric, value)
    lineage: dict  # table -> list of transform descriptions
    artifact: str
    chosen_by_fallback: bool

    def to_json(self) -> dict:
        return {
            "model": self.model_name,
            "family": self.family,
            "hyperparams": self.hyperparams,
            "task": self.task,
            "target": self.target,
            "metrics": [
                {"model": n, "metric": m, "value": v}
                for n, m, v in self.metrics
            ],
            "lineage": self.lineage,
            "artifact": self.artifact,
            "chosen_by_fallback": self.chosen_by_fallback,
        }


def _fallback_choice(state: SessionState) -> str | None:
    """Best holdout metric among trained models, ties to the earliest."""
    if not state.env.models:
        return None
    order = list(state.env.models)
    best_name = None
    best_value = None
    best_pos = None
    for name, metric_name, value in state.metric_history:
        if name not in state.env.models:
            continue
        direction = DIRECTION.get(metric_name)
        if direction is None:
            continue
        pos = order.index(name)
        better = (
            best_value is None
            or (direction == "minimize" and value < best_value)
            or (direction == "maximize" and value > best_value)
        )
        tie = best_value is not None and value == best_value
        if better or (tie and pos < best_pos):
            best_name, best_value, best_pos = name, value, pos
    return best_name or order[0]


def finalize(state: SessionState, artifact_dir,
             sink=None, clock: Clock | None = None) -> FinalReport:
    """Predict on the test table with exactly one model and write the
    submission artifact."""
    from pathlib import Path

    clock = clock or SystemClock()
    emitter = _Emitter(state, clock, sink)
    test = state.env.tables.get("test")
    if test is None:
        raise NoTestTable("no test table attached")
    name = state.chosen_model
    fallback = False
    if name is None:
        name = _fallback_choice(state)
        fallback = True
        if name is None:
            raise NoModel("no trained model to finalize")
        state.chosen_model = name
        state.chosen_by_fallback = True
    model = state.env.models[name]
    preds = ml_predict(model, test)
    ids = (list(test.column("id").values) if test.has_column("id") else None)
    csv_text = predictions_to_csv(preds, ids)
    out_dir = Path(artifact_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifact = out_dir / "submission.csv"
    artifact.write_text(csv_text, encoding="utf-8")
    lineage = {
        tname: [f"{r.op}({r.params})" for r in table.lineage]
        for tname, table in state.env.tables.items() if table.lineage
    }
    report = FinalReport(
        model_name=name,
        family=model.spec.family,
        hyperparams=dict(model.spec.hyperparams),
        task=model.task,
        target=model.target,
        metrics=list(state.metric_history),
        lineage=lineage,
        artifact=artifact.name,
        chosen_by_fallback=fallback,
    )
    emitter.emit("exec_result", finalize=True, report=report.to_json())
    return report
