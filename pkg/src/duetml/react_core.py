"""ReAct trace grammar: parsing completions into turns, rendering prompts.

The wire format is line-oriented with case-sensitive markers at the start
of a line:

    Thought: <one line, optional>
    Action: <tool name, one line>
    Action Input: <everything to the end of the completion>

or, to finish:

    Final Answer: <everything to the end of the completion>

Text before the first marker is ignored. ``Action Input`` deliberately
consumes the rest of the completion so multi-line payloads (whole pipeline
scripts) survive intact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import NoTools, ReactMalformed, TraceFinalized


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self):
        if self.role in (Role.USER, Role.ASSISTANT) and not self.content.strip():
            raise ValueError(f"{self.role.value} message content must be non-empty")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    input_hint: str = ""

    def __post_init__(self):
        if not _is_identifier(self.name):
            raise ValueError(f"tool name {self.name!r} is not a valid identifier")


def _is_identifier(s: str) -> bool:
    if not s or not (s[0].islower() or s[0] == "_") or not s.isascii():
        return False
    return all(c.islower() or c.isdigit() or c == "_" for c in s)


@dataclass(frozen=True)
class ReactStep:
    thought: str
    action: str
    action_input: str

    def __post_init__(self):
        if not self.action:
            raise ValueError("action must be non-empty")


@dataclass(frozen=True)
class AgentTurn:
    """Either a tool-invoking step or a final answer, never both."""

    step: ReactStep | None = None
    final: str | None = None

    def __post_init__(self):
        if (self.step is None) == (self.final is None):
            raise ValueError("exactly one of step/final must be set")

    @property
    def is_final(self) -> bool:
        return self.final is not None


@dataclass
class Trace:
    """Ordered (step, observation) pairs for the current instruction."""

    entries: list[tuple[ReactStep, str]] = field(default_factory=list)
    final: str | None = None

    def append(self, step: ReactStep, observation: str) -> None:
        if self.final is not None:
            raise TraceFinalized("cannot append to a finalized trace")
        self.entries.append((step, observation))

    def set_final(self, answer: str) -> None:
        if self.final is not None:
            raise TraceFinalized("trace already finalized")
        self.final = answer


THOUGHT = "Thought:"
ACTION = "Action:"
ACTION_INPUT = "Action Input:"
FINAL_ANSWER = "Final Answer:"


def parse_turn(raw: str) -> AgentTurn:
    """Parse an assistant completion into a step or a final answer.

    Total over all inputs: returns an AgentTurn or raises ReactMalformed
    naming the missing marker.
    """
    lines = raw.split("\n")
    thought = ""
    action = None
    for i, line in enumerate(lines):
        if line.startswith(FINAL_ANSWER):
            rest = line[len(FINAL_ANSWER):]
            remainder = "\n".join([rest] + lines[i + 1:]).strip()
            return AgentTurn(final=remainder)
        if line.startswith(THOUGHT) and action is None and not thought:
            thought = line[len(THOUGHT):].strip()
        elif line.startswith(ACTION_INPUT):
            if action is None:
                raise ReactMalformed("missing Action")
            rest = line[len(ACTION_INPUT):]
            payload = "\n".join([rest] + lines[i + 1:]).strip()
            return AgentTurn(step=ReactStep(thought, action, payload))
        elif line.startswith(ACTION) and action is None:
            action = line[len(ACTION):].strip()
            if not action:
                raise ReactMalformed("empty Action")
    if action is not None:
        raise ReactMalformed("missing Action Input")
    raise ReactMalformed("missing Action or Final Answer")


def serialize_step(step: ReactStep) -> str:
    parts = []
    if step.thought:
        parts.append(f"{THOUGHT} {step.thought}")
    parts.append(f"{ACTION} {step.action}")
    parts.append(f"{ACTION_INPUT} {step.action_input}")
    return "\n".join(parts)


def render_system_prompt(tools: list[ToolSpec], stage_context: str) -> str:
    """Deterministic system prompt: tool registry, marker grammar, context."""
    if not tools:
        raise NoTools("at least one tool is required")
    lines = [
        "You are an agent that works by emitting exactly one step per reply.",
        "",
        "Available tools:",
    ]
    for t in tools:
        hint = f" Input: {t.input_hint}" if t.input_hint else ""
        lines.append(f"- {t.name}: {t.description}{hint}")
    lines += [
        "",
        "Reply format (markers at the start of a line, case-sensitive):",
        f"  {THOUGHT} <your reasoning, one line, optional>",
        f"  {ACTION} <one tool name from the list above>",
        f"  {ACTION_INPUT} <the tool input; may span multiple lines>",
        "or, when done:",
        f"  {FINAL_ANSWER} <your answer to the user>",
        "",
        "After each step you will receive an Observation message with the result.",
        "",
        "Context:",
        stage_context,
    ]
    return "\n".join(lines)


def render_history(trace: Trace, base: list[ChatMessage]) -> list[ChatMessage]:
    """Base messages followed by one assistant+user pair per trace entry.

    Observations go out as user-role messages so the assistant channel
    contains only its own turns.
    """
    out = list(base)
    for step, observation in trace.entries:
        out.append(ChatMessage(Role.ASSISTANT, serialize_step(step)))
        out.append(ChatMessage(Role.USER, f"Observation: {observation}"))
    return out
