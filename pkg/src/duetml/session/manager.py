"""Event-sourced session lifecycle.

Each session is a directory holding an append-only JSON Lines journal,
content-addressed dataset blobs, and an artifacts folder. All state is
reconstructable by replaying the journal: dataset events name blobs to
reload, committed scripts are re-executed, and control events (stage
changes, target/model choices) are folded back in.

One worker thread per session consumes its instruction queue, so events of
one instruction fully precede the next's. Subscribers get bounded buffers;
a consumer that falls behind is disconnected and can resume by seq.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path

from .. import data_toolkit as dt
from ..agents import (
    AgentConfig,
    SessionState,
    Stage,
    finalize,
    handle_instruction,
)
from ..clock import Clock, SystemClock
from ..dsl import EnvSummary, execute, parse, validate
from ..errors import (
    Capacity,
    DuetError,
    EmptyInput,
    NotFound,
    QueueFull,
    SessionNotFound,
    TooLarge,
)
from ..llm_backend import Backend


class Journal:
    """Append-only JSON Lines event log with dense seq from 1.

    Appends are fsynced before returning, so an acknowledged event
    survives a crash.
    """

    def __init__(self, path: str | Path, clock: Clock | None = None):
        self.path = Path(path)
        self.clock = clock or SystemClock()
        self._lock = threading.Lock()
        self.next_seq = 1
        if self.path.exists():
            for event in self.read_all():
                self.next_seq = event["seq"] + 1
        else:
            self.path.touch()

    def append(self, type_: str, payload) -> dict:
        with self._lock:
            event = {
                "seq": self.next_seq,
                "ts": self.clock.now_ms(),
                "type": type_,
                "payload": payload,
            }
            line = json.dumps(event, sort_keys=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()
                os.fsync(f.fileno())
            self.next_seq += 1
            return event

    def read_all(self) -> list[dict]:
        events = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                events.append(json.loads(line))
        return events

    def read_from(self, from_seq: int) -> list[dict]:
        return [e for e in self.read_all() if e["seq"] >= from_seq]


def verify_seq_density(events: list[dict]) -> int | None:
    """First missing seq, or None when the journal is dense from 1."""
    for i, event in enumerate(events, start=1):
        if event["seq"] != i:
            return i
    return None


@dataclass
class _Subscriber:
    buffer: queue.Queue
    alive: bool = True


_QUEUE_BOUND = 16
_SUBSCRIBER_BUFFER = 256


class Session:
    def __init__(self, session_id: str, directory: Path, manager:
                 "SessionManager"):
        self.id = session_id
        self.dir = directory
        self.manager = manager
        self.journal = Journal(directory / "journal.jsonl",
                               manager.clock_factory())
        self.state = SessionState(config=manager.agent_config)
        self.backend = manager.backend_factory()
        self.clock = self.journal.clock
        self.queue: queue.Queue = queue.Queue(maxsize=_QUEUE_BOUND)
        self.subscribers: list[_Subscriber] = []
        self._sub_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self.instruction_count = 0
        self.finalized = False
        self.worker = threading.Thread(target=self._work, daemon=True,
                                       name=f"session-{session_id[:8]}")
        self.worker.start()

    @property
    def artifact_dir(self) -> Path:
        return self.dir / "artifacts"

    def emit(self, type_: str, payload) -> dict:
        event = self.journal.append(type_, payload)
        with self._sub_lock:
            for sub in self.subscribers:
                if not sub.alive:
                    continue
                try:
                    sub.buffer.put_nowait(event)
                except queue.Full:
                    sub.alive = False
        return event

    def subscribe(self) -> _Subscriber:
        sub = _Subscriber(queue.Queue(maxsize=_SUBSCRIBER_BUFFER))
        with self._sub_lock:
            self.subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self._sub_lock:
            sub.alive = False
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    def _work(self) -> None:
        while True:
            item = self.queue.get()
            if item is None:
                return
            instruction_seq, text = item
            try:
                self._process(instruction_seq, text)
            except Exception as exc:  # never kill the worker
                self.emit("error", {"level": "error", "message": str(exc)})
            finally:
                self.queue.task_done()

    def _sink(self, agent_event) -> None:
        payload = dict(agent_event.payload)
        self.emit(agent_event.kind, payload)

    def _process(self, instruction_seq: int, text: str) -> None:
        with self._state_lock:
            # keep agent-event seq aligned with the journal
            self.state.next_seq = self.journal.next_seq
            handle_instruction(self.state, text, self.backend,
                               clock=self.clock, sink=self._sink,
                               artifact_dir=self.artifact_dir)
            if (self.state.stage == Stage.TUNED and not self.finalized
                    and "test" in self.state.env.tables
                    and self.state.env.models):
                self.state.next_seq = self.journal.next_seq
                report = finalize(self.state, self.artifact_dir,
                                  sink=self._sink, clock=self.clock)
                (self.dir / "report.json").write_text(
                    json.dumps(report.to_json(), sort_keys=True, indent=2),
                    encoding="utf-8")
                self.finalized = True

    def attach_dataset(self, role: str, csv_bytes: bytes) -> dict:
        if role not in ("train", "test"):
            raise DuetError(f"role must be train or test, got {role!r}",
                            code="E_BAD_CONFIG")
        if len(csv_bytes) > self.manager.max_upload_bytes:
            raise TooLarge(
                f"upload of {len(csv_bytes)} bytes exceeds the "
                f"{self.manager.max_upload_bytes} byte limit")
        text = csv_bytes.decode("utf-8")
        table = dt.read_csv(text, role)
        blob = self.manager.store_blob(text)
        with self._state_lock:
            if role in self.state.env.tables:
                self.emit("error", {
                    "level": "warning",
                    "message": f"replacing previously attached {role} table",
                })
            self.state.env.tables[role] = table
            target = (self.state.target_column
                      if self.state.target_column
                      and table.has_column(self.state.target_column)
                      else None)
            digest = dt.profile(table, target).to_json()
        payload = {"role": role, "blob": blob, "rows": table.n_rows,
                   "cols": len(table.columns), "profile": digest}
        self.emit("dataset_attached", payload)
        return payload

    def submit_instruction(self, text: str) -> int:
        self.instruction_count += 1
        instruction_seq = self.instruction_count
        try:
            self.queue.put_nowait((instruction_seq, text))
        except queue.Full:
            self.instruction_count -= 1
            raise QueueFull(
                f"instruction queue is full (bound {_QUEUE_BOUND})")
        return instruction_seq

    def report(self) -> dict:
        report_path = self.dir / "report.json"
        if report_path.exists():
            return json.loads(report_path.read_text(encoding="utf-8"))
        with self._state_lock:
            return {
                "status": "in_progress",
                "stage": self.state.stage.label,
                "tables": {n: t.n_rows
                           for n, t in self.state.env.tables.items()},
                "models": list(self.state.env.models),
                "chosen_model": self.state.chosen_model,
            }

    def artifact(self, name: str) -> bytes:
        if "/" in name or "\\" in name or name in ("", ".", ".."):
            raise NotFound(f"no artifact named {name!r}")
        path = self.artifact_dir / name
        if not path.is_file():
            raise NotFound(f"no artifact named {name!r}")
        return path.read_bytes()

    def drain(self, timeout: float = 60.0) -> None:
        """Block until queued instructions are processed (for tests/CLI)."""
        import time

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.queue.unfinished_tasks == 0:
                return
            time.sleep(0.005)
        raise DuetError("session did not drain in time", code="E_BUDGET")

    def close(self) -> None:
        self.queue.put(None)
        self.worker.join(timeout=10)


class SessionManager:
    def __init__(self, data_dir: str | Path, backend_factory,
                 clock_factory=SystemClock, max_sessions: int = 32,
                 max_upload_bytes: int = 10_000_000,
                 agent_config: AgentConfig | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.blob_dir = self.data_dir / "blobs"
        self.blob_dir.mkdir(exist_ok=True)
        self.backend_factory = (
            backend_factory if callable(backend_factory)
            else (lambda: backend_factory)
        )
        self.clock_factory = clock_factory
        self.max_sessions = max_sessions
        self.max_upload_bytes = max_upload_bytes
        self.agent_config = agent_config or AgentConfig()
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def store_blob(self, csv_text: str) -> str:
        digest = hashlib.sha256(csv_text.encode("utf-8")).hexdigest()
        path = self.blob_dir / f"{digest}.csv"
        if not path.exists():
            path.write_text(csv_text, encoding="utf-8")
        return digest

    def load_blob(self, digest: str) -> str:
        path = self.blob_dir / f"{digest}.csv"
        if not path.exists():
            raise NotFound(f"no blob {digest}")
        return path.read_text(encoding="utf-8")

    def create_session(self, session_id: str | None = None) -> Session:
        """A fixed session_id makes scripted runs byte-reproducible."""
        with self._lock:
            if len(self.sessions) >= self.max_sessions:
                raise Capacity(
                    f"at the limit of {self.max_sessions} sessions")
            if session_id is None:
                session_id = secrets.token_hex(16)
            elif session_id in self.sessions:
                raise Capacity(f"session {session_id!r} already exists")
            directory = self.data_dir / session_id
            directory.mkdir()
            (directory / "artifacts").mkdir()
            session = Session(session_id, directory, self)
            self.sessions[session_id] = session
        session.emit("session_created", {"session_id": session_id})
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session {session_id!r}")
        return session

    def stream_events(self, session_id: str, from_seq: int = 1):
        """Yield journal events from from_seq, then live, no gaps or dups.

        Subscribes before reading the backlog so nothing falls between;
        live events already seen in the backlog are skipped by seq.
        """
        session = self.get(session_id)
        sub = session.subscribe()
        try:
            last = from_seq - 1
            for event in session.journal.read_from(from_seq):
                last = event["seq"]
                yield event
            while True:
                if not sub.alive:
                    return
                try:
                    event = sub.buffer.get(timeout=0.25)
                except queue.Empty:
                    yield None  # keep-alive tick; callers may stop here
                    continue
                if event["seq"] <= last:
                    continue
                last = event["seq"]
                yield event
        finally:
            session.unsubscribe(sub)

    def close(self) -> None:
        for session in list(self.sessions.values()):
            session.close()


def replay_journal(events: list[dict], load_blob,
                   config: AgentConfig | None = None) -> SessionState:
    """Reconstruct SessionState by folding a journal.

    Datasets come back from content-addressed blobs; committed scripts are
    re-executed (the interpreter and tuning are seeded, so the environment
    comes out identical); control events restore stage, target, chosen
    model, and transcript.
    """
    from ..agents import _harvest_metrics

    if not events:
        raise EmptyInput("journal is empty")
    gap = verify_seq_density(events)
    if gap is not None:
        raise DuetError(f"journal seq gap at {gap}", code="E_BAD_CONFIG")
    state = SessionState(config=config or AgentConfig())
    pending_script: str | None = None
    pending_action: tuple[str, str] | None = None
    pending_instruction: str | None = None
    for event in events:
        type_ = event["type"]
        payload = event["payload"]
        if type_ == "dataset_attached":
            text = load_blob(payload["blob"])
            state.env.tables[payload["role"]] = dt.read_csv(
                text, payload["role"])
        elif type_ == "user_instruction":
            pending_instruction = payload["text"]
        elif type_ == "user_reply":
            if pending_instruction is not None:
                state.transcript.append((pending_instruction,
                                         payload["text"]))
                pending_instruction = None
        elif type_ == "script_attempt":
            pending_script = payload.get("script") or None
        elif type_ == "exec_result":
            if payload.get("finalize"):
                state.chosen_model = payload["report"]["model"]
                continue
            if payload.get("ok") and pending_script:
                script = parse(pending_script)
                errors = validate(script, EnvSummary.of_env(state.env))
                if errors:
                    raise DuetError(
                        "journal replay diverged: " + errors[0].render(),
                        code="E_BAD_CONFIG")
                state.env, report = execute(script, state.env)
                if not report.ok:
                    raise DuetError(
                        "journal replay diverged: "
                        f"{report.error.code}: {report.error.message}",
                        code="E_BAD_CONFIG")
                _harvest_metrics(state, report)
            pending_script = None
        elif type_ == "action":
            pending_action = (payload["tool"], payload["input"])
        elif type_ == "observation":
            if pending_action is not None:
                tool, tool_input = pending_action
                text = payload["text"]
                if tool == "set_target" and text.startswith(
                        "target column set to"):
                    state.target_column = tool_input.strip()
                elif tool == "choose_model" and text.startswith(
                        "chosen model set to"):
                    state.chosen_model = tool_input.strip()
                pending_action = None
        elif type_ == "stage_change":
            state.stage = Stage[
                {"Init": "INIT", "Explored": "EXPLORED",
                 "Processed": "PROCESSED", "ModelSelected": "MODEL_SELECTED",
                 "Tuned": "TUNED"}[payload["stage"]]
            ]
        state.next_seq = event["seq"] + 1
    return state
