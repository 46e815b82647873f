"""Command-line entry points: run, chat, replay, bench, serve."""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import time
from pathlib import Path

from . import data_toolkit as dt
from .agents import AgentConfig, Stage
from .clock import LogicalClock, SystemClock
from .datasets import asset_path
from .errors import DuetError
from .llm_backend import make_backend
from .ml_toolkit import (
    DIRECTION,
    FAMILIES,
    ModelSpec,
    metric as score_metric,
    predict as ml_predict,
    train as ml_train,
)
from .session import SessionManager, replay_journal
from .session.manager import verify_seq_density

CANONICAL_INSTRUCTIONS = (
    "Explore the dataset",
    "Process the dataset",
    "Select the model",
    "Fine tune the parameters",
)

#: the reference pool is deliberately internal and small; its numbers are a
#: desk-scale stand-in, not comparable to external AutoML frameworks
POOL_NOTE = (
    "reference pool = the 4 built-in families at default hyperparameters "
    "on an identically seeded 80/20 split of default-processed data "
    "(median-imputed numerics, one-hot categoricals); a desk-scale stand-in, "
    "not comparable to external AutoML systems"
)

FIXED_SESSION_ID = "0" * 32


def _is_scripted(backend_spec: str) -> bool:
    return backend_spec.startswith("scripted:")


def _make_manager(data_dir: Path, backend_spec: str,
                  config: AgentConfig) -> SessionManager:
    scripted = _is_scripted(backend_spec)
    return SessionManager(
        data_dir,
        backend_factory=lambda: make_backend(backend_spec),
        clock_factory=(lambda: LogicalClock()) if scripted else SystemClock,
        agent_config=config,
    )


def _agent_flow(manager: SessionManager, train_path: Path, test_path: Path,
                target: str, session_id: str | None = None):
    """Create a session, attach data, run the four canonical instructions."""
    session = manager.create_session(session_id=session_id)
    train_text = Path(train_path).read_text(encoding="utf-8")
    table = dt.read_csv(train_text, "train")
    if not table.has_column(target):
        raise DuetError(
            f"target column {target!r} not in train columns "
            f"{table.column_names()}", code="E_NO_SUCH_COLUMN")
    session.attach_dataset("train", train_text.encode("utf-8"))
    session.attach_dataset(
        "test", Path(test_path).read_bytes())
    for text in CANONICAL_INSTRUCTIONS:
        session.submit_instruction(text)
    session.drain(timeout=600)
    return session


def _agent_config(args) -> AgentConfig:
    config = AgentConfig()
    if getattr(args, "max_script_seconds", None):
        config.max_script_seconds = args.max_script_seconds
    return config


def cmd_run(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manager = _make_manager(out_dir / "session", args.backend,
                            _agent_config(args))
    session = None
    try:
        session = _agent_flow(
            manager, Path(args.train), Path(args.test), args.target,
            session_id=FIXED_SESSION_ID if _is_scripted(args.backend)
            else None)
        if session.state.stage != Stage.TUNED or not session.finalized:
            print(f"run stopped at stage {session.state.stage.label} "
                  "without a finalized model", file=sys.stderr)
            return 1
        if args.verbose:
            for past_instruction, reply in session.state.transcript:
                print(f"> {past_instruction}\n{reply}\n")
        print(f"finalized model: {session.report()['model']}")
        return 0
    except DuetError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    finally:
        if session is None and manager.sessions:
            session = next(iter(manager.sessions.values()))
        if session is not None:
            shutil.copy(session.journal.path, out_dir / "journal.jsonl")
            report = session.dir / "report.json"
            if report.exists():
                shutil.copy(report, out_dir / "report.json")
            art_out = out_dir / "artifacts"
            art_out.mkdir(exist_ok=True)
            for item in session.artifact_dir.iterdir():
                if item.is_file():
                    shutil.copy(item, art_out / item.name)
        manager.close()


def cmd_replay(args) -> int:
    journal_path = Path(args.journal)
    if not journal_path.exists() or not journal_path.read_text().strip():
        print("E_EMPTY: journal is empty", file=sys.stderr)
        return 1
    events = [json.loads(line)
              for line in journal_path.read_text(encoding="utf-8").splitlines()
              if line.strip()]
    gap = verify_seq_density(events)
    if gap is not None:
        print(f"seq gap: first missing seq is {gap}", file=sys.stderr)
        return 1

    candidates = [
        Path(args.blobs) if args.blobs else None,
        journal_path.parent / "blobs",
        journal_path.parent.parent / "blobs",
        journal_path.parent / "session" / "blobs",
    ]
    blob_dir = next((c for c in candidates if c and c.is_dir()), None)

    def load_blob(digest: str) -> str:
        if blob_dir is None:
            raise DuetError("no blobs directory found; pass --blobs",
                            code="E_NOT_FOUND")
        return (blob_dir / f"{digest}.csv").read_text(encoding="utf-8")

    try:
        state = replay_journal(events, load_blob)
    except DuetError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    print(f"events: {len(events)}")
    print(f"stage: {state.stage.label}")
    for name, table in state.env.tables.items():
        print(f"table {name}: {table.n_rows} rows, "
              f"{len(table.columns)} cols, version {table.version}")
    for name in state.env.models:
        print(f"model {name}")
    print(f"chosen model: {state.chosen_model or '(none)'}")
    return 0


def cmd_chat(args) -> int:
    session_dir = Path(args.session_dir)
    manager = _make_manager(session_dir, args.backend, _agent_config(args))
    session = manager.create_session()
    seen_seq = 0

    def show_events() -> None:
        nonlocal seen_seq
        for event in session.journal.read_from(seen_seq + 1):
            seen_seq = event["seq"]
            kind = event["type"]
            payload = event["payload"]
            if kind == "user_reply":
                print(payload["text"])
            elif args.verbose and kind in ("thought", "action",
                                           "observation"):
                print(f"  [{kind}] "
                      + json.dumps(payload, sort_keys=True)[:200])

    print(f"session {session.id} in {session.dir}")
    print("meta: :attach train|test <path>, :report, :events N, :quit")
    try:
        while True:
            try:
                line = input("you> ").strip()
            except EOFError:
                break
            if not line:
                continue
            if line == ":quit":
                break
            if line == ":report":
                print(json.dumps(session.report(), indent=2, sort_keys=True))
                continue
            if line.startswith(":events"):
                parts = line.split()
                n = int(parts[1]) if len(parts) > 1 else 10
                for event in session.journal.read_all()[-n:]:
                    print(json.dumps(event, sort_keys=True))
                continue
            if line.startswith(":attach"):
                try:
                    _, role, path = line.split(maxsplit=2)
                    summary = session.attach_dataset(
                        role, Path(path).read_bytes())
                    print(f"attached {role}: {summary['rows']} rows")
                except (ValueError, OSError, DuetError) as exc:
                    print(f"attach failed: {exc}")
                seen_seq = session.journal.next_seq - 1
                continue
            try:
                session.submit_instruction(line)
                session.drain(timeout=600)
            except DuetError as exc:
                print(f"{exc.code}: {exc}")
            show_events()
    finally:
        manager.close()
    return 0


def default_process(table: dt.Table, target: str) -> dt.Table:
    """Median-impute numeric columns, one-hot the categorical ones."""
    for column in list(table.columns):
        if column.name == target:
            continue
        if column.ctype is dt.CType.NUMERIC and column.missing_count():
            table = dt.impute(table, column.name, "median")
        elif column.ctype is dt.CType.CATEGORICAL:
            if column.missing_count():
                table = dt.impute(table, column.name, "mode")
            table = dt.onehot(table, column.name)
    return table


def _pool_compatible(family: str, metric_name: str) -> bool:
    # linear always regresses, logistic always classifies; scoring either
    # with the opposite task's metric is a structural mismatch
    if family == "linear" and metric_name in ("accuracy", "logloss", "auc"):
        return False
    if family == "logistic" and metric_name in ("rmse", "mae"):
        return False
    return True


def run_pool(train_table: dt.Table, test_table: dt.Table, target: str,
             metric_name: str, seed: int) -> list[dict]:
    train_table = default_process(train_table, target)
    test_table = default_process(test_table, target)
    part, _ = dt.split(train_table, 0.8, seed, names=("pool_fit", "pool_val"))
    truth = list(test_table.column(target).values)
    results = []
    for family in FAMILIES:
        entry: dict = {"family": family}
        if not _pool_compatible(family, metric_name):
            entry["error"] = (f"E_METRIC_TASK_MISMATCH: {family} cannot be "
                              f"scored with {metric_name}")
            results.append(entry)
            continue
        try:
            model = ml_train(ModelSpec(family, {}), part, target)
            preds = ml_predict(model, test_table)
            entry["score"] = score_metric(metric_name, truth, preds)
        except DuetError as exc:
            entry["error"] = f"{exc.code}: {exc}"
        results.append(entry)
    return results


def rank_percentile(agent_score: float | None, pool: list[dict],
                    direction: str) -> float:
    """Strictly beaten pool members / pool size; errors count as beaten."""
    if agent_score is None:
        return 0.0
    beaten = 0
    for entry in pool:
        if "error" in entry:
            beaten += 1
        elif direction == "minimize" and agent_score < entry["score"]:
            beaten += 1
        elif direction == "maximize" and agent_score > entry["score"]:
            beaten += 1
    return beaten / len(pool)


def _bench_dataset(spec: dict, suite_dir: Path, backend_spec: str,
                   seed: int, work_dir: Path, config: AgentConfig) -> dict:
    name = spec["name"]
    metric_name = spec["metric"]
    target = spec["target"]
    train_path = (suite_dir / spec["train"]).resolve()
    test_path = (suite_dir / spec["test"]).resolve()
    entry: dict = {"name": name, "metric": metric_name,
                   "direction": DIRECTION[metric_name]}
    started = time.monotonic()

    train_table = dt.read_csv(train_path.read_text(encoding="utf-8"), "train")
    test_table = dt.read_csv(test_path.read_text(encoding="utf-8"), "test")
    entry["pool"] = run_pool(train_table, test_table, target, metric_name,
                             seed)

    dataset_backend = backend_spec
    if "fixture" in spec:
        dataset_backend = f"scripted:{(suite_dir / spec['fixture']).resolve()}"
    try:
        manager = _make_manager(work_dir / name, dataset_backend, config)
        try:
            session = _agent_flow(manager, train_path, test_path, target)
            if not session.finalized:
                raise DuetError(
                    f"agent stopped at stage {session.state.stage.label}",
                    code="E_BUDGET")
            model = session.state.env.models[session.state.chosen_model]
            agent_test = session.state.env.tables["test"]
            preds = ml_predict(model, agent_test)
            truth = list(agent_test.column(target).values)
            entry["agent_score"] = score_metric(metric_name, truth, preds)
            entry["agent_model"] = session.report()["model"]
        finally:
            manager.close()
    except DuetError as exc:
        entry["error"] = f"{exc.code}: {exc}"
        entry["agent_score"] = None
    entry["pool_size"] = len(entry["pool"])
    entry["rank_percentile"] = rank_percentile(
        entry["agent_score"], entry["pool"], entry["direction"])
    entry["wall_time_s"] = round(time.monotonic() - started, 3)
    return entry


def render_bench_figure(results: list[dict], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [r["name"] for r in results]
    ranks = [r["rank_percentile"] for r in results]
    fig, ax = plt.subplots(figsize=(max(4, 1.6 * len(names)), 3.2))
    ax.bar(range(len(names)), ranks, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("rank percentile vs reference pool")
    ax.axhline(0.5, color="grey", linewidth=0.8, linestyle="--")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_bench(args) -> int:
    suite_path = Path(args.suite)
    suite = json.loads(suite_path.read_text(encoding="utf-8"))
    suite_dir = suite_path.parent
    seed = args.seed if args.seed is not None else (
        suite.get("seeds", [7])[0])
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    work_dir = out_path.parent / (out_path.stem + "_sessions")
    config = _agent_config(args)

    results = []
    for spec in suite["datasets"]:
        result = _bench_dataset(spec, suite_dir, args.backend, seed,
                                work_dir, config)
        results.append(result)

    mean_rank = (sum(r["rank_percentile"] for r in results) / len(results)
                 if results else 0.0)
    output = {
        "version": 1,
        "pool_note": POOL_NOTE,
        "seed": seed,
        "datasets": results,
        "summary": {"mean_rank_percentile": mean_rank},
    }
    out_path.write_text(json.dumps(output, indent=2, sort_keys=True),
                        encoding="utf-8")
    figure_path = out_path.with_suffix(".png")
    render_bench_figure(results, figure_path)

    header = f"{'dataset':<28} {'metric':<9} {'agent':>10} {'rank':>6}  time"
    print(header)
    print("-" * len(header))
    for r in results:
        score = ("-" if r["agent_score"] is None
                 else f"{r['agent_score']:.4f}")
        print(f"{r['name']:<28} {r['metric']:<9} {score:>10} "
              f"{r['rank_percentile']:>6.2f}  {r['wall_time_s']:.1f}s")
    print(f"mean rank percentile: {mean_rank:.3f}")
    print(f"json: {out_path}")
    print(f"figure: {figure_path}")
    print(f"note: {POOL_NOTE}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .session import build_app

    manager = _make_manager(Path(args.data_dir), args.backend,
                            _agent_config(args))
    app = build_app(manager)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duetml",
        description="Dual-agent AutoML: a reasoning agent plans, a coding "
                    "agent writes and repairs pipeline scripts.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_backend(p):
        p.add_argument("--backend", default="http:gpt-4",
                       help="scripted:<path> | http:<model> | "
                            "replay:<dir>+http:<model>")
        p.add_argument("--max-script-seconds", type=float, default=None)
        p.add_argument("--verbose", action="store_true")

    p_run = sub.add_parser("run", help="end-to-end four-instruction run")
    p_run.add_argument("--train", required=True)
    p_run.add_argument("--test", required=True)
    p_run.add_argument("--target", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    add_backend(p_run)
    p_run.set_defaults(func=cmd_run)

    p_chat = sub.add_parser("chat", help="interactive REPL")
    p_chat.add_argument("--session-dir", default="./duetml_chat")
    add_backend(p_chat)
    p_chat.set_defaults(func=cmd_chat)

    p_replay = sub.add_parser("replay",
                              help="verify and summarize a journal")
    p_replay.add_argument("journal")
    p_replay.add_argument("--blobs", default=None)
    p_replay.set_defaults(func=cmd_replay)

    p_bench = sub.add_parser("bench", help="benchmark against the "
                                           "reference pool")
    p_bench.add_argument("--suite", default=str(asset_path_or_none(
        "bench_suite.json")))
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--seed", type=int, default=None)
    add_backend(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="run the HTTP session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8321)
    p_serve.add_argument("--data-dir", default="./duetml_data")
    add_backend(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def asset_path_or_none(name: str):
    try:
        return asset_path(name)
    except FileNotFoundError:
        return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
