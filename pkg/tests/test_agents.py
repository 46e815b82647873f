import pytest

from duetml import data_toolkit as dt
from duetml.agents import (
    AgentConfig,
    SessionState,
    Stage,
    classify_intent,
    extract_code_block,
    finalize,
    handle_instruction,
)
from duetml.clock import LogicalClock
from duetml.errors import NoModel, NoTestTable
from duetml.llm_backend import FixtureEntry, ScriptedBackend


TRAIN_CSV = "x,y\n" + "\n".join(f"{i},{2 * i + 1}" for i in range(20)) + "\n"
TEST_CSV = "x\n" + "\n".join(str(i) for i in range(5)) + "\n"


def fresh_state(with_test=False):
    state = SessionState()
    state.env.tables["train"] = dt.read_csv(TRAIN_CSV, "train")
    if with_test:
        state.env.tables["test"] = dt.read_csv(TEST_CSV, "test")
    return state


def step(action, action_input, thought=None):
    lines = []
    if thought:
        lines.append(f"Thought: {thought}")
    lines += [f"Action: {action}", f"Action Input: {action_input}"]
    return "\n".join(lines)


def fenced(script):
    return f"Here is the script:\n```\n{script}\n```"


def backend(*responses):
    return ScriptedBackend([FixtureEntry(r) for r in responses])


def run(state, instruction, be, **kw):
    return handle_instruction(state, instruction, be,
                              clock=LogicalClock(), **kw)


class TestIntent:
    def test_keywords(self):
        assert classify_intent("Explore the dataset") == "explore"
        assert classify_intent("Please clean up the data") == "process"
        assert classify_intent("Select the model") == "select"
        assert classify_intent("Fine tune the parameters") == "tune"

    def test_llm_fallback(self):
        be = backend("process")
        assert classify_intent("make it nicer", be) == "process"
        assert be.calls_made == 1

    def test_fallback_garbage_is_none(self):
        assert classify_intent("make it nicer", backend("dunno")) is None

    def test_no_backend_no_match(self):
        assert classify_intent("make it nicer") is None


class TestCodeBlock:
    def test_none(self):
        assert extract_code_block("no code here") == (None, 0)

    def test_single_with_language(self):
        block, n = extract_code_block("```text\nprofile train\n```")
        assert (block, n) == ("profile train", 1)

    def test_multiple_takes_first(self):
        block, n = extract_code_block("```\na\n```\nmid\n```\nb\n```")
        assert (block, n) == ("a", 2)


class TestHandleInstruction:
    def test_no_dataset_short_circuit(self):
        state = SessionState()
        be = backend()  # any call would raise FixtureExhausted
        state, reply, events = run(state, "Explore the dataset", be)
        assert "attach" in reply.lower()
        assert [e.kind for e in events] == ["user_instruction", "user_reply"]
        assert be.calls_made == 0

    def test_explore_flow(self):
        state = fresh_state()
        be = backend(
            step("delegate_code", "profile the training table", "look first"),
            fenced("profile train"),
            "Final Answer: The training table has 20 rows and 2 columns.",
        )
        state, reply, events = run(state, "Explore the dataset", be)
        assert reply.startswith("The training table")
        assert state.stage == Stage.EXPLORED
        kinds = [e.kind for e in events]
        assert kinds == ["user_instruction", "thought", "action",
                         "script_attempt", "exec_result", "observation",
                         "stage_change", "user_reply"]
        assert be.calls_made == 3
        assert state.transcript == [("Explore the dataset", reply)]

    def test_event_seq_dense_across_instructions(self):
        state = fresh_state()
        be = backend("Final Answer: ok one", "Final Answer: ok two")
        _, _, ev1 = run(state, "Explore the dataset", be)
        _, _, ev2 = run(state, "Process the dataset", be)
        seqs = [e.seq for e in ev1 + ev2]
        assert seqs == list(range(1, len(seqs) + 1))

    def test_malformed_completion_recovery(self):
        state = fresh_state()
        be = backend("I will just chat with no markers",
                     "Final Answer: done exploring")
        state, reply, events = run(state, "Explore the dataset", be)
        assert reply == "done exploring"
        warnings = [e for e in events if e.kind == "error"]
        assert warnings and "malformed" not in reply

    def test_unknown_tool_observation(self):
        state = fresh_state()
        be = backend(step("make_plots", "x vs y"),
                     "Final Answer: never mind")
        state, _, events = run(state, "Explore the dataset", be)
        obs = [e for e in events if e.kind == "observation"][0]
        assert "unknown tool" in obs.payload["text"]
        assert "delegate_code" in obs.payload["text"]

    def test_set_target(self):
        state = fresh_state()
        be = backend(step("set_target", "y"), "Final Answer: target is y")
        state, _, _ = run(state, "Explore the dataset", be)
        assert state.target_column == "y"

    def test_set_target_bad_column(self):
        state = fresh_state()
        be = backend(step("set_target", "label"), "Final Answer: hmm")
        state, _, events = run(state, "Explore the dataset", be)
        assert state.target_column is None
        obs = [e for e in events if e.kind == "observation"][0]
        assert "no column" in obs.payload["text"]

    def test_choose_model_before_training(self):
        state = fresh_state()
        be = backend(step("choose_model", "m1"), "Final Answer: oops")
        state, _, events = run(state, "Select the model", be)
        obs = [e for e in events if e.kind == "observation"][0]
        assert "none trained yet" in obs.payload["text"]
        assert state.chosen_model is None

    def test_read_docs(self):
        state = fresh_state()
        be = backend(step("read_docs", "tune"), "Final Answer: read them")
        _, _, events = run(state, "Fine tune the parameters", be)
        obs = [e for e in events if e.kind == "observation"][0]
        assert "strategy random evaluates" in obs.payload["text"]

    def test_step_budget(self):
        state = fresh_state()
        state.config = AgentConfig(max_react_steps=2)
        be = backend(step("inspect", "-"), step("inspect", "-"))
        state, reply, events = run(state, "Explore the dataset", be)
        assert "ran out of reasoning steps" in reply
        assert any(e.payload.get("message") == "E_STEP_BUDGET"
                   for e in events if e.kind == "error")
        assert state.stage == Stage.INIT

    def test_out_of_order_warning(self):
        state = fresh_state()
        state.stage = Stage.TUNED
        be = backend("Final Answer: already explored")
        state, _, events = run(state, "Explore the dataset", be)
        assert state.stage == Stage.TUNED
        assert any("out of order" in e.payload.get("message", "")
                   for e in events if e.kind == "error")

    def test_skip_ahead_still_advances_with_warning(self):
        state = fresh_state()
        be = backend("Final Answer: tuned")
        state, _, events = run(state, "Fine tune the parameters", be)
        assert state.stage == Stage.TUNED
        assert any("skips ahead" in e.payload.get("message", "")
                   for e in events if e.kind == "error")


class TestCodingRepair:
    def test_repair_after_syntax_error(self):
        state = fresh_state()
        be = backend(
            step("delegate_code", "profile the data"),
            fenced("profil train"),  # typo: parse error
            fenced("profile train"),
            "Final Answer: profiled",
        )
        state, reply, events = run(state, "Explore the dataset", be)
        assert reply == "profiled"
        attempts = [e for e in events if e.kind == "script_attempt"]
        assert [a.payload["attempt"] for a in attempts] == [1, 2]
        results = [e for e in events if e.kind == "exec_result"]
        assert [r.payload["ok"] for r in results] == [False, True]

    def test_repair_after_runtime_error_preserves_env(self):
        state = fresh_state()
        state.env.tables["train"] = dt.read_csv("x,y\n1,\n2,3\n3,5\n", "train")
        before = state.env.tables["train"]
        be = backend(
            step("delegate_code", "scale the target"),
            fenced("scale train.y standard"),  # y has a missing value
            fenced("impute train.y with mean\nscale train.y standard"),
            "Final Answer: processed",
        )
        state, reply, _ = run(state, "Process the dataset", be)
        assert reply == "processed"
        assert state.env.tables["train"] is not before
        assert state.env.tables["train"].column("y").missing_count() == 0

    def test_repair_exhausted(self):
        state = fresh_state()
        version = state.env.tables["train"].version
        be = backend(
            step("delegate_code", "do something"),
            "no code at all",
            fenced("bogus statement"),
            fenced("scale train.zzz standard"),
            "Final Answer: the coding agent could not do it",
        )
        state, reply, events = run(state, "Process the dataset", be)
        obs = [e for e in events if e.kind == "observation"][0]
        assert "failed after 3 attempts" in obs.payload["text"]
        assert state.env.tables["train"].version == version
        assert be.calls_made == 5

    def test_multiple_blocks_warns_and_uses_first(self):
        state = fresh_state()
        be = backend(
            step("delegate_code", "profile"),
            "```\nprofile train\n```\nor maybe\n```\ndrop train.x\n```",
            "Final Answer: done",
        )
        state, _, events = run(state, "Explore the dataset", be)
        assert any("code blocks" in e.payload.get("message", "")
                   for e in events if e.kind == "error")
        assert state.env.tables["train"].has_column("x")

    def test_call_count_invariant(self):
        state = fresh_state()
        cfg = state.config
        be = backend(
            step("delegate_code", "train a model"),
            fenced("train linear on train target y as m1"),
            "Final Answer: trained",
        )
        run(state, "Select the model", be)
        bound = cfg.max_react_steps * (1 + cfg.max_repair_attempts)
        assert be.calls_made <= bound


class TestFinalize:
    def _train_two(self, state):
        be = backend(
            step("delegate_code", "train and compare two models"),
            fenced(
                "split train into tr, va ratio 0.8 seed 7\n"
                "train baseline on tr target y as m_base\n"
                "evaluate m_base on va metric rmse\n"
                "train linear on tr target y as m_lin\n"
                "evaluate m_lin on va metric rmse"
            ),
            "Final Answer: linear wins",
        )
        state, _, _ = run(state, "Select the model", be)
        return state

    def test_metric_harvest(self):
        state = self._train_two(fresh_state(with_test=True))
        names = [n for n, _, _ in state.metric_history]
        assert names == ["m_base", "m_lin"]
        metrics = {n: v for n, _, v in state.metric_history}
        assert metrics["m_lin"] < metrics["m_base"]

    def test_fallback_picks_best(self, tmp_path):
        state = self._train_two(fresh_state(with_test=True))
        report = finalize(state, tmp_path, clock=LogicalClock())
        assert report.model_name == "m_lin"
        assert report.chosen_by_fallback is True
        text = (tmp_path / "submission.csv").read_text()
        assert text.startswith("id,prediction\n")
        assert len(text.strip().splitlines()) == 6

    def test_explicit_choice_wins(self, tmp_path):
        state = self._train_two(fresh_state(with_test=True))
        be = backend(step("choose_model", "m_base"),
                     "Final Answer: chose the baseline")
        state, _, _ = run(state, "Select the model", be)
        report = finalize(state, tmp_path, clock=LogicalClock())
        assert report.model_name == "m_base"
        assert report.chosen_by_fallback is False

    def test_report_fields(self, tmp_path):
        state = self._train_two(fresh_state(with_test=True))
        report = finalize(state, tmp_path, clock=LogicalClock())
        data = report.to_json()
        assert data["family"] == "linear"
        assert data["task"] == "regression"
        assert data["target"] == "y"
        assert len(data["metrics"]) == 2
        assert data["artifact"] == "submission.csv"

    def test_no_test_table(self, tmp_path):
        state = self._train_two(fresh_state())
        with pytest.raises(NoTestTable):
            finalize(state, tmp_path)

    def test_no_model(self, tmp_path):
        with pytest.raises(NoModel):
            finalize(fresh_state(with_test=True), tmp_path)
