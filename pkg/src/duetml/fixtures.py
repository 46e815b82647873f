"""Canonical scripted-backend fixtures for the bundled datasets.

Each fixture is the full, ordered completion sequence for the four
canonical instructions ("Explore the dataset", "Process the dataset",
"Select the model", "Fine tune the parameters"): reasoning-agent steps
interleaved with coding-agent scripts. Expect substrings pin entries to
the request that should consume them, so any drift in the flow fails
loudly instead of misaligning silently.
"""

from __future__ import annotations

from pathlib import Path

from .llm_backend import FixtureEntry, write_fixture

FIXTURE_NAMES = ("reg_fixture.jsonl", "clf_fixture.jsonl")


def _step(action: str, action_input: str, thought: str = "") -> str:
    lines = []
    if thought:
        lines.append(f"Thought: {thought}")
    lines += [f"Action: {action}", f"Action Input: {action_input}"]
    return "\n".join(lines)


def _code(script: str) -> str:
    return f"```\n{script}\n```"


def regression_fixture() -> list[FixtureEntry]:
    return [
        # Explore the dataset
        FixtureEntry(_step("delegate_code", "profile the training table",
                           "start by profiling"),
                     "Explore the dataset"),
        FixtureEntry(_code("profile train"), "profile the training table"),
        FixtureEntry("Final Answer: The training table has 400 rows and 4 "
                     "columns (x1, x2, x3 and the numeric target y); x3 has "
                     "a few missing values.",
                     "ok line 1"),
        # Process the dataset
        FixtureEntry(_step("delegate_code",
                           "fill the missing values in column x3 of the "
                           "train table with the median",
                           "only x3 needs imputation"),
                     "Process the dataset"),
        FixtureEntry(_code("impute train.x3 with median"),
                     "fill the missing values"),
        FixtureEntry("Final Answer: Filled the missing x3 values with the "
                     "median; the table is now fully numeric and complete.",
                     "ok line 1"),
        # Select the model
        FixtureEntry(_step("set_target", "y", "record the target first"),
                     "Select the model"),
        FixtureEntry(_step("delegate_code",
                           "hold out a validation split and compare "
                           "baseline, tree, and linear models on rmse"),
                     "target column set to y"),
        FixtureEntry(_code(
            "split train into tr, va ratio 0.8 seed 7\n"
            "train baseline on tr target y as m_base\n"
            "evaluate m_base on va metric rmse\n"
            "train tree on tr target y as m_tree\n"
            "evaluate m_tree on va metric rmse\n"
            "train linear on tr target y as m_lin\n"
            "evaluate m_lin on va metric rmse"
        ), "compare baseline, tree, and linear"),
        FixtureEntry("Final Answer: Linear regression clearly wins the "
                     "holdout comparison, as expected for this data.",
                     "rmse="),
        # Fine tune the parameters
        FixtureEntry(_step("delegate_code",
                           "tune the ridge penalty of a linear model with "
                           "cross-validation and keep the best fit",
                           "only l2 matters for the linear family"),
                     "Fine tune the parameters"),
        FixtureEntry(_code(
            "tune linear on train target y metric rmse budget 8 cv 3 "
            "strategy halving space { l2: loguniform(1e-8, 1.0) } as m_final"
        ), "tune the ridge penalty"),
        FixtureEntry(_step("choose_model", "m_final",
                           "the tuned model is the final one"),
                     "model m_final"),
        FixtureEntry("Final Answer: Tuned the ridge penalty with "
                     "cross-validated successive halving and chose the "
                     "tuned linear model for the final predictions.",
                     "chosen model set to m_final"),
    ]


def classification_fixture() -> list[FixtureEntry]:
    return [
        # Explore the dataset
        FixtureEntry(_step("delegate_code", "profile the training table",
                           "start by profiling"),
                     "Explore the dataset"),
        FixtureEntry(_code("profile train"), "profile the training table"),
        FixtureEntry("Final Answer: The training table has 400 rows and 6 "
                     "columns; the label is binary and n1 has a few missing "
                     "values.",
                     "ok line 1"),
        # Process the dataset
        FixtureEntry(_step("delegate_code",
                           "fill the missing values in column n1 of the "
                           "train table with the median",
                           "only n1 needs imputation"),
                     "Process the dataset"),
        FixtureEntry(_code("impute train.n1 with median"),
                     "fill the missing values"),
        FixtureEntry("Final Answer: Filled the missing n1 values with the "
                     "median; all features are numeric and complete.",
                     "ok line 1"),
        # Select the model
        FixtureEntry(_step("set_target", "label",
                           "record the target first"),
                     "Select the model"),
        FixtureEntry(_step("delegate_code",
                           "hold out a validation split and compare "
                           "baseline, tree, and logistic models on auc"),
                     "target column set to label"),
        FixtureEntry(_code(
            "split train into tr, va ratio 0.8 seed 7\n"
            "train baseline on tr target label as m_base\n"
            "evaluate m_base on va metric auc\n"
            "train tree on tr target label as m_tree\n"
            "evaluate m_tree on va metric auc\n"
            "train logistic on tr target label as m_logit\n"
            "evaluate m_logit on va metric auc"
        ), "compare baseline, tree, and logistic"),
        FixtureEntry("Final Answer: Logistic regression ranks the holdout "
                     "best by AUC; the noise columns look uninformative.",
                     "auc="),
        # Fine tune the parameters
        FixtureEntry(_step("delegate_code",
                           "drop the noise columns n1, n2, n3 from both "
                           "tables, then tune a logistic model on auc with "
                           "cross-validation",
                           "shrink to the informative features, then tune"),
                     "Fine tune the parameters"),
        FixtureEntry(_code(
            "drop train.n1\n"
            "drop train.n2\n"
            "drop train.n3\n"
            "drop test.n1\n"
            "drop test.n2\n"
            "drop test.n3\n"
            "tune logistic on train target label metric auc budget 8 cv 3 "
            "strategy halving space { lr: loguniform(0.01, 1.0), "
            "epochs: int(200, 800), l2: loguniform(1e-6, 0.1) } as m_final"
        ), "drop the noise columns"),
        FixtureEntry(_step("choose_model", "m_final",
                           "the tuned model is the final one"),
                     "model m_final"),
        FixtureEntry("Final Answer: Dropped the three noise features, tuned "
                     "the logistic learning rate, epochs, and penalty, and "
                     "chose the tuned model for the final predictions.",
                     "chosen model set to m_final"),
    ]


def generate_fixtures() -> dict[str, list[FixtureEntry]]:
    return {
        "reg_fixture.jsonl": regression_fixture(),
        "clf_fixture.jsonl": classification_fixture(),
    }


def write_fixtures(directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, entries in generate_fixtures().items():
        write_fixture(directory / name, entries)
