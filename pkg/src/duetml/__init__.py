"""duetml: a dual-agent AutoML framework.

A Reasoning agent plans a four-stage pipeline (explore, process, select,
tune) from conversational instructions; a Coding agent writes, executes,
and repairs pipeline scripts against a native data/ML toolkit. Everything
is deterministic and offline-testable via scripted LLM backends.
"""

__version__ = "0.1.0"
