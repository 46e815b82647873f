from .manager import Journal, Session, SessionManager, replay_journal
from .http import build_app

__all__ = ["Journal", "Session", "SessionManager", "replay_journal",
           "build_app"]
