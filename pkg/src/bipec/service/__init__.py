from .app import create_app, serve
from .core import FeedbackService
from .store import ConfigVersion, Detection, EventLogStore, VerdictStatus

__all__ = [
    "ConfigVersion",
    "Detection",
    "EventLogStore",
    "FeedbackService",
    "VerdictStatus",
    "create_app",
    "serve",
]
