from .app import create_app
from .auth import (
    BadCredentials,
    InvalidSession,
    SessionStore,
    UserAccount,
    UserStore,
    WeakPassword,
)

__all__ = [
    "BadCredentials",
    "InvalidSession",
    "SessionStore",
    "UserAccount",
    "UserStore",
    "WeakPassword",
    "create_app",
]
