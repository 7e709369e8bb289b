"""Operator accounts and opaque session tokens for the admin portal API.

Passwords are stored as salted PBKDF2 hashes, never in clear and never
logged. Sessions are random tokens with an idle expiry.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import secrets as pysecrets
import threading
import time
from dataclasses import dataclass
from pathlib import Path

_PBKDF2_ROUNDS = 60_000
MIN_PASSWORD_LENGTH = 8


class AuthError(Exception):
    pass


class BadCredentials(AuthError):
    pass


class WeakPassword(AuthError):
    pass


class InvalidSession(AuthError):
    pass


@dataclass(frozen=True)
class UserAccount:
    username: str
    role: str  # admin | uploader


def _hash_password(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, _PBKDF2_ROUNDS)


class UserStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._users = json.loads(self.path.read_text()) if self.path.exists() else {}

    def _save(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._users, indent=1))
        os.replace(tmp, self.path)

    def ensure_user(self, username: str, password: str, role: str = "uploader") -> None:
        """Create the account if absent; existing passwords are left alone."""
        with self._lock:
            if username in self._users:
                return
            if len(password) < MIN_PASSWORD_LENGTH:
                raise WeakPassword(f"password must be at least {MIN_PASSWORD_LENGTH} characters")
            salt = os.urandom(16)
            self._users[username] = {
                "salt": salt.hex(),
                "hash": _hash_password(password, salt).hex(),
                "role": role,
            }
            self._save()

    def verify(self, username: str, password: str) -> UserAccount:
        with self._lock:
            raw = self._users.get(username)
        if raw is None:
            raise BadCredentials("unknown user or wrong password")
        expected = bytes.fromhex(raw["hash"])
        actual = _hash_password(password, bytes.fromhex(raw["salt"]))
        if not hmac.compare_digest(expected, actual):
            raise BadCredentials("unknown user or wrong password")
        return UserAccount(username=username, role=raw["role"])

    def change_password(self, username: str, current: str, new: str) -> None:
        self.verify(username, current)
        if len(new) < MIN_PASSWORD_LENGTH:
            raise WeakPassword(f"new password must be at least {MIN_PASSWORD_LENGTH} characters")
        with self._lock:
            salt = os.urandom(16)
            self._users[username].update(
                salt=salt.hex(), hash=_hash_password(new, salt).hex()
            )
            self._save()


class SessionStore:
    def __init__(self, idle_ttl_seconds: float = 1800.0):
        self.idle_ttl = idle_ttl_seconds
        self._lock = threading.Lock()
        self._sessions: dict[str, dict] = {}

    def create(self, account: UserAccount) -> str:
        token = pysecrets.token_urlsafe(32)
        with self._lock:
            self._sessions[token] = {
                "username": account.username,
                "role": account.role,
                "last_seen": time.monotonic(),
            }
        return token

    def resolve(self, token: str | None) -> UserAccount:
        if not token:
            raise InvalidSession("missing session token")
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                raise InvalidSession("unknown or expired session")
            if time.monotonic() - session["last_seen"] > self.idle_ttl:
                del self._sessions[token]
                raise InvalidSession("session expired")
            session["last_seen"] = time.monotonic()
            return UserAccount(username=session["username"], role=session["role"])

    def destroy(self, token: str | None) -> None:
        if not token:
            return
        with self._lock:
            self._sessions.pop(token, None)
