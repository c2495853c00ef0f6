"""The server: every operation mixin bound to one shared state.

Construction wires in the clock, the id source, the mail secret, and an
optional storage backend; when storage is given, existing snapshots are
loaded and every mutation writes the owning group's snapshot back.
"""

from __future__ import annotations

import json
import random
import secrets
import threading
from datetime import datetime, timedelta, timezone
from typing import Callable

from .core import CoreOps
from .decisions import DecisionOps
from .documents import DEFAULT_UPLOAD_CAP, DocumentOps
from .mailgate import MailGateway
from .model import Member
from .service import (
    DEFAULT_SESSION_LIFETIME,
    ServiceOps,
    canonical_json,
    materialize_group,
    serialize_group_payload,
    serialize_user,
    _parse_dt,
)
from .state import FeedbackRecord, PasswordHash, ServerState
from .storage import Storage

DEFAULT_SCRYPT_COST = 2**14


class Server(CoreOps, DocumentOps, DecisionOps, MailGateway, ServiceOps):
    def __init__(
        self,
        *,
        storage: Storage | None = None,
        clock: Callable[[], datetime] | None = None,
        rng: random.Random | None = None,
        mail_secret: str | bytes | None = None,
        mail_domain: str = "convene.local",
        mailbox_name: str = "post",
        base_url: str = "http://localhost:8080",
        session_lifetime: timedelta = DEFAULT_SESSION_LIFETIME,
        upload_cap: int = DEFAULT_UPLOAD_CAP,
        scrypt_cost: int = DEFAULT_SCRYPT_COST,
        operators: tuple[str, ...] = (),
    ) -> None:
        self._state = ServerState()
        self._storage = storage
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._rng = rng or random.Random(secrets.randbits(64))
        self._mail_domain = mail_domain
        self._mailbox_name = mailbox_name
        self._base_url = base_url.rstrip("/")
        self._session_lifetime = session_lifetime
        self._upload_cap = upload_cap
        self._scrypt_cost = scrypt_cost
        self._operators = {email.strip().lower() for email in operators}
        self._loading = False
        self._mail_secret = self._resolve_mail_secret(mail_secret)
        if storage is not None:
            self._load()

    # -- plumbing shared by the mixins --

    def _now(self) -> datetime:
        now = self._clock()
        if now.tzinfo is None:
            now = now.replace(tzinfo=timezone.utc)
        return now

    def _new_id(self, prefix: str) -> str:
        with self._state.registry_lock:
            while True:
                candidate = f"{prefix}{self._rng.getrandbits(48):012x}"
                if candidate not in self._state.used_ids:
                    self._state.used_ids.add(candidate)
                    return candidate

    def _group_lock(self, group_id: str) -> threading.RLock:
        with self._state.registry_lock:
            return self._state.locks.setdefault(group_id, threading.RLock())

    @property
    def state(self) -> ServerState:
        return self._state

    # -- persistence --

    def _persist_group(self, group_id: str) -> None:
        if self._storage is None or self._loading:
            return
        group = self._state.groups.get(group_id)
        if group is None:
            return
        _, payload = serialize_group_payload(
            self._state, group, include_secret_ballots=True
        )
        self._storage.put(f"group:{group_id}", canonical_json(payload))

    def _persist_users(self) -> None:
        if self._storage is None or self._loading:
            return
        users = [
            serialize_user(self._state.users[uid])
            for uid in sorted(self._state.users)
        ]
        credentials = {
            uid: {
                "salt": cred.salt.hex(),
                "n": cred.n,
                "r": cred.r,
                "p": cred.p,
                "digest": cred.digest.hex(),
            }
            for uid, cred in sorted(self._state.credentials.items())
        }
        self._storage.put(
            "users", canonical_json({"users": users, "credentials": credentials})
        )

    def _persist_platform_feedback(self) -> None:
        if self._storage is None or self._loading:
            return
        records = sorted(
            (
                r
                for r in self._state.feedback.values()
                if r.scope == "platform"
            ),
            key=lambda r: (r.created_at, r.id),
        )
        payload = [
            {
                "id": r.id,
                "author": r.author,
                "anonymous": r.anonymous,
                "rating": r.rating,
                "text": r.text,
                "created_at": r.created_at.isoformat(),
            }
            for r in records
        ]
        self._storage.put("platform_feedback", canonical_json(payload))

    def _resolve_mail_secret(self, given: str | bytes | None) -> bytes:
        if isinstance(given, bytes):
            secret = given
        elif isinstance(given, str):
            secret = given.encode("utf-8")
        else:
            secret = None
        if secret:
            return secret
        if self._storage is not None:
            stored = self._storage.get("mail_secret")
            if stored:
                return bytes.fromhex(stored)
            fresh = secrets.token_bytes(32)
            self._storage.put("mail_secret", fresh.hex())
            return fresh
        return secrets.token_bytes(32)

    def _load(self) -> None:
        self._loading = True
        try:
            state = self._state
            raw_users = self._storage.get("users")
            if raw_users:
                payload = json.loads(raw_users)
                for entry in payload["users"]:
                    user = Member(
                        user_id=entry["user_id"],
                        display_name=entry["display_name"],
                        email=entry["email"],
                        verified=entry.get("verified", False),
                        profile=dict(entry.get("profile", {})),
                    )
                    state.users[user.user_id] = user
                    state.users_by_email[user.email] = user.user_id
                    state.used_ids.add(user.user_id)
                for uid, cred in payload.get("credentials", {}).items():
                    state.credentials[uid] = PasswordHash(
                        salt=bytes.fromhex(cred["salt"]),
                        n=cred["n"],
                        r=cred["r"],
                        p=cred["p"],
                        digest=bytes.fromhex(cred["digest"]),
                    )
            for _, raw in self._storage.items("group:"):
                staged = materialize_group([], json.loads(raw))
                state.groups[staged.group.id] = staged.group
                state.groups_by_name[staged.group.name] = staged.group.id
                state.used_ids.add(staged.group.id)
                for mapping, store in (
                    (staged.areas, state.areas),
                    (staged.items, state.items),
                    (staged.comments, state.comments),
                    (staged.documents, state.documents),
                    (staged.anchors, state.anchors),
                    (staged.polls, state.polls),
                    (staged.feedback, state.feedback),
                ):
                    for record_id, record in mapping.items():
                        store[record_id] = record
                        state.used_ids.add(record_id)
            # Derived structures: inbound-mail dedup and homepage back-links
            # for areas linked across groups, in a stable order.
            for comment in state.comments.values():
                if comment.source_message_id is not None:
                    state.comments_by_source[comment.source_message_id] = comment.id
            groups_in_order = sorted(
                state.groups.values(), key=lambda g: (g.created_at, g.id)
            )
            for group in groups_in_order:
                for area_id in group.area_ids:
                    for linked_id in state.areas[area_id].linked_groups:
                        other = state.groups.get(linked_id)
                        if other is not None and area_id not in other.linked_area_ids:
                            other.linked_area_ids.append(area_id)
            raw_feedback = self._storage.get("platform_feedback")
            if raw_feedback:
                for entry in json.loads(raw_feedback):
                    record = FeedbackRecord(
                        id=entry["id"],
                        author=entry.get("author"),
                        anonymous=entry.get("anonymous", False),
                        scope="platform",
                        group_id=None,
                        rating=entry["rating"],
                        text=entry["text"],
                        created_at=_parse_dt(entry["created_at"]),
                    )
                    state.feedback[record.id] = record
                    state.used_ids.add(record.id)
        finally:
            self._loading = False

    def close(self) -> None:
        if self._storage is not None:
            self._storage.close()
