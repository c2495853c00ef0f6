"""The in-memory registry every operation mixin works against.

One instance per server. Mutations inside one group space are serialized
by that group's writer lock; the registry lock guards cross-group maps
(users, group names, id allocation).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime

from .decisions import PollRecord
from .documents import Anchor, DocumentRecord
from .model import Comment, Group, Item, MeetingArea, Member


@dataclass
class PasswordHash:
    salt: bytes
    n: int
    r: int
    p: int
    digest: bytes


@dataclass
class Session:
    token: str
    user_id: str
    issued_at: datetime
    expires_at: datetime


@dataclass
class FeedbackRecord:
    id: str
    author: str
    anonymous: bool
    scope: str  # "group" | "platform"
    group_id: str | None
    rating: int
    text: str
    created_at: datetime


@dataclass
class ServerState:
    users: dict[str, Member] = field(default_factory=dict)
    users_by_email: dict[str, str] = field(default_factory=dict)
    credentials: dict[str, PasswordHash] = field(default_factory=dict)
    groups: dict[str, Group] = field(default_factory=dict)
    groups_by_name: dict[str, str] = field(default_factory=dict)
    areas: dict[str, MeetingArea] = field(default_factory=dict)
    items: dict[str, Item] = field(default_factory=dict)
    comments: dict[str, Comment] = field(default_factory=dict)
    documents: dict[str, DocumentRecord] = field(default_factory=dict)
    anchors: dict[str, Anchor] = field(default_factory=dict)
    polls: dict[str, PollRecord] = field(default_factory=dict)
    feedback: dict[str, FeedbackRecord] = field(default_factory=dict)
    sessions: dict[str, Session] = field(default_factory=dict)
    auth_failures: dict[str, list[datetime]] = field(default_factory=dict)
    # Message id -> comment id for every accepted posting, rebuilt from
    # comments on load; the key set doubles as duplicate suppression.
    comments_by_source: dict[str, str] = field(default_factory=dict)
    # (event kind, object id) -> message id of the notification, for reply
    # threading of outbound mail.
    notified: dict[tuple[str, str], str] = field(default_factory=dict)
    outbox: list = field(default_factory=list)
    used_ids: set[str] = field(default_factory=set)
    locks: dict[str, threading.RLock] = field(default_factory=dict)
    registry_lock: threading.RLock = field(default_factory=threading.RLock)
