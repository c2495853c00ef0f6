"""Core domain types: groups, members, meeting areas, items, comments.

Everything here is a plain dataclass; behaviour lives in the operation
mixins. Records handed to callers are snapshots -- mutating a returned
value never changes server state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum


class GroupAccess(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


class JoinPolicy(str, Enum):
    OPEN_JOIN = "open_join"
    APPROVAL_REQUIRED = "approval_required"


class MemberRole(str, Enum):
    MEMBER = "member"
    MODERATOR = "moderator"


MAX_GROUP_NAME = 100
MAX_TITLE = 200
MAX_SUBJECT = 200
MAX_BODY_BYTES = 256 * 1024


@dataclass
class Member:
    """A registered user. Email is the unique routing key for the mail gateway."""

    user_id: str
    display_name: str
    email: str
    verified: bool = False
    profile: dict[str, str] = field(default_factory=dict)


@dataclass
class Membership:
    user_id: str
    role: MemberRole
    joined_at: datetime
    notifications_enabled: bool = True


@dataclass
class Group:
    id: str
    name: str
    description: str
    access: GroupAccess
    join_policy: JoinPolicy
    creator: str
    created_at: datetime
    members: dict[str, Membership] = field(default_factory=dict)
    area_ids: list[str] = field(default_factory=list)
    # Areas owned by other groups that were linked into this one, in link order.
    linked_area_ids: list[str] = field(default_factory=list)
    pending_joins: dict[str, datetime] = field(default_factory=dict)


@dataclass
class MeetingArea:
    id: str
    owner_group: str
    title: str
    description: str
    creator: str
    created_at: datetime
    linked_groups: list[str] = field(default_factory=list)
    folio: list[str] = field(default_factory=list)
    discussion: list[str] = field(default_factory=list)
    # Ordinals are assigned at creation and never reused, even if display
    # flags change later, so item labels like "6. <title>" stay stable.
    next_ordinal: int = 1


# -- item kinds ----------------------------------------------------------------

@dataclass(frozen=True)
class DocumentItem:
    document_id: str


@dataclass(frozen=True)
class LinkItem:
    url: str
    caption: str = ""


@dataclass(frozen=True)
class DiscussionItem:
    prompt: str


@dataclass(frozen=True)
class PollItem:
    poll_id: str
    binding: bool = False


ItemKind = DocumentItem | LinkItem | DiscussionItem | PollItem


def kind_name(kind: ItemKind) -> str:
    if isinstance(kind, DocumentItem):
        return "document"
    if isinstance(kind, LinkItem):
        return "link"
    if isinstance(kind, DiscussionItem):
        return "discussion"
    if isinstance(kind, PollItem):
        return "decision" if kind.binding else "poll"
    raise TypeError(f"not an item kind: {kind!r}")


@dataclass
class Item:
    id: str
    area: str
    author: str
    created_at: datetime
    title: str
    ordinal: int
    kind: ItemKind
    retracted: bool = False

    @property
    def label(self) -> str:
        return f"{self.ordinal}. {self.title}"


# -- comment targets -----------------------------------------------------------

@dataclass(frozen=True)
class Global:
    pass


@dataclass(frozen=True)
class OnItem:
    item_id: str


@dataclass(frozen=True)
class ReplyTo:
    comment_id: str


@dataclass(frozen=True)
class InText:
    anchor_id: str


CommentTarget = Global | OnItem | ReplyTo | InText


@dataclass
class Comment:
    id: str
    area: str
    author: str
    created_at: datetime
    subject: str
    body: str
    target: CommentTarget
    retracted: bool = False
    # Message id of the email this comment was created from, if any.
    # Doubles as the duplicate-suppression key for the gateway.
    source_message_id: str | None = None


@dataclass(frozen=True)
class ItemReference:
    item_id: str
    anchor_id: str | None
    label: str


@dataclass(frozen=True)
class CommentHeader:
    """Index/reader projection of a comment.

    item_reference is present exactly when the comment targets an item or
    an in-text anchor; it is derived, never stored.
    """

    comment_id: str
    subject: str
    author_name: str
    created_at: datetime
    item_reference: ItemReference | None


@dataclass(frozen=True)
class ActivationState:
    """What the viewer highlights: the active comment and, independently,
    the active item reference with its derived item display."""

    active_comment: str | None = None
    active_reference: str | None = None
    displayed_item: str | None = None
    highlighted_anchor: str | None = None


class IndexOrder(str, Enum):
    CHRONOLOGICAL = "chronological"
    THREADED = "threaded"


class ActivateVia(str, Enum):
    REFERENCE = "reference"
    SUBJECT = "subject"


@dataclass(frozen=True)
class GroupHomepage:
    """The entry view of a group space."""

    group_id: str
    name: str
    description: str
    viewer_is_member: bool
    show_join_link: bool
    areas: tuple[tuple[str, str], ...]          # (area_id, title) in creation order
    linked_areas: tuple[tuple[str, str], ...]   # areas linked in from other groups
