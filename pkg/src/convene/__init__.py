"""Convene: a deliberation server for small groups.

Group spaces hold meeting areas; each area carries a folio of items
(documents, links, discussion prompts, polls, decisions) and a discussion
of comments that can target the whole area, an item, another comment, or a
blank-space anchor inside a plain-text document. Members participate over
HTTP or by email, and a group can take its records with it: export/import
round-trips the whole space.
"""

from . import errors
from .core import PendingJoin
from .decisions import (
    ApprovalSet,
    Ballot,
    Consent,
    ConsentStance,
    Outcome,
    PollSpec,
    PollStatus,
    Procedure,
    SingleChoice,
    Tally,
    VoteChoice,
    YesNoAbstain,
)
from .documents import (
    Anchor,
    AnnotatedSegment,
    DocumentRevision,
    PlainTextSource,
    ReferenceMarker,
    TextRun,
    UploadedSource,
    lcs_alignment,
    remap_anchor,
    snap_to_whitespace,
)
from .mailgate import (
    InboundPosting,
    MailImportReport,
    NotificationEvent,
    NotifyKind,
    OutboundMessage,
    RoutingTarget,
)
from .model import (
    ActivateVia,
    ActivationState,
    Comment,
    CommentHeader,
    DiscussionItem,
    DocumentItem,
    Global,
    Group,
    GroupAccess,
    GroupHomepage,
    IndexOrder,
    InText,
    Item,
    ItemReference,
    JoinPolicy,
    LinkItem,
    MeetingArea,
    Member,
    MemberRole,
    Membership,
    OnItem,
    PollItem,
    ReplyTo,
)
from .server import Server
from .service import AuthAction, ExportBundle, FORMAT_VERSION
from .storage import MemoryStorage, SqliteStorage

__version__ = "0.1.0"

__all__ = [
    "ActivateVia",
    "ActivationState",
    "Anchor",
    "AnnotatedSegment",
    "ApprovalSet",
    "AuthAction",
    "Ballot",
    "Comment",
    "CommentHeader",
    "Consent",
    "ConsentStance",
    "DiscussionItem",
    "DocumentItem",
    "DocumentRevision",
    "ExportBundle",
    "FORMAT_VERSION",
    "Global",
    "Group",
    "GroupAccess",
    "GroupHomepage",
    "InboundPosting",
    "IndexOrder",
    "InText",
    "Item",
    "ItemReference",
    "JoinPolicy",
    "LinkItem",
    "MailImportReport",
    "MeetingArea",
    "Member",
    "MemberRole",
    "Membership",
    "MemoryStorage",
    "NotificationEvent",
    "NotifyKind",
    "OnItem",
    "Outcome",
    "OutboundMessage",
    "PendingJoin",
    "PlainTextSource",
    "PollItem",
    "PollSpec",
    "PollStatus",
    "Procedure",
    "ReferenceMarker",
    "ReplyTo",
    "RoutingTarget",
    "Server",
    "SingleChoice",
    "SqliteStorage",
    "Tally",
    "TextRun",
    "UploadedSource",
    "VoteChoice",
    "YesNoAbstain",
    "errors",
    "lcs_alignment",
    "remap_anchor",
    "snap_to_whitespace",
]
