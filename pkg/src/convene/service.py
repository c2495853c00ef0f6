"""Sessions, access decisions, group export/import, and the feedback channel.

Export bundles are canonical JSON: sorted keys, no whitespace, stable list
orders (folio order, discussion order, everything else sorted by id). A
bundle is self-contained -- every user a record points at rides along --
so importing it into a fresh server reproduces the group byte-for-byte on
re-export, modulo the `exported_at` stamp.
"""

from __future__ import annotations

import copy
import hashlib
import hmac
import json
import secrets
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum

from .decisions import (
    ApprovalSet,
    Ballot,
    Consent,
    ConsentStance,
    Outcome,
    PollRecord,
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
    DocumentRecord,
    DocumentRevision,
    PlainTextSource,
    UploadedSource,
)
from .errors import (
    BadCredentials,
    DuplicateEmail,
    DuplicateName,
    IntegrityViolation,
    InvalidName,
    InvalidRating,
    NotAuthorized,
    RateLimited,
    Unauthenticated,
    UnsupportedVersion,
)
from .integrity import validate_group_integrity
from .model import (
    Comment,
    DiscussionItem,
    DocumentItem,
    Global,
    Group,
    GroupAccess,
    InText,
    Item,
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
from .state import FeedbackRecord, PasswordHash, ServerState, Session

FORMAT_VERSION = 1
RATE_LIMIT_WINDOW_SECONDS = 60
RATE_LIMIT_MAX_FAILURES = 10
DEFAULT_SESSION_LIFETIME = timedelta(days=14)


class AuthAction(str, Enum):
    READ = "read"
    POST = "post"
    MODERATE = "moderate"


# -- password hashing ------------------------------------------------------------

def hash_password(secret: str, cost: int) -> PasswordHash:
    salt = secrets.token_bytes(16)
    digest = hashlib.scrypt(
        secret.encode("utf-8"), salt=salt, n=cost, r=8, p=1, dklen=32
    )
    return PasswordHash(salt=salt, n=cost, r=8, p=1, digest=digest)


def verify_password(stored: PasswordHash, secret: str) -> bool:
    digest = hashlib.scrypt(
        secret.encode("utf-8"),
        salt=stored.salt,
        n=stored.n,
        r=stored.r,
        p=stored.p,
        dklen=len(stored.digest),
    )
    return hmac.compare_digest(digest, stored.digest)


# -- canonical serialization -------------------------------------------------------

def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


def _dt(value: datetime | None) -> str | None:
    return value.isoformat() if value is not None else None


def _parse_dt(value: str | None) -> datetime | None:
    return datetime.fromisoformat(value) if value else None


def _serialize_kind(kind) -> dict:
    if isinstance(kind, DocumentItem):
        return {"kind": "document", "document_id": kind.document_id}
    if isinstance(kind, LinkItem):
        return {"kind": "link", "url": kind.url, "caption": kind.caption}
    if isinstance(kind, DiscussionItem):
        return {"kind": "discussion", "prompt": kind.prompt}
    if isinstance(kind, PollItem):
        return {
            "kind": "decision" if kind.binding else "poll",
            "poll_id": kind.poll_id,
        }
    raise TypeError(f"unserializable item kind: {kind!r}")


def _parse_kind(payload: dict):
    kind = payload["kind"]
    if kind == "document":
        return DocumentItem(payload["document_id"])
    if kind == "link":
        return LinkItem(payload["url"], payload.get("caption", ""))
    if kind == "discussion":
        return DiscussionItem(payload["prompt"])
    if kind in ("poll", "decision"):
        return PollItem(payload["poll_id"], binding=kind == "decision")
    raise ValueError(f"unknown item kind {kind!r}")


def _serialize_target(target) -> dict:
    if isinstance(target, Global):
        return {"kind": "global"}
    if isinstance(target, OnItem):
        return {"kind": "on_item", "item_id": target.item_id}
    if isinstance(target, ReplyTo):
        return {"kind": "reply_to", "comment_id": target.comment_id}
    if isinstance(target, InText):
        return {"kind": "in_text", "anchor_id": target.anchor_id}
    raise TypeError(f"unserializable target: {target!r}")


def _parse_target(payload: dict):
    kind = payload["kind"]
    if kind == "global":
        return Global()
    if kind == "on_item":
        return OnItem(payload["item_id"])
    if kind == "reply_to":
        return ReplyTo(payload["comment_id"])
    if kind == "in_text":
        return InText(payload["anchor_id"])
    raise ValueError(f"unknown comment target {kind!r}")


def _serialize_source(source) -> dict:
    if isinstance(source, PlainTextSource):
        return {"type": "plain_text", "text": source.text}
    import base64

    return {
        "type": "upload",
        "filename": source.filename,
        "media_type": source.media_type,
        "blob_b64": base64.b64encode(source.blob).decode("ascii"),
    }


def _parse_source(payload: dict):
    if payload["type"] == "plain_text":
        return PlainTextSource(payload["text"])
    import base64

    return UploadedSource(
        blob=base64.b64decode(payload["blob_b64"]),
        filename=payload["filename"],
        media_type=payload["media_type"],
    )


def _serialize_content(content) -> dict:
    if isinstance(content, YesNoAbstain):
        return {"kind": "yes_no_abstain", "choice": content.choice.value}
    if isinstance(content, SingleChoice):
        return {"kind": "single_choice", "option": content.option}
    if isinstance(content, ApprovalSet):
        return {"kind": "approval_set", "options": sorted(content.options)}
    if isinstance(content, Consent):
        return {
            "kind": "consent",
            "stance": content.stance.value,
            "reason": content.reason,
        }
    raise TypeError(f"unserializable ballot content: {content!r}")


def _parse_content(payload: dict):
    kind = payload["kind"]
    if kind == "yes_no_abstain":
        return YesNoAbstain(VoteChoice(payload["choice"]))
    if kind == "single_choice":
        return SingleChoice(payload["option"])
    if kind == "approval_set":
        return ApprovalSet(frozenset(payload["options"]))
    if kind == "consent":
        return Consent(ConsentStance(payload["stance"]), payload.get("reason"))
    raise ValueError(f"unknown ballot content {kind!r}")


def _serialize_tally(tally: Tally | None) -> dict | None:
    if tally is None:
        return None
    return {
        "counts": dict(tally.counts),
        "participation": tally.participation,
        "eligible_count": tally.eligible_count,
        "quorum_met": tally.quorum_met,
        "computed_at": _dt(tally.computed_at),
    }


def _parse_tally(payload: dict | None) -> Tally | None:
    if payload is None:
        return None
    return Tally(
        counts=dict(payload["counts"]),
        participation=payload["participation"],
        eligible_count=payload["eligible_count"],
        quorum_met=payload["quorum_met"],
        computed_at=_parse_dt(payload["computed_at"]),
    )


def _serialize_outcome(outcome: Outcome | None) -> dict | None:
    if outcome is None:
        return None
    return {
        "status": outcome.status.value,
        "winner": outcome.winner,
        "tied": list(outcome.tied) if outcome.tied is not None else None,
        "closed_at": _dt(outcome.closed_at),
    }


def _parse_outcome(payload: dict | None) -> Outcome | None:
    if payload is None:
        return None
    return Outcome(
        status=PollStatus(payload["status"]),
        winner=payload.get("winner"),
        tied=tuple(payload["tied"]) if payload.get("tied") is not None else None,
        closed_at=_parse_dt(payload.get("closed_at")),
    )


def serialize_user(member: Member) -> dict:
    return {
        "user_id": member.user_id,
        "display_name": member.display_name,
        "email": member.email,
        "verified": member.verified,
        "profile": dict(member.profile),
    }


def serialize_group_payload(
    state: ServerState, group: Group, include_secret_ballots: bool
) -> tuple[list[dict], dict]:
    """The (users, group) sections of a bundle.

    Secret-poll ballots are dropped unless `include_secret_ballots`; the
    stored final tally and outcome still ride along, so closed results
    survive migration without exposing individual votes.
    """
    referenced: set[str] = {group.creator}
    referenced.update(group.members)
    referenced.update(group.pending_joins)

    areas = []
    for area_id in group.area_ids:
        area = state.areas[area_id]
        referenced.add(area.creator)
        items = []
        documents = []
        polls = []
        for item_id in area.folio:
            item = state.items[item_id]
            referenced.add(item.author)
            items.append(
                {
                    "id": item.id,
                    "author": item.author,
                    "created_at": _dt(item.created_at),
                    "title": item.title,
                    "ordinal": item.ordinal,
                    "retracted": item.retracted,
                    "kind": _serialize_kind(item.kind),
                }
            )
            if isinstance(item.kind, DocumentItem):
                record = state.documents[item.kind.document_id]
                revisions = []
                for revision in record.revisions:
                    referenced.add(revision.author)
                    revisions.append(
                        {
                            "revision": revision.revision,
                            "author": revision.author,
                            "created_at": _dt(revision.created_at),
                            "source": _serialize_source(revision.source),
                        }
                    )
                anchors = []
                for anchor_id in record.anchor_ids:
                    anchor = state.anchors[anchor_id]
                    anchors.append(
                        {
                            "anchor_id": anchor.anchor_id,
                            "created_on_revision": anchor.created_on_revision,
                            "comment_id": anchor.comment_id,
                            "offsets": {
                                str(rev): off for rev, off in anchor.offsets.items()
                            },
                        }
                    )
                documents.append(
                    {
                        "document_id": record.document_id,
                        "item_id": record.item_id,
                        "revisions": revisions,
                        "anchors": anchors,
                    }
                )
            elif isinstance(item.kind, PollItem):
                poll = state.polls[item.kind.poll_id]
                referenced.add(poll.author)
                referenced.update(poll.eligible)
                ballots = None
                if include_secret_ballots or poll.spec.open_ballots:
                    ballots = []
                    for voter in sorted(poll.ballots):
                        ballot = poll.ballots[voter]
                        referenced.add(voter)
                        ballots.append(
                            {
                                "voter": ballot.voter,
                                "cast_at": _dt(ballot.cast_at),
                                "content": _serialize_content(ballot.content),
                            }
                        )
                polls.append(
                    {
                        "poll_id": poll.poll_id,
                        "item_id": poll.item_id,
                        "author": poll.author,
                        "opened_at": _dt(poll.opened_at),
                        "spec": {
                            "question": poll.spec.question,
                            "procedure": poll.spec.procedure.value,
                            "options": list(poll.spec.options),
                            "binding": poll.spec.binding,
                            "deadline": _dt(poll.spec.deadline),
                            "quorum": poll.spec.quorum,
                            "open_ballots": poll.spec.open_ballots,
                        },
                        "eligible": sorted(poll.eligible),
                        "ballots": ballots,
                        "closed": poll.closed,
                        "outcome": _serialize_outcome(poll.outcome),
                        "final_tally": _serialize_tally(poll.final_tally),
                    }
                )
        comments = []
        for comment_id in area.discussion:
            comment = state.comments[comment_id]
            referenced.add(comment.author)
            comments.append(
                {
                    "id": comment.id,
                    "author": comment.author,
                    "created_at": _dt(comment.created_at),
                    "subject": comment.subject,
                    "body": comment.body,
                    "retracted": comment.retracted,
                    "source_message_id": comment.source_message_id,
                    "target": _serialize_target(comment.target),
                }
            )
        areas.append(
            {
                "id": area.id,
                "owner_group": area.owner_group,
                "title": area.title,
                "description": area.description,
                "creator": area.creator,
                "created_at": _dt(area.created_at),
                "linked_groups": list(area.linked_groups),
                "next_ordinal": area.next_ordinal,
                "items": items,
                "comments": comments,
                "documents": documents,
                "polls": polls,
            }
        )

    feedback = []
    group_feedback = sorted(
        (
            record
            for record in state.feedback.values()
            if record.scope == "group" and record.group_id == group.id
        ),
        key=lambda record: (record.created_at, record.id),
    )
    for record in group_feedback:
        if not record.anonymous and record.author is not None:
            referenced.add(record.author)
        feedback.append(
            {
                "id": record.id,
                "author": None if record.anonymous else record.author,
                "anonymous": record.anonymous,
                "rating": record.rating,
                "text": record.text,
                "created_at": _dt(record.created_at),
            }
        )

    users = [
        serialize_user(state.users[user_id])
        for user_id in sorted(referenced)
        if user_id in state.users
    ]
    group_payload = {
        "id": group.id,
        "name": group.name,
        "description": group.description,
        "access": group.access.value,
        "join_policy": group.join_policy.value,
        "creator": group.creator,
        "created_at": _dt(group.created_at),
        "members": [
            {
                "user_id": m.user_id,
                "role": m.role.value,
                "joined_at": _dt(m.joined_at),
                "notifications_enabled": m.notifications_enabled,
            }
            for m in (group.members[uid] for uid in sorted(group.members))
        ],
        "pending_joins": [
            {"user_id": uid, "requested_at": _dt(group.pending_joins[uid])}
            for uid in sorted(group.pending_joins)
        ],
        "areas": areas,
        "feedback": feedback,
    }
    return users, group_payload


@dataclass(frozen=True)
class ExportBundle:
    payload: dict

    @property
    def format_version(self) -> int:
        return self.payload["format_version"]

    def to_json(self) -> str:
        return canonical_json(self.payload)

    def to_bytes(self) -> bytes:
        return self.to_json().encode("utf-8")


@dataclass
class _StagedGroup:
    group: Group
    areas: dict[str, MeetingArea]
    items: dict[str, Item]
    comments: dict[str, Comment]
    documents: dict[str, DocumentRecord]
    anchors: dict[str, Anchor]
    polls: dict[str, PollRecord]
    feedback: dict[str, FeedbackRecord]
    users: dict[str, Member]


def materialize_group(users_payload: list[dict], payload: dict) -> _StagedGroup:
    """Rebuild one group's records from bundle payloads.

    Shape errors surface as IntegrityViolation; semantic invariants are
    checked afterwards by validate_group_integrity.
    """
    try:
        users = {
            u["user_id"]: Member(
                user_id=u["user_id"],
                display_name=u["display_name"],
                email=u["email"],
                verified=bool(u.get("verified", False)),
                profile=dict(u.get("profile", {})),
            )
            for u in users_payload
        }
        group = Group(
            id=payload["id"],
            name=payload["name"],
            description=payload["description"],
            access=GroupAccess(payload["access"]),
            join_policy=JoinPolicy(payload["join_policy"]),
            creator=payload["creator"],
            created_at=_parse_dt(payload["created_at"]),
        )
        for m in payload["members"]:
            group.members[m["user_id"]] = Membership(
                user_id=m["user_id"],
                role=MemberRole(m["role"]),
                joined_at=_parse_dt(m["joined_at"]),
                notifications_enabled=bool(m.get("notifications_enabled", True)),
            )
        for p in payload.get("pending_joins", []):
            group.pending_joins[p["user_id"]] = _parse_dt(p["requested_at"])
        staged = _StagedGroup(
            group=group,
            areas={},
            items={},
            comments={},
            documents={},
            anchors={},
            polls={},
            feedback={},
            users=users,
        )
        for area_payload in payload["areas"]:
            area = MeetingArea(
                id=area_payload["id"],
                owner_group=area_payload["owner_group"],
                title=area_payload["title"],
                description=area_payload["description"],
                creator=area_payload["creator"],
                created_at=_parse_dt(area_payload["created_at"]),
                linked_groups=list(area_payload.get("linked_groups", [])),
                next_ordinal=area_payload["next_ordinal"],
            )
            staged.areas[area.id] = area
            group.area_ids.append(area.id)
            for item_payload in area_payload["items"]:
                item = Item(
                    id=item_payload["id"],
                    area=area.id,
                    author=item_payload["author"],
                    created_at=_parse_dt(item_payload["created_at"]),
                    title=item_payload["title"],
                    ordinal=item_payload["ordinal"],
                    kind=_parse_kind(item_payload["kind"]),
                    retracted=bool(item_payload.get("retracted", False)),
                )
                staged.items[item.id] = item
                area.folio.append(item.id)
            for comment_payload in area_payload["comments"]:
                comment = Comment(
                    id=comment_payload["id"],
                    area=area.id,
                    author=comment_payload["author"],
                    created_at=_parse_dt(comment_payload["created_at"]),
                    subject=comment_payload["subject"],
                    body=comment_payload["body"],
                    target=_parse_target(comment_payload["target"]),
                    retracted=bool(comment_payload.get("retracted", False)),
                    source_message_id=comment_payload.get("source_message_id"),
                )
                staged.comments[comment.id] = comment
                area.discussion.append(comment.id)
            for document_payload in area_payload.get("documents", []):
                record = DocumentRecord(
                    document_id=document_payload["document_id"],
                    area_id=area.id,
                    item_id=document_payload["item_id"],
                )
                for rev_payload in document_payload["revisions"]:
                    record.revisions.append(
                        DocumentRevision(
                            document_id=record.document_id,
                            revision=rev_payload["revision"],
                            source=_parse_source(rev_payload["source"]),
                            author=rev_payload["author"],
                            created_at=_parse_dt(rev_payload["created_at"]),
                        )
                    )
                for anchor_payload in document_payload.get("anchors", []):
                    anchor = Anchor(
                        anchor_id=anchor_payload["anchor_id"],
                        document_id=record.document_id,
                        created_on_revision=anchor_payload["created_on_revision"],
                        offsets={
                            int(rev): off
                            for rev, off in anchor_payload["offsets"].items()
                        },
                        comment_id=anchor_payload.get("comment_id"),
                    )
                    staged.anchors[anchor.anchor_id] = anchor
                    record.anchor_ids.append(anchor.anchor_id)
                staged.documents[record.document_id] = record
            for poll_payload in area_payload.get("polls", []):
                spec_payload = poll_payload["spec"]
                spec = PollSpec(
                    question=spec_payload["question"],
                    procedure=Procedure(spec_payload["procedure"]),
                    options=tuple(spec_payload.get("options", [])),
                    binding=bool(spec_payload.get("binding", False)),
                    deadline=_parse_dt(spec_payload.get("deadline")),
                    quorum=spec_payload.get("quorum"),
                    open_ballots=bool(spec_payload.get("open_ballots", False)),
                )
                poll = PollRecord(
                    poll_id=poll_payload["poll_id"],
                    area_id=area.id,
                    item_id=poll_payload["item_id"],
                    author=poll_payload["author"],
                    spec=spec,
                    opened_at=_parse_dt(poll_payload["opened_at"]),
                    eligible=frozenset(poll_payload["eligible"]),
                    closed=bool(poll_payload["closed"]),
                    outcome=_parse_outcome(poll_payload.get("outcome")),
                    final_tally=_parse_tally(poll_payload.get("final_tally")),
                )
                for ballot_payload in poll_payload.get("ballots") or []:
                    poll.ballots[ballot_payload["voter"]] = Ballot(
                        poll_id=poll.poll_id,
                        voter=ballot_payload["voter"],
                        cast_at=_parse_dt(ballot_payload["cast_at"]),
                        content=_parse_content(ballot_payload["content"]),
                    )
                staged.polls[poll.poll_id] = poll
        for feedback_payload in payload.get("feedback", []):
            record = FeedbackRecord(
                id=feedback_payload["id"],
                author=feedback_payload.get("author"),
                anonymous=bool(feedback_payload.get("anonymous", False)),
                scope="group",
                group_id=group.id,
                rating=feedback_payload["rating"],
                text=feedback_payload["text"],
                created_at=_parse_dt(feedback_payload["created_at"]),
            )
            staged.feedback[record.id] = record
        return staged
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityViolation(f"bundle-shape: {exc}") from None


class ServiceOps:
    """Identity, sessions, authorization, export/import, feedback."""

    # -- identity --

    def register_user(
        self,
        display_name: str,
        email: str,
        password: str | None = None,
        profile: dict[str, str] | None = None,
    ) -> Member:
        if not display_name or len(display_name) > 200:
            raise InvalidName("display name must be 1-200 characters")
        email = email.strip().lower()
        if "@" not in email or len(email) > 254:
            raise InvalidName(f"not an email address: {email!r}")
        with self._state.registry_lock:
            user = self._create_user_record(display_name, email, profile=profile)
            if password is not None:
                self._state.credentials[user.user_id] = hash_password(
                    password, self._scrypt_cost
                )
            self._persist_users()
            return copy.deepcopy(user)

    def _create_user_record(
        self,
        display_name: str,
        email: str,
        verified: bool = False,
        profile: dict[str, str] | None = None,
    ) -> Member:
        with self._state.registry_lock:
            if email in self._state.users_by_email:
                raise DuplicateEmail(email)
            user = Member(
                user_id=self._new_id("u"),
                display_name=display_name,
                email=email,
                verified=verified,
                profile=dict(profile or {}),
            )
            self._state.users[user.user_id] = user
            self._state.users_by_email[email] = user.user_id
            self._persist_users()
            return user

    def verify_email(self, user_id: str) -> Member:
        user = self._require_user(user_id)
        user.verified = True
        self._persist_users()
        return copy.deepcopy(user)

    def update_profile(self, user_id: str, profile: dict[str, str]) -> Member:
        user = self._require_user(user_id)
        user.profile.update(profile)
        self._persist_users()
        return copy.deepcopy(user)

    # -- sessions --

    def authenticate(
        self, identifier: str, secret: str, at: datetime | None = None
    ) -> Session:
        at = at or self._now()
        ident = identifier.strip().lower()
        with self._state.registry_lock:
            cutoff = at - timedelta(seconds=RATE_LIMIT_WINDOW_SECONDS)
            failures = [
                t for t in self._state.auth_failures.get(ident, []) if t > cutoff
            ]
            if len(failures) >= RATE_LIMIT_MAX_FAILURES:
                self._state.auth_failures[ident] = failures
                raise RateLimited(f"too many failures for {ident}")
            user_id = self._state.users_by_email.get(ident)
            stored = self._state.credentials.get(user_id) if user_id else None
            if stored is not None:
                ok = verify_password(stored, secret)
            else:
                # Burn the same hashing cost for unknown identifiers so the
                # uniform BadCredentials cannot be timed apart.
                hash_password(secret, self._scrypt_cost)
                ok = False
            if not ok:
                failures.append(at)
                self._state.auth_failures[ident] = failures
                raise BadCredentials("invalid identifier or secret")
            self._state.auth_failures.pop(ident, None)
            session = Session(
                token=secrets.token_urlsafe(32),
                user_id=user_id,
                issued_at=at,
                expires_at=at + self._session_lifetime,
            )
            self._state.sessions[session.token] = session
            return session

    def resolve_session(
        self, token: str | None, at: datetime | None = None
    ) -> str | None:
        """User id for a live session; None (anonymous) for missing,
        unknown, or expired tokens."""
        if not token:
            return None
        session = self._state.sessions.get(token)
        if session is None:
            return None
        if (at or self._now()) > session.expires_at:
            return None
        return session.user_id

    def require_session(self, token: str | None, at: datetime | None = None) -> str:
        user_id = self.resolve_session(token, at)
        if user_id is None:
            raise Unauthenticated("a live session is required")
        return user_id

    def logout(self, token: str) -> None:
        self._state.sessions.pop(token, None)

    # -- authorization --

    def authorize(
        self, token: str | None, scope_id: str, action: AuthAction
    ) -> bool:
        """Access decision for a group or meeting-area scope. Deny is a
        value, never an exception."""
        user_id = self.resolve_session(token)
        return self.authorize_user(user_id, scope_id, action)

    def authorize_user(
        self, user_id: str | None, scope_id: str, action: AuthAction
    ) -> bool:
        action = AuthAction(action)
        area = self._state.areas.get(scope_id)
        if area is not None:
            if action == AuthAction.READ:
                return self._can_read_area(user_id, area)
            if action == AuthAction.POST:
                return self._can_post_area(user_id, area)
            return self._is_moderator(
                user_id, self._state.groups[area.owner_group]
            )
        group = self._state.groups.get(scope_id)
        if group is None:
            return False
        if action == AuthAction.READ:
            return self._can_read_group(user_id, group)
        if action == AuthAction.POST:
            return user_id is not None and user_id in group.members
        return self._is_moderator(user_id, group)

    def is_operator(self, user_id: str | None) -> bool:
        if user_id is None:
            return False
        user = self._state.users.get(user_id)
        return user is not None and user.email in self._operators

    # -- export / import --

    def export_group(self, group_id: str, actor: str) -> ExportBundle:
        group = self._require_group(group_id)
        with self._group_lock(group_id):
            if not self._is_moderator(actor, group):
                raise NotAuthorized("export is a moderator action")
            users, payload = serialize_group_payload(
                self._state, group, include_secret_ballots=False
            )
            return ExportBundle(
                {
                    "format_version": FORMAT_VERSION,
                    "exported_at": _dt(self._now()),
                    "users": users,
                    "group": payload,
                }
            )

    def import_group(self, data, actor: str, rename: str | None = None) -> Group:
        self._require_user(actor)
        payload = self._bundle_payload(data)
        version = payload.get("format_version")
        if not isinstance(version, int) or not 1 <= version <= FORMAT_VERSION:
            raise UnsupportedVersion(f"format_version {version!r}")
        if "group" not in payload or "users" not in payload:
            raise IntegrityViolation("bundle-missing-sections")
        staged = materialize_group(payload["users"], payload["group"])
        if rename:
            staged.group.name = rename
        with self._state.registry_lock:
            if staged.group.name in self._state.groups_by_name:
                raise DuplicateName(staged.group.name)
            self._check_staged_ids(staged)
            self._validate_staged(staged)
            self._commit_staged(staged)
            group = staged.group
        self._persist_group(group.id)
        self._persist_users()
        return copy.deepcopy(group)

    def _bundle_payload(self, data) -> dict:
        if isinstance(data, ExportBundle):
            return data.payload
        if isinstance(data, (bytes, str)):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as exc:
                raise IntegrityViolation(f"bundle-parse-error: {exc}") from None
        if not isinstance(data, dict):
            raise IntegrityViolation("bundle-not-an-object")
        return data

    def _check_staged_ids(self, staged: _StagedGroup) -> None:
        fresh_ids = (
            [staged.group.id]
            + list(staged.areas)
            + list(staged.items)
            + list(staged.comments)
            + list(staged.documents)
            + list(staged.anchors)
            + list(staged.polls)
            + list(staged.feedback)
        )
        if len(set(fresh_ids)) != len(fresh_ids):
            raise IntegrityViolation("duplicate-id-in-bundle")
        for record_id in fresh_ids:
            if record_id in self._state.used_ids:
                raise IntegrityViolation(f"id-collision: {record_id}")
        for user in staged.users.values():
            existing = self._state.users_by_email.get(user.email)
            if existing is not None and existing != user.user_id:
                raise IntegrityViolation(f"email-collision: {user.email}")

    def _validate_staged(self, staged: _StagedGroup) -> None:
        scratch = ServerState()
        scratch.users = dict(self._state.users)
        scratch.users.update(staged.users)
        scratch.groups = {staged.group.id: staged.group}
        scratch.areas = staged.areas
        scratch.items = staged.items
        scratch.comments = staged.comments
        scratch.documents = staged.documents
        scratch.anchors = staged.anchors
        scratch.polls = staged.polls
        scratch.feedback = staged.feedback
        referenced = set()
        for area in staged.areas.values():
            referenced.add(area.creator)
            for item_id in area.folio:
                referenced.add(staged.items[item_id].author)
            for comment_id in area.discussion:
                referenced.add(staged.comments[comment_id].author)
        for poll in staged.polls.values():
            referenced.add(poll.author)
            referenced.update(poll.eligible)
            referenced.update(poll.ballots)
        referenced.update(staged.group.members)
        for user_id in referenced:
            if user_id not in scratch.users:
                raise IntegrityViolation(f"user-not-in-bundle: {user_id}")
        validate_group_integrity(scratch, staged.group.id)

    def _commit_staged(self, staged: _StagedGroup) -> None:
        state = self._state
        for user in staged.users.values():
            if user.user_id not in state.users:
                state.users[user.user_id] = user
                state.users_by_email[user.email] = user.user_id
                state.used_ids.add(user.user_id)
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
        for comment in staged.comments.values():
            if comment.source_message_id is not None:
                state.comments_by_source[comment.source_message_id] = comment.id
        # Hook outbound links back up for link targets that exist here.
        for area in staged.areas.values():
            for linked_id in area.linked_groups:
                other = state.groups.get(linked_id)
                if other is not None and area.id not in other.linked_area_ids:
                    other.linked_area_ids.append(area.id)

    # -- feedback --

    def submit_feedback(
        self,
        token: str | None,
        scope: str,
        rating: int,
        text: str,
        group_id: str | None = None,
        anonymous: bool = False,
    ) -> FeedbackRecord:
        user_id = self.require_session(token)
        return self.submit_feedback_as(
            user_id, scope, rating, text, group_id=group_id, anonymous=anonymous
        )

    def submit_feedback_as(
        self,
        user_id: str,
        scope: str,
        rating: int,
        text: str,
        group_id: str | None = None,
        anonymous: bool = False,
    ) -> FeedbackRecord:
        self._require_user(user_id)
        if not isinstance(rating, int) or not 1 <= rating <= 5:
            raise InvalidRating(f"rating must be 1-5, got {rating!r}")
        if scope not in ("group", "platform"):
            raise InvalidRating(f"unknown feedback scope {scope!r}")
        if scope == "group":
            group = self._require_group(group_id)
            if user_id not in group.members:
                raise NotAuthorized("group feedback comes from group members")
        else:
            group_id = None
        record = FeedbackRecord(
            id=self._new_id("f"),
            author=user_id,
            anonymous=anonymous,
            scope=scope,
            group_id=group_id,
            rating=rating,
            text=text,
            created_at=self._now(),
        )
        self._state.feedback[record.id] = record
        if scope == "group":
            self._persist_group(group_id)
        else:
            self._persist_platform_feedback()
        return copy.deepcopy(record)

    def list_feedback(
        self, user_id: str | None, scope: str, group_id: str | None = None
    ) -> list[dict]:
        if scope == "group":
            group = self._require_group(group_id)
            if user_id is None or user_id not in group.members:
                raise NotAuthorized("group feedback is readable by members")
        elif not self.is_operator(user_id):
            raise NotAuthorized("platform feedback is readable by operators")
        records = sorted(
            (
                record
                for record in self._state.feedback.values()
                if record.scope == scope
                and (scope == "platform" or record.group_id == group_id)
            ),
            key=lambda record: (record.created_at, record.id),
        )
        out = []
        for record in records:
            author = None
            if not record.anonymous and record.author in self._state.users:
                author = self._state.users[record.author].display_name
            out.append(
                {
                    "id": record.id,
                    "author": author,
                    "rating": record.rating,
                    "text": record.text,
                    "scope": record.scope,
                    "created_at": _dt(record.created_at),
                }
            )
        return out
