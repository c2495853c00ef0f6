"""Email integration: outbound notifications, inbound postings, mbox import.

Replies are routed by a plus-addressed token in the notification's sender
address rather than by subject parsing, so the target survives client
subject mangling; the `[group:area]` subject tag is kept for humans. The
token carries a truncated keyed hash so posting rights cannot be forged by
guessing ids. Sender authentication is address match only: this trusts the
small-group setting it serves and is documented as such.

Delivery and receipt adapters (SMTP, pipe, spool) are deliberately outside
this module; everything here works on raw message bytes.
"""

from __future__ import annotations

import base64
import email
import email.policy
import email.utils
import hashlib
import hmac
import mailbox
import re
import tempfile
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from email.message import EmailMessage, Message

from .decisions import PollRecord, Tally
from .errors import (
    AccessDenied,
    BadToken,
    Duplicate,
    InvalidSpec,
    MalformedArchive,
    NoTextPart,
    NotAuthorized,
    UnknownSender,
    UnknownTarget,
)
from .model import Comment, Global, InText, OnItem, ReplyTo

MAC_BYTES = 10  # 16 base32 characters
MAX_TOKEN_LENGTH = 64

_SUBJECT_TAG = re.compile(r"\[[^\[\]]*:[^\[\]]*\]\s*")


# -- routing targets -------------------------------------------------------------

@dataclass(frozen=True)
class RoutingTarget:
    kind: str  # "global" | "item" | "comment"
    ref: str | None = None


def _mac(secret: bytes, area_id: str, code: str) -> str:
    digest = hmac.new(secret, f"{area_id}.{code}".encode(), hashlib.sha256).digest()
    return base64.b32encode(digest[:MAC_BYTES]).decode().lower().rstrip("=")


def encode_routing_token(secret: bytes, area_id: str, target: RoutingTarget) -> str:
    if target.kind == "global":
        code = "g"
    elif target.kind == "item":
        code = f"i{target.ref}"
    elif target.kind == "comment":
        code = f"c{target.ref}"
    else:
        raise UnknownTarget(target.kind)
    token = f"{area_id}.{code}.{_mac(secret, area_id, code)}"
    if len(token) > MAX_TOKEN_LENGTH or not token.isascii():
        raise UnknownTarget(f"token for {area_id} does not fit an address extension")
    return token


def decode_routing_token(secret: bytes, token: str) -> tuple[str, RoutingTarget]:
    """Verify and unpack a routing token. Any mutation, truncation, or
    re-encoding (including case changes) fails verification."""
    parts = token.split(".")
    if len(parts) != 3:
        raise BadToken("malformed routing token")
    area_id, code, mac = parts
    if not area_id or not code:
        raise BadToken("malformed routing token")
    if not hmac.compare_digest(mac, _mac(secret, area_id, code)):
        raise BadToken("routing token failed verification")
    if code == "g":
        return area_id, RoutingTarget("global")
    if code.startswith("i") and len(code) > 1:
        return area_id, RoutingTarget("item", code[1:])
    if code.startswith("c") and len(code) > 1:
        return area_id, RoutingTarget("comment", code[1:])
    raise BadToken("unknown routing target")


# -- outbound --------------------------------------------------------------------

@dataclass(frozen=True)
class OutboundMessage:
    to: str
    sender: str
    subject: str
    body: str
    message_id: str
    date: datetime
    in_reply_to: str | None = None

    def to_bytes(self) -> bytes:
        msg = EmailMessage()
        msg["From"] = self.sender
        msg["To"] = self.to
        msg["Subject"] = self.subject
        msg["Message-ID"] = self.message_id
        msg["Date"] = email.utils.format_datetime(self.date)
        if self.in_reply_to:
            msg["In-Reply-To"] = self.in_reply_to
        msg.set_content(self.body)
        return msg.as_bytes()


class NotifyKind:
    NEW_COMMENT = "new_comment"
    NEW_ITEM = "new_item"
    POLL_OPENED = "poll_opened"
    POLL_CLOSED = "poll_closed"


@dataclass(frozen=True)
class NotificationEvent:
    kind: str       # one of the NotifyKind values
    object_id: str  # comment id, item id, or poll id


@dataclass(frozen=True)
class InboundPosting:
    author: str
    area_id: str
    target: RoutingTarget
    subject: str
    body: str
    source_message_id: str


@dataclass
class MailImportReport:
    imported: int = 0
    threaded: int = 0
    orphan_parent: int = 0
    unmapped: int = 0
    duplicates: int = 0
    rejected: int = 0
    no_text: int = 0


# -- body extraction ----------------------------------------------------------

def first_text_part(msg: Message) -> str:
    for part in msg.walk():
        if part.is_multipart():
            continue
        if part.get_content_type() == "text/plain":
            try:
                return part.get_content()
            except (LookupError, UnicodeDecodeError) as exc:
                raise NoTextPart(f"text part is undecodable: {exc}") from None
    raise NoTextPart("message has no text/plain part")


def strip_quoted_trailer(body: str) -> str:
    """Drop the signature block and the trailing quoted block.

    Mid-message quoting stays: deliberative replies legitimately quote the
    comment they answer. Only the run of `>`-prefixed (and blank) lines at
    the very end, plus anything under a `-- ` delimiter, goes.
    """
    lines = body.splitlines()
    for k, line in enumerate(lines):
        if line.rstrip() == "--":
            lines = lines[:k]
            break
    while lines and (not lines[-1].strip() or lines[-1].startswith(">")):
        lines.pop()
    return "\n".join(lines).rstrip()


def strip_subject_tag(subject: str) -> str:
    return _SUBJECT_TAG.sub("", subject, count=1).strip()


def normalize_message_id(raw_id: str | None, raw_bytes: bytes) -> str:
    if raw_id:
        return raw_id.strip().strip("<>").strip()
    return "sha256:" + hashlib.sha256(raw_bytes).hexdigest()


def _parse_mbox(archive: bytes) -> list[Message]:
    stripped = archive.lstrip(b"\r\n \t")
    if not stripped:
        return []
    if not stripped.startswith(b"From "):
        raise MalformedArchive("not an mbox: missing 'From ' separator")
    with tempfile.NamedTemporaryFile(suffix=".mbox") as handle:
        handle.write(archive)
        handle.flush()
        box = mailbox.mbox(handle.name)
        try:
            return [
                email.message_from_bytes(
                    box.get_bytes(key), policy=email.policy.default
                )
                for key in box.keys()
            ]
        finally:
            box.close()


def _parent_message_id(msg: Message) -> str | None:
    irt = msg.get("In-Reply-To")
    if irt:
        ids = re.findall(r"<[^<>]+>", irt)
        if ids:
            return ids[0].strip("<>")
        return irt.strip().strip("<>") or None
    refs = msg.get("References")
    if refs:
        ids = re.findall(r"<[^<>]+>", refs)
        if ids:
            return ids[-1].strip("<>")
    return None


# -- gateway operations ---------------------------------------------------------

class MailGateway:
    """Mail operations; mixed into the server over its shared state."""

    def encode_token(self, area_id: str, target: RoutingTarget) -> str:
        self._resolve_routing_target(area_id, target)
        return encode_routing_token(self._mail_secret, area_id, target)

    def decode_token(self, token: str) -> tuple[str, RoutingTarget]:
        return decode_routing_token(self._mail_secret, token)

    def posting_address(self, area_id: str, target: RoutingTarget) -> str:
        token = self.encode_token(area_id, target)
        return f"{self._mailbox_name}+{token}@{self._mail_domain}"

    def notify(
        self, event: NotificationEvent, subscriber: str
    ) -> OutboundMessage | None:
        """Build the notification for one subscriber, or None if that
        member has notifications switched off."""
        area_id, subject, body, target, parent_key = self._describe_event(event)
        area = self._require_area(area_id)
        user = self._require_user(subscriber)
        if not self._is_area_member(subscriber, area):
            raise AccessDenied(f"{subscriber} has no access to area {area_id}")
        if not self._subscriber_enabled(subscriber, area):
            return None
        group = self._state.groups[area.owner_group]
        key = (event.kind, event.object_id)
        message_id = self._state.notified.get(key)
        if message_id is None:
            message_id = f"<{uuid.uuid4().hex}@{self._mail_domain}>"
            self._state.notified[key] = message_id
        in_reply_to = (
            self._state.notified.get(parent_key) if parent_key is not None else None
        )
        footer = (
            "\n\n-- \n"
            f"{group.name} / {area.title}\n"
            f"{self._base_url}/areas/{area.id}\n"
            "Reply to this message to post to the discussion."
        )
        message = OutboundMessage(
            to=user.email,
            sender=f"{self._mailbox_name}+{self.encode_token(area_id, target)}"
            f"@{self._mail_domain}",
            subject=f"[{group.name}:{area.title}] {subject}",
            body=body + footer,
            message_id=message_id,
            date=self._now(),
            in_reply_to=in_reply_to,
        )
        self._state.outbox.append(message)
        return message

    def broadcast(self, event: NotificationEvent) -> list[OutboundMessage]:
        area_id, *_ = self._describe_event(event)
        area = self._require_area(area_id)
        subscribers = set(self._state.groups[area.owner_group].members)
        for gid in area.linked_groups:
            linked = self._state.groups.get(gid)
            if linked is not None:
                subscribers.update(linked.members)
        out = []
        for user_id in sorted(subscribers):
            message = self.notify(event, user_id)
            if message is not None:
                out.append(message)
        return out

    def parse_inbound(self, raw_message: bytes) -> InboundPosting:
        msg = email.message_from_bytes(raw_message, policy=email.policy.default)
        sender = email.utils.parseaddr(str(msg.get("From", "")))[1].lower()
        author = self._state.users_by_email.get(sender)
        if author is None:
            raise UnknownSender(sender or "<missing From>")
        token = None
        area_id = target = None
        failure: BadToken | None = None
        for candidate in self._candidate_tokens(msg):
            try:
                area_id, target = self.decode_token(candidate)
                token = candidate
                break
            except BadToken as exc:
                failure = exc
        if token is None:
            raise failure or BadToken("no routing token in recipient addresses")
        source_id = normalize_message_id(msg.get("Message-ID"), raw_message)
        if source_id in self._state.comments_by_source:
            raise Duplicate(source_id)
        body = strip_quoted_trailer(first_text_part(msg))
        subject = strip_subject_tag(str(msg.get("Subject", "")))
        return InboundPosting(
            author=author,
            area_id=area_id,
            target=target,
            subject=subject[:200],
            body=body,
            source_message_id=source_id,
        )

    def deliver_inbound(self, raw_message: bytes) -> Comment:
        posting = self.parse_inbound(raw_message)
        area = self._require_area(posting.area_id)
        with self._group_lock(area.owner_group):
            if posting.source_message_id in self._state.comments_by_source:
                raise Duplicate(posting.source_message_id)
            self._require_post_access(posting.author, area)
            target = self._comment_target_for(area, posting.target)
            comment = self._append_comment(
                area,
                posting.author,
                posting.subject,
                posting.body,
                target,
                source_message_id=posting.source_message_id,
            )
            self._persist_group(area.owner_group)
            return comment

    def import_mail_archive(
        self,
        area_id: str,
        archive: bytes,
        address_map: dict[str, str],
        actor: str,
    ) -> MailImportReport:
        area = self._require_area(area_id)
        group = self._state.groups[area.owner_group]
        if not self._is_moderator(actor, group):
            raise NotAuthorized("archive import is a moderator action")
        messages = _parse_mbox(archive)
        report = MailImportReport()
        entries = []
        in_archive = set()
        for msg in messages:
            raw = msg.as_bytes()
            mid = normalize_message_id(msg.get("Message-ID"), raw)
            entries.append((mid, _parent_message_id(msg), msg))
            in_archive.add(mid)
        with self._group_lock(area.owner_group):
            # Import parents before replies regardless of file order;
            # anything left waiting at the fixpoint has an unresolvable
            # parent (present only via a cycle) and lands as a global.
            pending = list(entries)
            while pending:
                progressed = False
                deferred = []
                for mid, parent_mid, msg in pending:
                    waiting = (
                        parent_mid is not None
                        and parent_mid in in_archive
                        and parent_mid not in self._state.comments_by_source
                        and parent_mid != mid
                    )
                    if waiting:
                        deferred.append((mid, parent_mid, msg))
                        continue
                    self._import_one(area, mid, parent_mid, msg, address_map, report)
                    progressed = True
                if not progressed:
                    for mid, parent_mid, msg in deferred:
                        self._import_one(area, mid, None, msg, address_map, report)
                        report.orphan_parent += 1
                    deferred = []
                pending = deferred
            self._persist_group(area.owner_group)
        return report

    def outbox(self) -> list[OutboundMessage]:
        return list(self._state.outbox)

    # -- internals --

    def _import_one(
        self,
        area,
        mid: str,
        parent_mid: str | None,
        msg: Message,
        address_map: dict[str, str],
        report: MailImportReport,
    ) -> None:
        if mid in self._state.comments_by_source:
            report.duplicates += 1
            return
        sender = email.utils.parseaddr(str(msg.get("From", "")))[1].lower()
        author = address_map.get(sender)
        if author is not None:
            self._require_user(author)
        else:
            author = self._state.users_by_email.get(sender)
        if author is None:
            author = self._placeholder_member(sender)
            report.unmapped += 1
        target: Global | ReplyTo = Global()
        if parent_mid is not None:
            parent_comment_id = self._state.comments_by_source.get(parent_mid)
            parent = (
                self._state.comments.get(parent_comment_id)
                if parent_comment_id
                else None
            )
            if parent is not None and parent.area == area.id:
                target = ReplyTo(parent.id)
            else:
                report.orphan_parent += 1
        try:
            body = first_text_part(msg)
        except NoTextPart:
            body = ""
            report.no_text += 1
        created_at = None
        date_header = msg.get("Date")
        if date_header:
            try:
                created_at = email.utils.parsedate_to_datetime(str(date_header))
                if created_at.tzinfo is None:
                    created_at = created_at.replace(tzinfo=timezone.utc)
            except (TypeError, ValueError):
                created_at = None
        subject = strip_subject_tag(str(msg.get("Subject", "")))[:200]
        try:
            self._append_comment(
                area,
                author,
                subject,
                body,
                target,
                created_at=created_at,
                source_message_id=mid,
            )
        except InvalidSpec:
            report.rejected += 1
            return
        report.imported += 1
        if isinstance(target, ReplyTo):
            report.threaded += 1

    def _placeholder_member(self, address: str):
        existing = self._state.users_by_email.get(address)
        if existing is not None:
            return existing
        user = self._create_user_record(
            display_name=f"imported: {address or 'unknown sender'}",
            email=address or f"unknown-{uuid.uuid4().hex[:8]}@invalid",
            verified=False,
        )
        return user.user_id

    def _candidate_tokens(self, msg: Message) -> list[str]:
        headers = []
        for name in ("To", "Cc", "Delivered-To", "X-Original-To", "Resent-To"):
            headers.extend(
                (name, str(value)) for value in msg.get_all(name, [])
            )
        tokens = []
        for _, address in email.utils.getaddresses([v for _, v in headers]):
            local = address.rsplit("@", 1)[0]
            if "+" in local:
                tokens.append(local.split("+", 1)[1])
        return tokens

    def _resolve_routing_target(self, area_id: str, target: RoutingTarget) -> None:
        area = self._state.areas.get(area_id)
        if area is None:
            raise UnknownTarget(f"unknown area {area_id}")
        if target.kind == "global":
            return
        if target.kind == "item":
            item = self._state.items.get(target.ref or "")
            if item is None or item.area != area_id:
                raise UnknownTarget(f"item {target.ref} is not in area {area_id}")
            return
        if target.kind == "comment":
            comment = self._state.comments.get(target.ref or "")
            if comment is None or comment.area != area_id:
                raise UnknownTarget(f"comment {target.ref} is not in area {area_id}")
            return
        raise UnknownTarget(target.kind)

    def _comment_target_for(self, area, target: RoutingTarget):
        if target.kind == "global":
            return Global()
        if target.kind == "item":
            item = self._state.items.get(target.ref or "")
            if item is None or item.area != area.id:
                raise BadToken(f"token item {target.ref} is not in this area")
            return OnItem(item.id)
        comment = self._state.comments.get(target.ref or "")
        if comment is None or comment.area != area.id:
            raise BadToken(f"token comment {target.ref} is not in this area")
        return ReplyTo(comment.id)

    def _subscriber_enabled(self, user_id: str, area) -> bool:
        memberships = []
        owner = self._state.groups[area.owner_group]
        if user_id in owner.members:
            memberships.append(owner.members[user_id])
        for gid in area.linked_groups:
            linked = self._state.groups.get(gid)
            if linked is not None and user_id in linked.members:
                memberships.append(linked.members[user_id])
        return any(m.notifications_enabled for m in memberships)

    def _describe_event(self, event: NotificationEvent):
        """Resolve an event to (area, subject, body, reply target, parent key)."""
        if event.kind == NotifyKind.NEW_COMMENT:
            comment = self._state.comments.get(event.object_id)
            if comment is None:
                raise UnknownTarget(event.object_id)
            parent_key = None
            if isinstance(comment.target, ReplyTo):
                parent_key = (NotifyKind.NEW_COMMENT, comment.target.comment_id)
            elif isinstance(comment.target, OnItem):
                parent_key = (NotifyKind.NEW_ITEM, comment.target.item_id)
            elif isinstance(comment.target, InText):
                anchor = self._state.anchors[comment.target.anchor_id]
                document = self._state.documents[anchor.document_id]
                parent_key = (NotifyKind.NEW_ITEM, document.item_id)
            return (
                comment.area,
                comment.subject,
                comment.body,
                RoutingTarget("comment", comment.id),
                parent_key,
            )
        if event.kind == NotifyKind.NEW_ITEM:
            item = self._state.items.get(event.object_id)
            if item is None:
                raise UnknownTarget(event.object_id)
            return (
                item.area,
                item.title,
                self._item_body(item),
                RoutingTarget("item", item.id),
                None,
            )
        if event.kind in (NotifyKind.POLL_OPENED, NotifyKind.POLL_CLOSED):
            poll = self._state.polls.get(event.object_id)
            if poll is None:
                raise UnknownTarget(event.object_id)
            item = self._state.items[poll.item_id]
            body = (
                self._poll_closed_body(poll)
                if event.kind == NotifyKind.POLL_CLOSED
                else self._poll_opened_body(poll)
            )
            return (
                poll.area_id,
                item.title,
                body,
                RoutingTarget("item", item.id),
                (NotifyKind.NEW_ITEM, item.id)
                if event.kind == NotifyKind.POLL_CLOSED
                else None,
            )
        raise UnknownTarget(event.kind)

    def _item_body(self, item) -> str:
        from .model import DiscussionItem, DocumentItem, LinkItem

        lines = [f"New item {item.label}"]
        if isinstance(item.kind, LinkItem):
            lines.append(item.kind.url)
            if item.kind.caption:
                lines.append(item.kind.caption)
        elif isinstance(item.kind, DiscussionItem):
            lines.append(item.kind.prompt)
        elif isinstance(item.kind, DocumentItem):
            record = self._state.documents[item.kind.document_id]
            if record.latest.is_plaintext:
                text = record.latest.text
                lines.append(text[:1000] + ("…" if len(text) > 1000 else ""))
            else:
                lines.append(f"Uploaded document: {record.latest.source.filename}")
        return "\n".join(lines)

    def _poll_opened_body(self, poll: PollRecord) -> str:
        lines = [poll.spec.question]
        if poll.spec.options:
            lines.extend(
                f"  {i + 1}. {label}" for i, label in enumerate(poll.spec.options)
            )
        lines.append(f"Procedure: {poll.spec.procedure.value}")
        if poll.spec.deadline is not None:
            lines.append(f"Voting closes {poll.spec.deadline.isoformat()}")
        return "\n".join(lines)

    def _poll_closed_body(self, poll: PollRecord) -> str:
        tally: Tally | None = poll.final_tally
        if tally is None:
            tally = self.tally(poll.poll_id)
        outcome = poll.outcome
        status = outcome.status.value if outcome else "open"
        if outcome is not None and outcome.winner is not None:
            status = f"winner: {poll.spec.options[outcome.winner]}"
        elif outcome is not None and outcome.tied is not None:
            tied = ", ".join(poll.spec.options[i] for i in outcome.tied)
            status = f"tied: {tied}"
        counts = " ".join(f"{k}={v}" for k, v in tally.counts.items())
        return (
            f"Outcome: {status}\n"
            f"Tally: {counts}\n"
            f"Participation: {tally.participation} of {tally.eligible_count} eligible"
        )
