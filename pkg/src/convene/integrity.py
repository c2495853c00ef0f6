"""Cross-module invariant checks for one group space.

Used two ways: bundle import re-validates everything before committing,
and the test suite fuzzes live state against the same checks. Each check
raises IntegrityViolation naming the first broken invariant.
"""

from __future__ import annotations

from .decisions import PollRecord, validate_ballot_content, validate_poll_spec
from .documents import ANCHOR_WHITESPACE, PlainTextSource
from .errors import IntegrityViolation
from .model import (
    DocumentItem,
    Global,
    InText,
    OnItem,
    PollItem,
    ReplyTo,
)


def _fail(name: str, detail: str) -> None:
    raise IntegrityViolation(f"{name}: {detail}")


def validate_group_integrity(state, group_id: str) -> None:
    group = state.groups.get(group_id)
    if group is None:
        _fail("unknown-group", group_id)
    if not group.name or len(group.name) > 100:
        _fail("group-name-length", group.name[:40])
    for user_id in list(group.members) + list(group.pending_joins):
        if user_id not in state.users:
            _fail("membership-unknown-user", user_id)
    if len(set(group.area_ids)) != len(group.area_ids):
        _fail("duplicate-area-id", group.id)
    for area_id in group.area_ids:
        _validate_area(state, group, area_id)
    for record in state.feedback.values():
        if record.scope == "group" and record.group_id == group_id:
            if not 1 <= record.rating <= 5:
                _fail("feedback-rating-range", record.id)


def _validate_area(state, group, area_id: str) -> None:
    area = state.areas.get(area_id)
    if area is None:
        _fail("unknown-area", area_id)
    if area.owner_group != group.id:
        _fail("area-owner-mismatch", area_id)
    if group.id in area.linked_groups:
        _fail("self-link", area_id)
    if len(set(area.linked_groups)) != len(area.linked_groups):
        _fail("duplicate-link", area_id)
    if len(set(area.folio)) != len(area.folio):
        _fail("duplicate-folio-id", area_id)
    if len(set(area.discussion)) != len(area.discussion):
        _fail("duplicate-discussion-id", area_id)

    ordinals = set()
    for item_id in area.folio:
        item = state.items.get(item_id)
        if item is None:
            _fail("unknown-folio-item", item_id)
        if item.area != area_id:
            _fail("item-area-mismatch", item_id)
        if item.author not in state.users:
            _fail("item-unknown-author", item_id)
        if item.ordinal < 1 or item.ordinal in ordinals:
            _fail("item-ordinal-unstable", item_id)
        ordinals.add(item.ordinal)
        if isinstance(item.kind, DocumentItem):
            _validate_document(state, area, item)
        elif isinstance(item.kind, PollItem):
            _validate_poll(state, area, item)

    for comment_id in area.discussion:
        comment = state.comments.get(comment_id)
        if comment is None:
            _fail("unknown-comment", comment_id)
        if comment.area != area_id:
            _fail("comment-area-mismatch", comment_id)
        if comment.author not in state.users:
            _fail("comment-unknown-author", comment_id)
        _validate_target(state, area, comment)


def _validate_target(state, area, comment) -> None:
    target = comment.target
    if isinstance(target, Global):
        return
    if isinstance(target, OnItem):
        item = state.items.get(target.item_id)
        if item is None or item.area != area.id or target.item_id not in area.folio:
            _fail("dangling-item-target", comment.id)
        return
    if isinstance(target, ReplyTo):
        parent = state.comments.get(target.comment_id)
        if parent is None or parent.area != area.id:
            _fail("dangling-reply-target", comment.id)
        return
    if isinstance(target, InText):
        anchor = state.anchors.get(target.anchor_id)
        if anchor is None:
            _fail("dangling-anchor-target", comment.id)
        record = state.documents.get(anchor.document_id)
        if record is None or record.area_id != area.id:
            _fail("anchor-area-mismatch", comment.id)
        if anchor.comment_id != comment.id:
            _fail("anchor-comment-backref", comment.id)
        return
    _fail("unknown-target-kind", comment.id)


def _validate_document(state, area, item) -> None:
    record = state.documents.get(item.kind.document_id)
    if record is None:
        _fail("unknown-document", item.id)
    if record.area_id != area.id or record.item_id != item.id:
        _fail("document-linkage", item.id)
    if not record.revisions:
        _fail("document-without-revisions", record.document_id)
    for n, revision in enumerate(record.revisions, start=1):
        if revision.revision != n:
            _fail("revision-numbering", record.document_id)
        if revision.document_id != record.document_id:
            _fail("revision-linkage", record.document_id)
    plaintext = all(r.is_plaintext for r in record.revisions)
    if record.anchor_ids and not plaintext:
        _fail("anchors-on-upload", record.document_id)
    latest = record.revisions[-1].revision
    for anchor_id in record.anchor_ids:
        anchor = state.anchors.get(anchor_id)
        if anchor is None or anchor.document_id != record.document_id:
            _fail("anchor-linkage", anchor_id)
        if not 1 <= anchor.created_on_revision <= latest:
            _fail("anchor-creation-revision", anchor_id)
        expected = set(range(anchor.created_on_revision, latest + 1))
        if set(anchor.offsets) != expected:
            _fail("anchor-map-coverage", anchor_id)
        for rev_no, offset in anchor.offsets.items():
            if offset is None:
                continue
            source = record.revisions[rev_no - 1].source
            if not isinstance(source, PlainTextSource):
                _fail("anchor-on-upload-revision", anchor_id)
            text = source.text
            if not 0 <= offset < len(text):
                _fail("anchor-offset-range", anchor_id)
            if text[offset] not in ANCHOR_WHITESPACE:
                _fail("anchor-not-whitespace", anchor_id)
        if anchor.comment_id is not None:
            comment = state.comments.get(anchor.comment_id)
            if (
                comment is None
                or not isinstance(comment.target, InText)
                or comment.target.anchor_id != anchor_id
            ):
                _fail("anchor-comment-backref", anchor_id)


def _validate_poll(state, area, item) -> None:
    poll: PollRecord | None = state.polls.get(item.kind.poll_id)
    if poll is None:
        _fail("unknown-poll", item.id)
    if poll.area_id != area.id or poll.item_id != item.id:
        _fail("poll-linkage", poll.poll_id)
    if poll.spec.binding != item.kind.binding:
        _fail("poll-binding-mismatch", poll.poll_id)
    try:
        validate_poll_spec(poll.spec)
    except Exception:
        _fail("poll-spec-invalid", poll.poll_id)
    for voter, ballot in poll.ballots.items():
        if ballot.voter != voter or ballot.poll_id != poll.poll_id:
            _fail("ballot-linkage", poll.poll_id)
        if voter not in poll.eligible:
            _fail("ballot-ineligible-voter", poll.poll_id)
        try:
            validate_ballot_content(poll.spec, ballot.content)
        except Exception:
            _fail("ballot-content-mismatch", poll.poll_id)
    if poll.closed and (poll.outcome is None or poll.final_tally is None):
        _fail("closed-poll-without-outcome", poll.poll_id)
    if not poll.closed and poll.outcome is not None:
        _fail("open-poll-with-outcome", poll.poll_id)
