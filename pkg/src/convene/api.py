"""HTTP surface: resource endpoints over the server operations.

Every mutating endpoint authenticates before touching state; reads run as
the session's user, or as an anonymous outsider without one. Domain errors
map onto status codes in one table; bodies are JSON throughout.
"""

from __future__ import annotations

import base64
from typing import Literal

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from . import errors
from .decisions import (
    ApprovalSet,
    Consent,
    ConsentStance,
    PollRecord,
    PollSpec,
    Procedure,
    SingleChoice,
    VoteChoice,
    YesNoAbstain,
)
from .documents import PlainTextSource, ReferenceMarker, TextRun, UploadedSource
from .mailgate import NotificationEvent, RoutingTarget
from .model import (
    ActivateVia,
    ActivationState,
    Comment,
    CommentHeader,
    DiscussionItem,
    Global,
    GroupAccess,
    InText,
    Item,
    IndexOrder,
    JoinPolicy,
    LinkItem,
    OnItem,
    ReplyTo,
)
from .server import Server
from .service import (
    AuthAction,
    _dt,
    _parse_dt,
    _serialize_content,
    _serialize_kind,
    _serialize_outcome,
    _serialize_tally,
    _serialize_target,
)

_ERROR_STATUS: list[tuple[type, int]] = [
    (errors.Unauthenticated, 401),
    (errors.BadCredentials, 401),
    (errors.RateLimited, 429),
    (errors.AccessDenied, 403),
    (errors.NotAuthorized, 403),
    (errors.NotAMember, 403),
    (errors.NotEligible, 403),
    (errors.UnknownSender, 403),
    (errors.UnknownGroup, 404),
    (errors.UnknownArea, 404),
    (errors.UnknownItem, 404),
    (errors.UnknownComment, 404),
    (errors.UnknownDocument, 404),
    (errors.UnknownPoll, 404),
    (errors.UnknownUser, 404),
    (errors.UnknownTarget, 404),
    (errors.DuplicateName, 409),
    (errors.DuplicateEmail, 409),
    (errors.Duplicate, 409),
    (errors.AlreadyMember, 409),
    (errors.AlreadyClosed, 409),
    (errors.PollClosed, 409),
    (errors.DeadlinePassed, 409),
    (errors.OversizeUpload, 413),
    (errors.UnsupportedVersion, 400),
    (errors.IntegrityViolation, 422),
    (errors.ConveneError, 400),
]


def _status_for(exc: errors.ConveneError) -> int:
    for klass, status in _ERROR_STATUS:
        if isinstance(exc, klass):
            return status
    return 400


# -- request bodies -----------------------------------------------------------

class RegisterBody(BaseModel):
    display_name: str
    email: str
    password: str
    profile: dict[str, str] = Field(default_factory=dict)


class LoginBody(BaseModel):
    identifier: str
    secret: str


class GroupBody(BaseModel):
    name: str
    description: str = ""
    access: Literal["open", "closed"] = "open"
    join_policy: Literal["open_join", "approval_required"] = "open_join"


class AreaBody(BaseModel):
    title: str
    description: str = ""


class LinkBody(BaseModel):
    group_id: str


class ItemBody(BaseModel):
    title: str
    kind: dict


class TargetBody(BaseModel):
    kind: Literal["global", "on_item", "reply_to", "in_text"]
    item_id: str | None = None
    comment_id: str | None = None
    anchor_id: str | None = None


class CommentBody(BaseModel):
    subject: str = ""
    body: str
    target: TargetBody = Field(default_factory=lambda: TargetBody(kind="global"))


class ActivateBody(BaseModel):
    via: Literal["reference", "subject"]
    comment_id: str
    prior: dict | None = None


class RevisionBody(BaseModel):
    text: str


class AnchorBody(BaseModel):
    offset: int
    subject: str = ""
    body: str
    revision: int | None = None


class BallotBody(BaseModel):
    content: dict


class ImportBody(BaseModel):
    bundle: dict
    rename: str | None = None


class FeedbackBody(BaseModel):
    scope: Literal["group", "platform"]
    rating: int
    text: str = ""
    group_id: str | None = None
    anonymous: bool = False


class MailImportBody(BaseModel):
    mbox_b64: str
    address_map: dict[str, str] = Field(default_factory=dict)


class InboundMailBody(BaseModel):
    raw_b64: str


class NotifyBody(BaseModel):
    kind: Literal["new_comment", "new_item", "poll_opened", "poll_closed"]
    object_id: str


# -- view serialization ---------------------------------------------------------

def _item_view(server: Server, item: Item) -> dict:
    author = server.state.users.get(item.author)
    return {
        "id": item.id,
        "area": item.area,
        "author": item.author,
        "author_name": author.display_name if author else item.author,
        "created_at": _dt(item.created_at),
        "title": item.title,
        "ordinal": item.ordinal,
        "label": item.label,
        "retracted": item.retracted,
        "kind": _serialize_kind(item.kind),
    }


def _reference_view(reference) -> dict | None:
    if reference is None:
        return None
    return {
        "item_id": reference.item_id,
        "anchor_id": reference.anchor_id,
        "label": reference.label,
    }


def _header_view(header: CommentHeader) -> dict:
    return {
        "comment_id": header.comment_id,
        "subject": header.subject,
        "author_name": header.author_name,
        "created_at": _dt(header.created_at),
        "item_reference": _reference_view(header.item_reference),
    }


def _comment_view(server: Server, comment: Comment) -> dict:
    header = server.comment_header(comment.id)
    return {
        "id": comment.id,
        "area": comment.area,
        "author": comment.author,
        "author_name": header.author_name,
        "created_at": _dt(comment.created_at),
        "subject": comment.subject,
        "body": comment.body,
        "retracted": comment.retracted,
        "target": _serialize_target(comment.target),
        "item_reference": _reference_view(header.item_reference),
    }


def _activation_view(state: ActivationState) -> dict:
    return {
        "active_comment": state.active_comment,
        "active_reference": state.active_reference,
        "displayed_item": state.displayed_item,
        "highlighted_anchor": state.highlighted_anchor,
    }


def _parse_activation(payload: dict | None) -> ActivationState:
    if not payload:
        return ActivationState()
    return ActivationState(
        active_comment=payload.get("active_comment"),
        active_reference=payload.get("active_reference"),
        displayed_item=payload.get("displayed_item"),
        highlighted_anchor=payload.get("highlighted_anchor"),
    )


def _poll_view(server: Server, record: PollRecord, viewer: str | None) -> dict:
    tally = server.tally(record.poll_id)
    record = server.state.polls[record.poll_id]  # autoclose may have run
    mine = record.ballots.get(viewer) if viewer else None
    return {
        "poll_id": record.poll_id,
        "item_id": record.item_id,
        "area": record.area_id,
        "author": record.author,
        "question": record.spec.question,
        "procedure": record.spec.procedure.value,
        "options": list(record.spec.options),
        "binding": record.spec.binding,
        "deadline": _dt(record.spec.deadline),
        "quorum": record.spec.quorum,
        "open_ballots": record.spec.open_ballots,
        "opened_at": _dt(record.opened_at),
        "eligible_count": len(record.eligible),
        "eligible": viewer in record.eligible if viewer else False,
        "closed": record.closed,
        "outcome": _serialize_outcome(record.outcome),
        "tally": _serialize_tally(tally),
        "my_ballot": _serialize_content(mine.content) if mine else None,
    }


def _segment_view(server: Server, segment) -> dict:
    if isinstance(segment, TextRun):
        return {"type": "text", "text": segment.text}
    marker: ReferenceMarker = segment
    anchor = server.state.anchors[marker.anchor_id]
    return {
        "type": "marker",
        "anchor_id": marker.anchor_id,
        "active": marker.active,
        "comment_id": anchor.comment_id,
    }


def _target_from_body(body: TargetBody):
    if body.kind == "global":
        return Global()
    if body.kind == "on_item":
        if not body.item_id:
            raise errors.InvalidSpec("on_item target needs item_id")
        return OnItem(body.item_id)
    if body.kind == "reply_to":
        if not body.comment_id:
            raise errors.InvalidSpec("reply_to target needs comment_id")
        return ReplyTo(body.comment_id)
    if not body.anchor_id:
        raise errors.InvalidSpec("in_text target needs anchor_id")
    return InText(body.anchor_id)


def _item_spec_from_body(kind: dict):
    name = kind.get("kind")
    if name == "link":
        return LinkItem(url=kind.get("url", ""), caption=kind.get("caption", ""))
    if name == "discussion":
        return DiscussionItem(prompt=kind.get("prompt", ""))
    if name == "document":
        if "text" in kind:
            return PlainTextSource(kind["text"])
        try:
            blob = base64.b64decode(kind["blob_b64"])
        except (KeyError, ValueError) as exc:
            raise errors.InvalidSpec(f"document needs text or blob_b64: {exc}")
        return UploadedSource(
            blob=blob,
            filename=kind.get("filename", "upload"),
            media_type=kind.get("media_type", "application/octet-stream"),
        )
    if name in ("poll", "decision"):
        try:
            procedure = Procedure(kind["procedure"])
        except (KeyError, ValueError) as exc:
            raise errors.InvalidSpec(f"bad poll procedure: {exc}")
        return PollSpec(
            question=kind.get("question", ""),
            procedure=procedure,
            options=tuple(kind.get("options", [])),
            binding=name == "decision",
            deadline=_parse_dt(kind.get("deadline")),
            quorum=kind.get("quorum"),
            open_ballots=bool(kind.get("open_ballots", False)),
        )
    raise errors.InvalidSpec(f"unknown item kind {name!r}")


def _ballot_content_from_body(payload: dict):
    kind = payload.get("kind")
    try:
        if kind == "yes_no_abstain":
            return YesNoAbstain(VoteChoice(payload["choice"]))
        if kind == "single_choice":
            return SingleChoice(int(payload["option"]))
        if kind == "approval_set":
            return ApprovalSet(frozenset(int(i) for i in payload["options"]))
        if kind == "consent":
            return Consent(ConsentStance(payload["stance"]), payload.get("reason"))
    except (KeyError, ValueError, TypeError) as exc:
        raise errors.ContentMismatch(f"bad ballot content: {exc}")
    raise errors.ContentMismatch(f"unknown ballot content kind {kind!r}")


# -- app ------------------------------------------------------------------------

def create_app(server: Server) -> FastAPI:
    app = FastAPI(title="convene", version="0.1.0")
    app.state.server = server

    @app.exception_handler(errors.ConveneError)
    async def _domain_error(request: Request, exc: errors.ConveneError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    def bearer_token(authorization: str | None = Header(default=None)) -> str | None:
        if authorization and authorization.lower().startswith("bearer "):
            return authorization[7:].strip()
        return None

    def optional_user(token: str | None = Depends(bearer_token)) -> str | None:
        return server.resolve_session(token)

    def required_user(token: str | None = Depends(bearer_token)) -> str:
        return server.require_session(token)

    # -- identity and sessions --

    @app.post("/users", status_code=201)
    def register(body: RegisterBody):
        user = server.register_user(
            body.display_name, body.email, body.password, profile=body.profile
        )
        return {
            "user_id": user.user_id,
            "display_name": user.display_name,
            "email": user.email,
        }

    @app.post("/sessions", status_code=201)
    def login(body: LoginBody):
        session = server.authenticate(body.identifier, body.secret)
        return {
            "token": session.token,
            "user_id": session.user_id,
            "expires_at": _dt(session.expires_at),
        }

    @app.delete("/sessions/current")
    def logout(
        user_id: str = Depends(required_user),
        token: str | None = Depends(bearer_token),
    ):
        server.logout(token)
        return {"ok": True}

    @app.get("/users/me")
    def whoami(user_id: str = Depends(required_user)):
        user = server.state.users[user_id]
        return {
            "user_id": user.user_id,
            "display_name": user.display_name,
            "email": user.email,
            "verified": user.verified,
            "profile": user.profile,
        }

    # -- groups --

    @app.get("/groups")
    def list_groups(viewer: str | None = Depends(optional_user)):
        out = []
        for group in server.state.groups.values():
            if server._can_read_group(viewer, group):
                out.append(
                    {
                        "id": group.id,
                        "name": group.name,
                        "description": group.description,
                        "access": group.access.value,
                        "join_policy": group.join_policy.value,
                        "member_count": len(group.members),
                    }
                )
        return sorted(out, key=lambda g: g["name"])

    @app.post("/groups", status_code=201)
    def create_group(body: GroupBody, user_id: str = Depends(required_user)):
        group = server.create_group(
            body.name,
            body.description,
            GroupAccess(body.access),
            JoinPolicy(body.join_policy),
            user_id,
        )
        return {"id": group.id, "name": group.name}

    @app.get("/groups/{group_id}")
    def group_homepage(group_id: str, viewer: str | None = Depends(optional_user)):
        page = server.group_homepage(group_id, viewer)
        group = server.state.groups[group_id]
        return {
            "group_id": page.group_id,
            "name": page.name,
            "description": page.description,
            "viewer_is_member": page.viewer_is_member,
            "show_join_link": page.show_join_link,
            "join_policy": group.join_policy.value,
            "access": group.access.value,
            "areas": [{"id": a, "title": t} for a, t in page.areas],
            "linked_areas": [{"id": a, "title": t} for a, t in page.linked_areas],
        }

    @app.post("/groups/{group_id}/join", status_code=201)
    def join_group(group_id: str, user_id: str = Depends(required_user)):
        result = server.join_group(group_id, user_id)
        if hasattr(result, "role"):
            return {"status": "member", "role": result.role.value}
        return {"status": "pending", "requested_at": _dt(result.requested_at)}

    @app.post("/groups/{group_id}/members/{member_id}/approve")
    def approve_join(
        group_id: str, member_id: str, user_id: str = Depends(required_user)
    ):
        membership = server.approve_join(group_id, member_id, user_id)
        return {"status": "member", "role": membership.role.value}

    @app.get("/groups/{group_id}/areas")
    def group_areas(group_id: str, viewer: str | None = Depends(optional_user)):
        page = server.group_homepage(group_id, viewer)
        return {
            "areas": [{"id": a, "title": t} for a, t in page.areas],
            "linked_areas": [{"id": a, "title": t} for a, t in page.linked_areas],
        }

    @app.post("/groups/{group_id}/areas", status_code=201)
    def create_area(
        group_id: str, body: AreaBody, user_id: str = Depends(required_user)
    ):
        area = server.create_meeting_area(
            group_id, body.title, body.description, user_id
        )
        return {"id": area.id, "title": area.title}

    @app.get("/groups/{group_id}/export")
    def export_group(group_id: str, user_id: str = Depends(required_user)):
        bundle = server.export_group(group_id, user_id)
        return Response(
            content=bundle.to_bytes(),
            media_type="application/json",
        )

    @app.post("/groups/import", status_code=201)
    def import_group(body: ImportBody, user_id: str = Depends(required_user)):
        group = server.import_group(body.bundle, user_id, rename=body.rename)
        return {"id": group.id, "name": group.name}

    # -- meeting areas --

    @app.get("/areas/{area_id}")
    def area_view(area_id: str, viewer: str | None = Depends(optional_user)):
        area = server.get_area(area_id, viewer)
        group = server.state.groups[area.owner_group]
        return {
            "id": area.id,
            "owner_group": area.owner_group,
            "group_name": group.name,
            "title": area.title,
            "description": area.description,
            "linked_groups": area.linked_groups,
            "folio": area.folio,
            "discussion": area.discussion,
            "can_post": server.authorize_user(viewer, area_id, AuthAction.POST),
        }

    @app.post("/areas/{area_id}/link")
    def link_area(
        area_id: str, body: LinkBody, user_id: str = Depends(required_user)
    ):
        area = server.link_area(area_id, body.group_id, user_id)
        return {"id": area.id, "linked_groups": area.linked_groups}

    @app.get("/areas/{area_id}/items")
    def folio(area_id: str, viewer: str | None = Depends(optional_user)):
        return [_item_view(server, item) for item in server.folio(area_id, viewer)]

    @app.post("/areas/{area_id}/items", status_code=201)
    def post_item(
        area_id: str, body: ItemBody, user_id: str = Depends(required_user)
    ):
        spec = _item_spec_from_body(body.kind)
        if isinstance(spec, PollSpec) and not spec.question:
            spec = PollSpec(
                question=body.title,
                procedure=spec.procedure,
                options=spec.options,
                binding=spec.binding,
                deadline=spec.deadline,
                quorum=spec.quorum,
                open_ballots=spec.open_ballots,
            )
        item = server.post_item(area_id, user_id, body.title, spec)
        return _item_view(server, item)

    @app.get("/areas/{area_id}/comments")
    def comments_index(
        area_id: str,
        order: Literal["chronological", "threaded"] = "chronological",
        viewer: str | None = Depends(optional_user),
    ):
        headers = server.comments_index(area_id, IndexOrder(order), viewer)
        return [_header_view(h) for h in headers]

    @app.post("/areas/{area_id}/comments", status_code=201)
    def post_comment(
        area_id: str, body: CommentBody, user_id: str = Depends(required_user)
    ):
        comment = server.post_comment(
            area_id, user_id, body.subject, body.body, _target_from_body(body.target)
        )
        return _comment_view(server, comment)

    @app.post("/activation")
    def activate(body: ActivateBody, viewer: str | None = Depends(optional_user)):
        comment = server.state.comments.get(body.comment_id)
        if comment is None:
            raise errors.UnknownComment(body.comment_id)
        server._require_read_access(viewer, server.state.areas[comment.area])
        state = server.activate(
            ActivateVia(body.via), body.comment_id, _parse_activation(body.prior)
        )
        return _activation_view(state)

    @app.get("/items/{item_id}")
    def item_view(item_id: str, viewer: str | None = Depends(optional_user)):
        return _item_view(server, server.get_item(item_id, viewer))

    @app.get("/comments/{comment_id}")
    def comment_view(comment_id: str, viewer: str | None = Depends(optional_user)):
        return _comment_view(server, server.get_comment(comment_id, viewer))

    # -- documents --

    @app.get("/documents/{document_id}")
    def document_view(
        document_id: str, viewer: str | None = Depends(optional_user)
    ):
        record = server.get_document(document_id)
        server._require_read_access(viewer, server.state.areas[record.area_id])
        latest = record.latest
        return {
            "document_id": record.document_id,
            "area": record.area_id,
            "item_id": record.item_id,
            "revision": latest.revision,
            "plaintext": latest.is_plaintext,
            "text": latest.text if latest.is_plaintext else None,
            "filename": None
            if latest.is_plaintext
            else latest.source.filename,
            "media_type": None
            if latest.is_plaintext
            else latest.source.media_type,
            "revisions": [
                {
                    "revision": r.revision,
                    "author": r.author,
                    "created_at": _dt(r.created_at),
                }
                for r in record.revisions
            ],
            "anchors": record.anchor_ids,
        }

    @app.get("/documents/{document_id}/annotated")
    def annotated(
        document_id: str,
        revision: int | None = None,
        active_anchor: str | None = None,
        viewer: str | None = Depends(optional_user),
    ):
        record = server.get_document(document_id)
        server._require_read_access(viewer, server.state.areas[record.area_id])
        segments = server.render_annotated(
            document_id, revision=revision, active_anchor=active_anchor
        )
        return [_segment_view(server, s) for s in segments]

    @app.post("/documents/{document_id}/revisions", status_code=201)
    def revise(
        document_id: str, body: RevisionBody, user_id: str = Depends(required_user)
    ):
        revision = server.revise_document(document_id, body.text, user_id)
        return {"document_id": document_id, "revision": revision.revision}

    @app.post("/documents/{document_id}/anchors", status_code=201)
    def attach_intext(
        document_id: str, body: AnchorBody, user_id: str = Depends(required_user)
    ):
        comment, anchor = server.attach_intext(
            document_id,
            body.offset,
            body.subject,
            body.body,
            user_id,
            revision=body.revision,
        )
        return {
            "comment": _comment_view(server, comment),
            "anchor_id": anchor.anchor_id,
            "offset": anchor.offsets[anchor.created_on_revision],
        }

    @app.get("/documents/{document_id}/orphans")
    def orphans(document_id: str, viewer: str | None = Depends(optional_user)):
        record = server.get_document(document_id)
        server._require_read_access(viewer, server.state.areas[record.area_id])
        out = []
        for anchor in server.orphaned_anchors(document_id):
            comment = server.state.comments.get(anchor.comment_id or "")
            out.append(
                {
                    "anchor_id": anchor.anchor_id,
                    "comment_id": anchor.comment_id,
                    "subject": comment.subject if comment else None,
                }
            )
        return out

    # -- polls --

    @app.get("/polls/{poll_id}")
    def poll_view(poll_id: str, viewer: str | None = Depends(optional_user)):
        record = server.get_poll(poll_id)
        server._require_read_access(viewer, server.state.areas[record.area_id])
        return _poll_view(server, record, viewer)

    @app.get("/polls/{poll_id}/tally")
    def poll_tally(poll_id: str, viewer: str | None = Depends(optional_user)):
        record = server.get_poll(poll_id)
        server._require_read_access(viewer, server.state.areas[record.area_id])
        return _serialize_tally(server.tally(poll_id))

    @app.post("/polls/{poll_id}/ballots", status_code=201)
    def cast_ballot(
        poll_id: str, body: BallotBody, user_id: str = Depends(required_user)
    ):
        content = _ballot_content_from_body(body.content)
        ballot = server.cast_ballot(poll_id, user_id, content)
        return {
            "poll_id": poll_id,
            "cast_at": _dt(ballot.cast_at),
            "content": _serialize_content(ballot.content),
        }

    @app.get("/polls/{poll_id}/ballots")
    def poll_ballots(poll_id: str, user_id: str = Depends(required_user)):
        ballots = server.poll_ballots(poll_id, user_id)
        return [
            {
                "voter": b.voter,
                "cast_at": _dt(b.cast_at),
                "content": _serialize_content(b.content),
            }
            for b in ballots
        ]

    @app.post("/polls/{poll_id}/close")
    def close_poll(poll_id: str, user_id: str = Depends(required_user)):
        outcome = server.close_poll(poll_id, user_id)
        return _serialize_outcome(outcome)

    # -- feedback --

    @app.post("/feedback", status_code=201)
    def submit_feedback(body: FeedbackBody, user_id: str = Depends(required_user)):
        record = server.submit_feedback_as(
            user_id,
            body.scope,
            body.rating,
            body.text,
            group_id=body.group_id,
            anonymous=body.anonymous,
        )
        return {"id": record.id, "scope": record.scope, "rating": record.rating}

    @app.get("/feedback")
    def list_feedback(
        scope: Literal["group", "platform"],
        group_id: str | None = None,
        user_id: str = Depends(required_user),
    ):
        return server.list_feedback(user_id, scope, group_id)

    # -- mail gateway --

    @app.get("/areas/{area_id}/posting-address")
    def posting_address(
        area_id: str,
        target_kind: Literal["global", "item", "comment"] = "global",
        ref: str | None = None,
        viewer: str | None = Depends(optional_user),
    ):
        area = server.get_area(area_id, viewer)
        return {
            "address": server.posting_address(
                area.id, RoutingTarget(target_kind, ref)
            )
        }

    @app.post("/areas/{area_id}/notify")
    def notify_subscribers(
        area_id: str, body: NotifyBody, user_id: str = Depends(required_user)
    ):
        area = server.get_area(area_id, user_id)
        group = server.state.groups[area.owner_group]
        if not server._is_moderator(user_id, group):
            raise errors.NotAuthorized("broadcasting is a moderator action")
        messages = server.broadcast(NotificationEvent(body.kind, body.object_id))
        return {"sent": len(messages)}

    @app.post("/areas/{area_id}/inbound-mail", status_code=201)
    def inbound_mail(
        area_id: str, body: InboundMailBody, user_id: str = Depends(required_user)
    ):
        area = server.get_area(area_id, user_id)
        group = server.state.groups[area.owner_group]
        if not server._is_moderator(user_id, group):
            raise errors.NotAuthorized("mail injection is a moderator action")
        comment = server.deliver_inbound(base64.b64decode(body.raw_b64))
        return _comment_view(server, comment)

    @app.post("/areas/{area_id}/import-mail")
    def import_mail(
        area_id: str, body: MailImportBody, user_id: str = Depends(required_user)
    ):
        report = server.import_mail_archive(
            area_id, base64.b64decode(body.mbox_b64), body.address_map, user_id
        )
        return {
            "imported": report.imported,
            "threaded": report.threaded,
            "orphan_parent": report.orphan_parent,
            "unmapped": report.unmapped,
            "duplicates": report.duplicates,
            "rejected": report.rejected,
        }

    return app
