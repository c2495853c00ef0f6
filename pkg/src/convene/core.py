"""Group spaces, meeting areas, folio items, comments, and activation.

Records are append-only: nothing is ever hard-deleted, only flagged as
retracted, so comment targets can never dangle. Folio ordinals are handed
out at creation and never renumbered; item labels like "6. <title>" stay
stable for as long as the group exists.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from datetime import datetime
from urllib.parse import urlparse

from .errors import (
    AccessDenied,
    AlreadyMember,
    DanglingTarget,
    InvalidAnchor,
    InvalidName,
    InvalidSpec,
    NoReference,
    NotAMember,
    NotAuthorized,
    SelfLink,
    UnknownArea,
    UnknownComment,
    UnknownGroup,
    UnknownItem,
    UnknownUser,
    DuplicateName,
)
from .model import (
    ActivateVia,
    ActivationState,
    Comment,
    CommentHeader,
    CommentTarget,
    DiscussionItem,
    Global,
    Group,
    GroupAccess,
    GroupHomepage,
    InText,
    Item,
    ItemKind,
    ItemReference,
    JoinPolicy,
    LinkItem,
    MAX_BODY_BYTES,
    MAX_GROUP_NAME,
    MAX_SUBJECT,
    MAX_TITLE,
    MeetingArea,
    Member,
    MemberRole,
    Membership,
    OnItem,
    ReplyTo,
    IndexOrder,
)


@dataclass(frozen=True)
class PendingJoin:
    group_id: str
    user_id: str
    requested_at: datetime


class CoreOps:
    """Group/area/item/comment operations; mixed into the server."""

    # -- groups --

    def create_group(
        self,
        name: str,
        description: str,
        access: GroupAccess,
        join_policy: JoinPolicy,
        creator: str,
    ) -> Group:
        self._require_user(creator)
        if not name or len(name) > MAX_GROUP_NAME:
            raise InvalidName("group name must be 1-100 characters")
        with self._state.registry_lock:
            if name in self._state.groups_by_name:
                raise DuplicateName(name)
            now = self._now()
            group = Group(
                id=self._new_id("g"),
                name=name,
                description=description,
                access=GroupAccess(access),
                join_policy=JoinPolicy(join_policy),
                creator=creator,
                created_at=now,
            )
            group.members[creator] = Membership(
                user_id=creator, role=MemberRole.MODERATOR, joined_at=now
            )
            self._state.groups[group.id] = group
            self._state.groups_by_name[name] = group.id
        self._persist_group(group.id)
        return copy.deepcopy(group)

    def join_group(self, group_id: str, user_id: str) -> Membership | PendingJoin:
        self._require_user(user_id)
        group = self._require_group(group_id)
        with self._group_lock(group_id):
            if user_id in group.members:
                raise AlreadyMember(user_id)
            if group.join_policy == JoinPolicy.OPEN_JOIN:
                membership = Membership(
                    user_id=user_id, role=MemberRole.MEMBER, joined_at=self._now()
                )
                group.members[user_id] = membership
                self._persist_group(group_id)
                return copy.deepcopy(membership)
            requested_at = group.pending_joins.setdefault(user_id, self._now())
            self._persist_group(group_id)
            return PendingJoin(group_id, user_id, requested_at)

    def approve_join(self, group_id: str, user_id: str, actor: str) -> Membership:
        group = self._require_group(group_id)
        with self._group_lock(group_id):
            if not self._is_moderator(actor, group):
                raise NotAuthorized("join approval is a moderator action")
            if user_id not in group.pending_joins:
                raise InvalidSpec(f"no pending join request from {user_id}")
            del group.pending_joins[user_id]
            membership = Membership(
                user_id=user_id, role=MemberRole.MEMBER, joined_at=self._now()
            )
            group.members[user_id] = membership
            self._persist_group(group_id)
            return copy.deepcopy(membership)

    def deny_join(self, group_id: str, user_id: str, actor: str) -> None:
        group = self._require_group(group_id)
        with self._group_lock(group_id):
            if not self._is_moderator(actor, group):
                raise NotAuthorized("join denial is a moderator action")
            group.pending_joins.pop(user_id, None)
            self._persist_group(group_id)

    def set_member_role(
        self, group_id: str, user_id: str, role: MemberRole, actor: str
    ) -> Membership:
        group = self._require_group(group_id)
        with self._group_lock(group_id):
            if not self._is_moderator(actor, group):
                raise NotAuthorized("role changes are a moderator action")
            membership = group.members.get(user_id)
            if membership is None:
                raise NotAMember(user_id)
            membership.role = MemberRole(role)
            self._persist_group(group_id)
            return copy.deepcopy(membership)

    def set_notifications(
        self, group_id: str, user_id: str, enabled: bool
    ) -> Membership:
        group = self._require_group(group_id)
        with self._group_lock(group_id):
            membership = group.members.get(user_id)
            if membership is None:
                raise NotAMember(user_id)
            membership.notifications_enabled = enabled
            self._persist_group(group_id)
            return copy.deepcopy(membership)

    def group_homepage(self, group_id: str, viewer: str | None) -> GroupHomepage:
        group = self._require_group(group_id)
        if not self._can_read_group(viewer, group):
            raise AccessDenied(group_id)
        areas = tuple(
            (aid, self._state.areas[aid].title) for aid in group.area_ids
        )
        linked = tuple(
            (aid, self._state.areas[aid].title) for aid in group.linked_area_ids
        )
        is_member = viewer is not None and viewer in group.members
        return GroupHomepage(
            group_id=group.id,
            name=group.name,
            description=group.description,
            viewer_is_member=is_member,
            show_join_link=not is_member,
            areas=areas,
            linked_areas=linked,
        )

    # -- meeting areas --

    def create_meeting_area(
        self, group_id: str, title: str, description: str, creator: str
    ) -> MeetingArea:
        group = self._require_group(group_id)
        if not title or len(title) > MAX_TITLE:
            raise InvalidName("area title must be 1-200 characters")
        with self._group_lock(group_id):
            if creator not in group.members:
                raise NotAMember(creator)
            area = MeetingArea(
                id=self._new_id("a"),
                owner_group=group_id,
                title=title,
                description=description,
                creator=creator,
                created_at=self._now(),
            )
            self._state.areas[area.id] = area
            group.area_ids.append(area.id)
            self._persist_group(group_id)
            return copy.deepcopy(area)

    def link_area(self, area_id: str, other_group_id: str, actor: str) -> MeetingArea:
        area = self._require_area(area_id)
        other = self._require_group(other_group_id)
        if other_group_id == area.owner_group:
            raise SelfLink(area_id)
        owner = self._state.groups[area.owner_group]
        if actor not in owner.members:
            raise NotAMember(actor)
        # Both group writers, in canonical id order, so concurrent links
        # can never deadlock.
        first, second = sorted([area.owner_group, other_group_id])
        with self._group_lock(first), self._group_lock(second):
            if other_group_id not in area.linked_groups:
                area.linked_groups.append(other_group_id)
                other.linked_area_ids.append(area_id)
            self._persist_group(area.owner_group)
            self._persist_group(other_group_id)
            return copy.deepcopy(area)

    def get_area(self, area_id: str, viewer: str | None = None) -> MeetingArea:
        area = self._require_area(area_id)
        if not self._can_read_area(viewer, area):
            raise AccessDenied(area_id)
        return copy.deepcopy(area)

    def get_group(self, group_id: str) -> Group:
        return copy.deepcopy(self._require_group(group_id))

    def get_item(self, item_id: str, viewer: str | None = None) -> Item:
        item = self._state.items.get(item_id)
        if item is None:
            raise UnknownItem(item_id)
        if not self._can_read_area(viewer, self._state.areas[item.area]):
            raise AccessDenied(item_id)
        return copy.deepcopy(item)

    def get_comment(self, comment_id: str, viewer: str | None = None) -> Comment:
        comment = self._require_comment(comment_id)
        if not self._can_read_area(viewer, self._state.areas[comment.area]):
            raise AccessDenied(comment_id)
        return copy.deepcopy(comment)

    # -- items --

    def post_item(self, area_id: str, author: str, title: str, spec) -> Item:
        """Append a folio item. `spec` picks the kind: LinkItem or
        DiscussionItem directly, a document source, or a poll spec."""
        from .decisions import PollSpec
        from .documents import PlainTextSource, UploadedSource

        if isinstance(spec, (PlainTextSource, UploadedSource)):
            item, _ = self.create_document(area_id, title, spec, author)
            return item
        if isinstance(spec, PollSpec):
            return self.open_poll(area_id, spec, author)
        area = self._require_area(area_id)
        with self._group_lock(area.owner_group):
            self._require_post_access(author, area)
            if isinstance(spec, LinkItem):
                parsed = urlparse(spec.url)
                if parsed.scheme not in ("http", "https") or not parsed.netloc:
                    raise InvalidSpec(f"not a valid URL: {spec.url!r}")
            elif not isinstance(spec, DiscussionItem):
                raise InvalidSpec(f"unsupported item spec: {spec!r}")
            item = self._append_item(area, author, title, spec)
            self._persist_group(area.owner_group)
            return copy.deepcopy(item)

    def folio(self, area_id: str, viewer: str | None = None) -> list[Item]:
        area = self._require_area(area_id)
        if not self._can_read_area(viewer, area):
            raise AccessDenied(area_id)
        return [copy.deepcopy(self._state.items[i]) for i in area.folio]

    def retract_item(self, item_id: str, actor: str) -> Item:
        item = self._state.items.get(item_id)
        if item is None:
            raise UnknownItem(item_id)
        area = self._state.areas[item.area]
        with self._group_lock(area.owner_group):
            group = self._state.groups[area.owner_group]
            if actor != item.author and not self._is_moderator(actor, group):
                raise NotAuthorized("only the author or a moderator may retract")
            item.retracted = True
            self._persist_group(area.owner_group)
            return copy.deepcopy(item)

    # -- comments --

    def post_comment(
        self,
        area_id: str,
        author: str,
        subject: str,
        body: str,
        target: CommentTarget,
    ) -> Comment:
        area = self._require_area(area_id)
        with self._group_lock(area.owner_group):
            self._require_post_access(author, area)
            self._check_target(area, target)
            comment = self._append_comment(area, author, subject, body, target)
            self._persist_group(area.owner_group)
            return copy.deepcopy(comment)

    def retract_comment(self, comment_id: str, actor: str) -> Comment:
        comment = self._require_comment(comment_id)
        area = self._state.areas[comment.area]
        with self._group_lock(area.owner_group):
            group = self._state.groups[area.owner_group]
            if actor != comment.author and not self._is_moderator(actor, group):
                raise NotAuthorized("only the author or a moderator may retract")
            comment.retracted = True
            self._persist_group(area.owner_group)
            return copy.deepcopy(comment)

    def comment_header(self, comment_id: str) -> CommentHeader:
        comment = self._require_comment(comment_id)
        return self._header_for(comment)

    def comments_index(
        self,
        area_id: str,
        order: IndexOrder = IndexOrder.CHRONOLOGICAL,
        viewer: str | None = None,
    ) -> list[CommentHeader]:
        area = self._require_area(area_id)
        if not self._can_read_area(viewer, area):
            raise AccessDenied(area_id)
        comments = [self._state.comments[cid] for cid in area.discussion]
        by_time = sorted(
            range(len(comments)), key=lambda k: (comments[k].created_at, k)
        )
        if IndexOrder(order) == IndexOrder.CHRONOLOGICAL:
            return [self._header_for(comments[k]) for k in by_time]
        children: dict[str, list[Comment]] = {}
        roots: list[Comment] = []
        for k in by_time:
            comment = comments[k]
            if isinstance(comment.target, ReplyTo):
                children.setdefault(comment.target.comment_id, []).append(comment)
            else:
                roots.append(comment)
        # explicit stack: reply chains can outgrow the recursion limit
        ordered: list[CommentHeader] = []
        stack = list(reversed(roots))
        while stack:
            comment = stack.pop()
            ordered.append(self._header_for(comment))
            stack.extend(reversed(children.get(comment.id, ())))
        return ordered

    def activate(
        self,
        via: ActivateVia,
        comment_id: str,
        prior: ActivationState | None = None,
    ) -> ActivationState:
        prior = prior or ActivationState()
        comment = self._require_comment(comment_id)
        if ActivateVia(via) == ActivateVia.SUBJECT:
            # Viewing a comment leaves the active item reference alone.
            return replace(prior, active_comment=comment_id)
        reference = self._item_reference_for(comment)
        if reference is None:
            raise NoReference(f"comment {comment_id} carries no item reference")
        return ActivationState(
            active_comment=comment_id,
            active_reference=comment_id,
            displayed_item=reference.item_id,
            highlighted_anchor=reference.anchor_id,
        )

    # -- access predicates --

    def _can_read_group(self, user_id: str | None, group: Group) -> bool:
        if group.access == GroupAccess.OPEN:
            return True
        return user_id is not None and user_id in group.members

    def _can_read_area(self, user_id: str | None, area: MeetingArea) -> bool:
        owner = self._state.groups[area.owner_group]
        if user_id is not None and self._is_area_member(user_id, area):
            return True
        return owner.access == GroupAccess.OPEN

    def _can_post_area(self, user_id: str | None, area: MeetingArea) -> bool:
        return user_id is not None and self._is_area_member(user_id, area)

    def _is_area_member(self, user_id: str, area: MeetingArea) -> bool:
        if user_id in self._state.groups[area.owner_group].members:
            return True
        for gid in area.linked_groups:
            linked = self._state.groups.get(gid)
            if linked is not None and user_id in linked.members:
                return True
        return False

    def _is_moderator(self, user_id: str | None, group: Group) -> bool:
        if user_id is None:
            return False
        membership = group.members.get(user_id)
        return membership is not None and membership.role == MemberRole.MODERATOR

    def _require_post_access(self, user_id: str, area: MeetingArea) -> None:
        if not self._can_post_area(user_id, area):
            raise AccessDenied(f"{user_id} may not post in area {area.id}")

    def _require_read_access(self, user_id: str | None, area: MeetingArea) -> None:
        if not self._can_read_area(user_id, area):
            raise AccessDenied(f"area {area.id} is not readable here")

    # -- shared internals --

    def _require_group(self, group_id: str) -> Group:
        group = self._state.groups.get(group_id)
        if group is None:
            raise UnknownGroup(group_id)
        return group

    def _require_area(self, area_id: str) -> MeetingArea:
        area = self._state.areas.get(area_id)
        if area is None:
            raise UnknownArea(area_id)
        return area

    def _require_comment(self, comment_id: str) -> Comment:
        comment = self._state.comments.get(comment_id)
        if comment is None:
            raise UnknownComment(comment_id)
        return comment

    def _require_user(self, user_id: str) -> Member:
        user = self._state.users.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        return user

    def _append_item(
        self, area: MeetingArea, author: str, title: str, kind: ItemKind
    ) -> Item:
        if not title or len(title) > MAX_TITLE:
            raise InvalidSpec("item title must be 1-200 characters")
        item = Item(
            id=self._new_id("i"),
            area=area.id,
            author=author,
            created_at=self._now(),
            title=title,
            ordinal=area.next_ordinal,
            kind=kind,
        )
        area.next_ordinal += 1
        self._state.items[item.id] = item
        area.folio.append(item.id)
        return item

    def _append_comment(
        self,
        area: MeetingArea,
        author: str,
        subject: str,
        body: str,
        target: CommentTarget,
        created_at: datetime | None = None,
        source_message_id: str | None = None,
    ) -> Comment:
        if not subject:
            subject = self._default_subject(target)
        if len(subject) > MAX_SUBJECT:
            raise InvalidSpec("subject must be at most 200 characters")
        if len(body.encode("utf-8")) > MAX_BODY_BYTES:
            raise InvalidSpec("comment body exceeds 256 KiB")
        comment = Comment(
            id=self._new_id("c"),
            area=area.id,
            author=author,
            created_at=created_at or self._now(),
            subject=subject,
            body=body,
            target=target,
            source_message_id=source_message_id,
        )
        self._state.comments[comment.id] = comment
        area.discussion.append(comment.id)
        if source_message_id is not None:
            self._state.comments_by_source[source_message_id] = comment.id
        return comment

    def _default_subject(self, target: CommentTarget) -> str:
        if isinstance(target, ReplyTo):
            parent = self._state.comments[target.comment_id]
            return f"Re: {parent.subject}"[:MAX_SUBJECT]
        if isinstance(target, OnItem):
            return self._state.items[target.item_id].title
        if isinstance(target, InText):
            anchor = self._state.anchors[target.anchor_id]
            document = self._state.documents[anchor.document_id]
            return self._state.items[document.item_id].title
        return ""

    def _check_target(self, area: MeetingArea, target: CommentTarget) -> None:
        if isinstance(target, Global):
            return
        if isinstance(target, OnItem):
            item = self._state.items.get(target.item_id)
            if item is None or item.area != area.id:
                raise DanglingTarget(f"item {target.item_id} is not in this area")
            return
        if isinstance(target, ReplyTo):
            parent = self._state.comments.get(target.comment_id)
            if parent is None or parent.area != area.id:
                raise DanglingTarget(
                    f"comment {target.comment_id} is not in this area"
                )
            return
        if isinstance(target, InText):
            anchor = self._state.anchors.get(target.anchor_id)
            if anchor is None:
                raise InvalidAnchor(f"unknown anchor {target.anchor_id}")
            document = self._state.documents[anchor.document_id]
            if document.area_id != area.id:
                raise InvalidAnchor("anchor belongs to a different area")
            if anchor.comment_id is not None:
                raise InvalidAnchor("anchor already carries a comment")
            return
        raise InvalidSpec(f"unsupported comment target: {target!r}")

    def _item_reference_for(self, comment: Comment) -> ItemReference | None:
        if isinstance(comment.target, OnItem):
            item = self._state.items[comment.target.item_id]
            return ItemReference(item.id, None, item.label)
        if isinstance(comment.target, InText):
            anchor = self._state.anchors[comment.target.anchor_id]
            document = self._state.documents[anchor.document_id]
            item = self._state.items[document.item_id]
            return ItemReference(item.id, anchor.anchor_id, item.label)
        return None

    def _header_for(self, comment: Comment) -> CommentHeader:
        author = self._state.users.get(comment.author)
        return CommentHeader(
            comment_id=comment.id,
            subject=comment.subject,
            author_name=author.display_name if author else comment.author,
            created_at=comment.created_at,
            item_reference=self._item_reference_for(comment),
        )
