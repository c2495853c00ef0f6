"""Routing tokens, notifications, inbound parsing, and mbox import."""

import random
from datetime import datetime, timezone
from email.message import EmailMessage
from email.utils import format_datetime

import pytest

from convene import (
    DiscussionItem,
    Global,
    NotificationEvent,
    NotifyKind,
    ReplyTo,
    RoutingTarget,
)
from convene.errors import (
    AccessDenied,
    BadToken,
    Duplicate,
    MalformedArchive,
    NoTextPart,
    NotAuthorized,
    UnknownSender,
    UnknownTarget,
)
from convene.mailgate import strip_quoted_trailer, strip_subject_tag

from conftest import build_community
from oracles import oracle_reply_forest


@pytest.fixture
def com(server):
    return build_community(server)


def make_reply(note, sender_email, body=None, message_id="<reply-1@client.test>"):
    reply = EmailMessage()
    reply["From"] = f"Somebody <{sender_email}>"
    reply["To"] = note.sender
    reply["Subject"] = "Re: " + note.subject
    reply["Message-ID"] = message_id
    reply["In-Reply-To"] = note.message_id
    quoted = "\n".join("> " + line for line in note.body.splitlines())
    reply.set_content(body or f"I agree entirely.\n\n{quoted}")
    return reply.as_bytes()


# -- tokens ---------------------------------------------------------------------------

def test_token_round_trip_all_kinds(com):
    item = com.server.post_item(
        com.area_id, com.member, "Agenda", DiscussionItem("p")
    )
    comment = com.server.post_comment(com.area_id, com.member, "s", "b", Global())
    for target in (
        RoutingTarget("global"),
        RoutingTarget("item", item.id),
        RoutingTarget("comment", comment.id),
    ):
        token = com.server.encode_token(com.area_id, target)
        assert len(token) <= 64 and token.isascii()
        assert com.server.decode_token(token) == (com.area_id, target)


def test_distinct_targets_distinct_tokens(com):
    i1 = com.server.post_item(com.area_id, com.member, "One", DiscussionItem("p"))
    i2 = com.server.post_item(com.area_id, com.member, "Two", DiscussionItem("p"))
    t1 = com.server.encode_token(com.area_id, RoutingTarget("item", i1.id))
    t2 = com.server.encode_token(com.area_id, RoutingTarget("item", i2.id))
    tg = com.server.encode_token(com.area_id, RoutingTarget("global"))
    assert len({t1, t2, tg}) == 3


def test_unresolvable_target_rejected(com):
    with pytest.raises(UnknownTarget):
        com.server.encode_token(com.area_id, RoutingTarget("item", "i000missing"))
    with pytest.raises(UnknownTarget):
        com.server.encode_token("a000missing", RoutingTarget("global"))


def test_every_single_character_mutation_fails(com):
    token = com.server.encode_token(com.area_id, RoutingTarget("global"))
    mutations = 0
    for position in range(len(token)):
        for replacement in "ax0.AZ9~":
            if replacement == token[position]:
                continue
            mutated = token[:position] + replacement + token[position + 1 :]
            with pytest.raises(BadToken):
                com.server.decode_token(mutated)
            mutations += 1
    assert mutations >= 200
    with pytest.raises(BadToken):
        com.server.decode_token(token[:-1])  # truncation
    with pytest.raises(BadToken):
        com.server.decode_token(token.upper())  # re-encoding


# -- notify ---------------------------------------------------------------------------

def test_comment_notification_format(com):
    comment = com.server.post_comment(
        com.area_id, com.member, "Shorter workshops", "Cut them to 45 minutes.",
        Global(),
    )
    note = com.server.notify(
        NotificationEvent(NotifyKind.NEW_COMMENT, comment.id), com.moderator
    )
    assert note.subject == "[Labortech:Workshops] Shorter workshops"
    assert note.to == "maya@mail.test"
    assert note.sender.startswith("post+") and note.sender.endswith("@mail.test")
    assert "Cut them to 45 minutes." in note.body
    assert "http://convene.test/areas/" + com.area_id in note.body
    local = note.sender.split("@")[0]
    token = local.split("+", 1)[1]
    assert com.server.decode_token(token) == (
        com.area_id,
        RoutingTarget("comment", comment.id),
    )


def test_reply_notification_threads_under_parent(com):
    parent = com.server.post_comment(com.area_id, com.member, "Venue", "b", Global())
    parent_note = com.server.notify(
        NotificationEvent(NotifyKind.NEW_COMMENT, parent.id), com.moderator
    )
    reply = com.server.post_comment(
        com.area_id, com.moderator, "", "agreed", ReplyTo(parent.id)
    )
    reply_note = com.server.notify(
        NotificationEvent(NotifyKind.NEW_COMMENT, reply.id), com.member
    )
    assert reply_note.in_reply_to == parent_note.message_id


def test_poll_closed_notification_contains_outcome_and_counts(com):
    from convene.decisions import PollSpec, Procedure, VoteChoice, YesNoAbstain

    item = com.server.open_poll(
        com.area_id, PollSpec("Adopt it?", Procedure.MAJORITY), com.moderator
    )
    poll_id = item.kind.poll_id
    com.server.cast_ballot(poll_id, com.member, YesNoAbstain(VoteChoice.YES))
    com.server.close_poll(poll_id, com.moderator)
    note = com.server.notify(
        NotificationEvent(NotifyKind.POLL_CLOSED, poll_id), com.member
    )
    assert "Outcome: passed" in note.body
    assert "yes=1" in note.body and "no=0" in note.body and "abstain=0" in note.body


def test_subscriber_without_access_denied(com):
    comment = com.server.post_comment(com.area_id, com.member, "s", "b", Global())
    with pytest.raises(AccessDenied):
        com.server.notify(
            NotificationEvent(NotifyKind.NEW_COMMENT, comment.id), com.outsider
        )


def test_notifications_disabled_sends_nothing(com):
    com.server.set_notifications(com.group_id, com.member, False)
    comment = com.server.post_comment(com.area_id, com.moderator, "s", "b", Global())
    note = com.server.notify(
        NotificationEvent(NotifyKind.NEW_COMMENT, comment.id), com.member
    )
    assert note is None
    sent = com.server.broadcast(NotificationEvent(NotifyKind.NEW_COMMENT, comment.id))
    assert com.member not in {
        com.server.state.users_by_email[m.to.lower()] for m in sent
    }


# -- inbound parsing --------------------------------------------------------------------

def test_reply_round_trip_posts_to_parent(com):
    comment = com.server.post_comment(
        com.area_id, com.member, "Shorter workshops", "original body", Global()
    )
    note = com.server.notify(
        NotificationEvent(NotifyKind.NEW_COMMENT, comment.id), com.moderator
    )
    posted = com.server.deliver_inbound(make_reply(note, "maya@mail.test"))
    assert posted.target == ReplyTo(comment.id)
    assert posted.subject == "Re: Shorter workshops"
    assert posted.body == "I agree entirely."
    assert posted.author == com.moderator


def test_unknown_sender_rejected(com):
    comment = com.server.post_comment(com.area_id, com.member, "s", "b", Global())
    note = com.server.notify(
        NotificationEvent(NotifyKind.NEW_COMMENT, comment.id), com.moderator
    )
    with pytest.raises(UnknownSender):
        com.server.parse_inbound(make_reply(note, "stranger@elsewhere.test"))


def test_duplicate_delivery_creates_one_comment(com):
    comment = com.server.post_comment(com.area_id, com.member, "s", "b", Global())
    note = com.server.notify(
        NotificationEvent(NotifyKind.NEW_COMMENT, comment.id), com.moderator
    )
    raw = make_reply(note, "maya@mail.test")
    before = len(com.server.get_area(com.area_id, com.member).discussion)
    com.server.deliver_inbound(raw)
    with pytest.raises(Duplicate):
        com.server.deliver_inbound(raw)
    after = len(com.server.get_area(com.area_id, com.member).discussion)
    assert after == before + 1


def test_missing_token_rejected(com):
    msg = EmailMessage()
    msg["From"] = "kazmi@mail.test"
    msg["To"] = "post@mail.test"
    msg["Subject"] = "no token"
    msg.set_content("body")
    with pytest.raises(BadToken):
        com.server.parse_inbound(msg.as_bytes())


def test_html_only_message_rejected(com):
    token = com.server.encode_token(com.area_id, RoutingTarget("global"))
    msg = EmailMessage()
    msg["From"] = "kazmi@mail.test"
    msg["To"] = f"post+{token}@mail.test"
    msg["Subject"] = "hi"
    msg.add_alternative("<p>hello</p>", subtype="html")
    with pytest.raises(NoTextPart):
        com.server.parse_inbound(msg.as_bytes())


def test_multipart_takes_first_text_part(com):
    token = com.server.encode_token(com.area_id, RoutingTarget("global"))
    msg = EmailMessage()
    msg["From"] = "kazmi@mail.test"
    msg["To"] = f"post+{token}@mail.test"
    msg["Subject"] = "[Labortech:Workshops] mixed"
    msg.set_content("plain text wins")
    msg.add_alternative("<p>html loses</p>", subtype="html")
    posting = com.server.parse_inbound(msg.as_bytes())
    assert posting.body == "plain text wins"
    assert posting.subject == "mixed"
    assert posting.target == RoutingTarget("global")


def test_quoted_trailer_stripping_preserves_midquote():
    body = (
        "Top reply.\n"
        "> quoted context worth keeping\n"
        "More of my reply.\n"
        "\n"
        "> trailing quote line 1\n"
        "> trailing quote line 2\n"
        "\n"
        "-- \n"
        "sig line\n"
    )
    assert strip_quoted_trailer(body) == (
        "Top reply.\n> quoted context worth keeping\nMore of my reply."
    )


def test_subject_tag_stripping():
    assert strip_subject_tag("[Labortech:Workshops] Venue") == "Venue"
    assert strip_subject_tag("Re: [Labortech:Workshops] Venue") == "Re: Venue"
    assert strip_subject_tag("[URGENT] Venue") == "[URGENT] Venue"


def test_global_token_posts_global_comment(com):
    address = com.server.posting_address(com.area_id, RoutingTarget("global"))
    msg = EmailMessage()
    msg["From"] = "lena@mail.test"
    msg["To"] = address
    msg["Subject"] = "fresh thread"
    msg["Message-ID"] = "<fresh-1@client.test>"
    msg.set_content("starting a new point")
    posted = com.server.deliver_inbound(msg.as_bytes())
    assert posted.target == Global()
    assert posted.author == com.linked_member


# -- mbox import ----------------------------------------------------------------------------

def mbox_bytes(messages):
    chunks = []
    for msg in messages:
        chunks.append(b"From archive@mail.test Thu Jan 15 00:00:00 2004\n")
        chunks.append(msg.as_bytes().replace(b"\nFrom ", b"\n>From "))
        chunks.append(b"\n")
    return b"".join(chunks)


def archive_message(mid, sender, subject, body, parent=None, date=None, refs=None):
    msg = EmailMessage()
    msg["From"] = sender
    msg["To"] = "list@mail.test"
    msg["Subject"] = subject
    msg["Message-ID"] = f"<{mid}>"
    if parent:
        msg["In-Reply-To"] = f"<{parent}>"
    if refs:
        msg["References"] = " ".join(f"<{r}>" for r in refs)
    msg["Date"] = format_datetime(
        date or datetime(2003, 6, 1, 12, 0, tzinfo=timezone.utc)
    )
    msg.set_content(body)
    return msg


def test_three_message_thread_reconstructed(com):
    messages = [
        archive_message("m1@l", "kazmi@mail.test", "Venue", "first"),
        archive_message("m2@l", "ana@old.test", "Re: Venue", "second", parent="m1@l"),
        archive_message("m3@l", "maya@mail.test", "Re: Venue", "third", parent="m2@l"),
    ]
    report = com.server.import_mail_archive(
        com.area_id, mbox_bytes(messages), {}, com.moderator
    )
    assert report.imported == 3 and report.threaded == 2
    assert report.orphan_parent == 0 and report.unmapped == 1
    state = com.server.state
    c1 = state.comments[state.comments_by_source["m1@l"]]
    c2 = state.comments[state.comments_by_source["m2@l"]]
    c3 = state.comments[state.comments_by_source["m3@l"]]
    assert c1.target == Global()
    assert c2.target == ReplyTo(c1.id)
    assert c3.target == ReplyTo(c2.id)
    # unmapped sender became a placeholder member
    assert state.users[c2.author].display_name == "imported: ana@old.test"
    # Date headers become the comment timestamps
    assert c1.created_at == datetime(2003, 6, 1, 12, 0, tzinfo=timezone.utc)


def test_empty_archive_is_noop(com):
    report = com.server.import_mail_archive(com.area_id, b"", {}, com.moderator)
    assert (report.imported, report.threaded, report.orphan_parent, report.unmapped) == (
        0, 0, 0, 0,
    )
    assert com.server.get_area(com.area_id, com.member).discussion == []


def test_missing_parent_imports_as_global_orphan(com):
    messages = [
        archive_message("m2@l", "kazmi@mail.test", "Re: lost", "body", parent="m0@l"),
    ]
    report = com.server.import_mail_archive(
        com.area_id, mbox_bytes(messages), {}, com.moderator
    )
    assert report.imported == 1 and report.orphan_parent == 1
    comment = com.server.state.comments[
        com.server.state.comments_by_source["m2@l"]
    ]
    assert comment.target == Global()


def test_reversed_file_order_still_threads(com):
    child = archive_message("m2@l", "kazmi@mail.test", "Re: x", "child", parent="m1@l")
    parent = archive_message("m1@l", "kazmi@mail.test", "x", "parent")
    report = com.server.import_mail_archive(
        com.area_id, mbox_bytes([child, parent]), {}, com.moderator
    )
    assert report.threaded == 1 and report.orphan_parent == 0


def test_address_map_attributes_senders(com):
    messages = [archive_message("m1@l", "old-alias@old.test", "x", "b")]
    report = com.server.import_mail_archive(
        com.area_id, mbox_bytes(messages), {"old-alias@old.test": com.member},
        com.moderator,
    )
    assert report.unmapped == 0
    comment = com.server.state.comments[com.server.state.comments_by_source["m1@l"]]
    assert comment.author == com.member


def test_import_requires_moderator(com):
    with pytest.raises(NotAuthorized):
        com.server.import_mail_archive(com.area_id, b"", {}, com.member)


def test_malformed_archive_rejected(com):
    with pytest.raises(MalformedArchive):
        com.server.import_mail_archive(
            com.area_id, b"this is not an mbox", {}, com.moderator
        )


def test_second_import_all_duplicates(com):
    messages = [
        archive_message("m1@l", "kazmi@mail.test", "a", "b"),
        archive_message("m2@l", "kazmi@mail.test", "Re: a", "b", parent="m1@l"),
    ]
    raw = mbox_bytes(messages)
    com.server.import_mail_archive(com.area_id, raw, {}, com.moderator)
    count = len(com.server.get_area(com.area_id, com.member).discussion)
    report = com.server.import_mail_archive(com.area_id, raw, {}, com.moderator)
    assert report.imported == 0 and report.duplicates == 2
    assert len(com.server.get_area(com.area_id, com.member).discussion) == count


def test_imported_forest_isomorphic_to_header_forest(com):
    rng = random.Random(77)
    messages = []
    mids = []
    for k in range(25):
        parent = rng.choice(mids) if mids and rng.random() < 0.6 else None
        mid = f"m{k}@l"
        messages.append(
            archive_message(
                mid, "kazmi@mail.test", f"s{k}", "b", parent=parent,
                date=datetime(2003, 6, 1, 12, k, tzinfo=timezone.utc),
            )
        )
        mids.append(mid)
    rng.shuffle(messages)
    com.server.import_mail_archive(com.area_id, mbox_bytes(messages), {}, com.moderator)
    expected = oracle_reply_forest(messages)
    state = com.server.state
    for mid, parent_mid in expected.items():
        comment = state.comments[state.comments_by_source[mid]]
        if parent_mid is None:
            assert comment.target == Global()
        else:
            parent_comment = state.comments[state.comments_by_source[parent_mid]]
            assert comment.target == ReplyTo(parent_comment.id)
