"""Sessions, rate limiting, export/import, feedback, and persistence."""

import json

import pytest

from convene import (
    DiscussionItem,
    Global,
    GroupAccess,
    LinkItem,
    OnItem,
    PlainTextSource,
    ReplyTo,
    SqliteStorage,
    UploadedSource,
)
from convene.decisions import (
    PollSpec,
    Procedure,
    SingleChoice,
    VoteChoice,
    YesNoAbstain,
)
from convene.errors import (
    BadCredentials,
    DuplicateEmail,
    DuplicateName,
    IntegrityViolation,
    InvalidRating,
    NotAuthorized,
    RateLimited,
    Unauthenticated,
    UnsupportedVersion,
)
from convene.service import canonical_json

from conftest import FakeClock, build_community, make_server


@pytest.fixture
def com(server):
    return build_community(server)


# -- identity and sessions -----------------------------------------------------------

def test_register_rejects_duplicate_email(server):
    server.register_user("Ana", "ana@mail.test", "pw")
    with pytest.raises(DuplicateEmail):
        server.register_user("Another", "ana@mail.test", "pw")


def test_authenticate_and_expiry(server, clock):
    user = server.register_user("Ana", "ana@mail.test", "hunter2")
    session = server.authenticate("ana@mail.test", "hunter2")
    assert session.user_id == user.user_id
    assert (session.expires_at - session.issued_at).days == 14
    assert server.resolve_session(session.token) == user.user_id
    clock.advance(15 * 86400)
    assert server.resolve_session(session.token) is None
    with pytest.raises(Unauthenticated):
        server.require_session(session.token)


def test_wrong_secret_and_unknown_user_same_error(server):
    server.register_user("Ana", "ana@mail.test", "hunter2")
    with pytest.raises(BadCredentials) as known:
        server.authenticate("ana@mail.test", "wrong")
    with pytest.raises(BadCredentials) as unknown:
        server.authenticate("ghost@mail.test", "wrong")
    assert str(known.value) == str(unknown.value)


def test_eleventh_rapid_failure_rate_limited(server):
    server.register_user("Ana", "ana@mail.test", "hunter2")
    for _ in range(10):
        with pytest.raises(BadCredentials):
            server.authenticate("ana@mail.test", "wrong")
    with pytest.raises(RateLimited):
        server.authenticate("ana@mail.test", "hunter2")


def test_rate_limit_window_slides(server, clock):
    server.register_user("Ana", "ana@mail.test", "hunter2")
    for _ in range(10):
        with pytest.raises(BadCredentials):
            server.authenticate("ana@mail.test", "wrong")
    clock.advance(120)
    session = server.authenticate("ana@mail.test", "hunter2")
    assert session.token


def test_expired_session_acts_as_anonymous(server, clock):
    com = build_community(server, access=GroupAccess.CLOSED)
    session = server.authenticate("kazmi@mail.test", "pw")
    from convene.service import AuthAction

    assert server.authorize(session.token, com.area_id, AuthAction.READ)
    clock.advance(20 * 86400)
    assert not server.authorize(session.token, com.area_id, AuthAction.READ)
    assert server.authorize(None, com.area_id, AuthAction.READ) == server.authorize(
        session.token, com.area_id, AuthAction.READ
    )


# -- export / import -------------------------------------------------------------------

def populate(com):
    server = com.server
    second_area = server.create_meeting_area(
        com.group_id, "Plenary", "the whole group", com.moderator
    )
    doc_item, rev = server.create_document(
        com.area_id, "Proposal: Shorter Workshops",
        PlainTextSource("Workshops run long.\nCut them to 45 minutes.\n"),
        com.member,
    )
    server.post_item(
        com.area_id, com.member, "Background reading",
        LinkItem("https://example.org/reading", "context"),
    )
    server.post_item(second_area.id, com.moderator, "Open floor", DiscussionItem("?"))
    upload_item, _ = server.create_document(
        second_area.id, "Budget sheet",
        UploadedSource(b"PK\x03\x04 budget", "budget.xlsx", "application/zip"),
        com.moderator,
    )
    on_item = server.post_comment(
        com.area_id, com.member, "Shorter workshops", "Strongly support.",
        OnItem(doc_item.id),
    )
    server.post_comment(
        com.area_id, com.moderator, "", "Same here.", ReplyTo(on_item.id)
    )
    server.attach_intext(rev.document_id, 19, "in-text note", "add data", com.member)
    server.post_comment(com.area_id, com.linked_member, "hello", "hi", Global())
    secret_poll = server.open_poll(
        com.area_id,
        PollSpec("Adopt the proposal?", Procedure.MAJORITY, binding=True),
        com.moderator,
    )
    server.cast_ballot(
        secret_poll.kind.poll_id, com.member, YesNoAbstain(VoteChoice.YES)
    )
    server.close_poll(secret_poll.kind.poll_id, com.moderator)
    open_poll = server.open_poll(
        second_area.id,
        PollSpec(
            "Pick a venue", Procedure.PLURALITY, options=("Hall", "Lab"),
            open_ballots=True,
        ),
        com.moderator,
    )
    server.cast_ballot(open_poll.kind.poll_id, com.member, SingleChoice(1))
    server.close_poll(open_poll.kind.poll_id, com.moderator)
    session = server.authenticate("kazmi@mail.test", "pw")
    server.submit_feedback(
        session.token, "group", 4, "works well", group_id=com.group_id
    )
    return secret_poll.kind.poll_id, open_poll.kind.poll_id


def test_export_requires_moderator(com):
    populate(com)
    with pytest.raises(NotAuthorized):
        com.server.export_group(com.group_id, com.member)


def test_export_redacts_secret_ballots_keeps_open_ones(com):
    secret_id, open_id = populate(com)
    bundle = com.server.export_group(com.group_id, com.moderator)
    polls = {
        p["poll_id"]: p
        for area in bundle.payload["group"]["areas"]
        for p in area["polls"]
    }
    assert polls[secret_id]["ballots"] is None
    assert polls[secret_id]["final_tally"]["counts"] == {
        "yes": 1, "no": 0, "abstain": 0,
    }
    assert [b["voter"] for b in polls[open_id]["ballots"]] == [com.member]


def test_round_trip_byte_identical_modulo_instance_metadata(com, clock):
    populate(com)
    bundle = com.server.export_group(com.group_id, com.moderator)
    fresh = make_server(FakeClock(), seed=999)
    admin = fresh.register_user("Admin", "admin@other.test", "pw")
    imported = fresh.import_group(bundle.to_json(), admin.user_id)
    again = fresh.export_group(imported.id, com.moderator)
    first = dict(bundle.payload)
    second = dict(again.payload)
    assert first.pop("exported_at") != second.pop("exported_at")
    assert canonical_json(first) == canonical_json(second)


def test_import_is_observably_identical(com):
    populate(com)
    bundle = com.server.export_group(com.group_id, com.moderator)
    fresh = make_server(FakeClock(), seed=998)
    admin = fresh.register_user("Admin", "admin@other.test", "pw")
    imported = fresh.import_group(bundle.payload, admin.user_id)
    assert imported.id == com.group_id
    original = com.server.get_group(com.group_id)
    copy = fresh.get_group(imported.id)
    assert copy.name == original.name
    assert set(copy.members) == set(original.members)
    assert copy.area_ids == original.area_ids
    for area_id in original.area_ids:
        ours = com.server.state.areas[area_id]
        theirs = fresh.state.areas[area_id]
        assert theirs.folio == ours.folio
        assert theirs.discussion == ours.discussion
    # imported group is fully usable: the index renders, documents annotate
    headers = fresh.comments_index(com.area_id, viewer=com.member)
    assert len(headers) == len(com.server.comments_index(com.area_id, viewer=com.member))


def test_import_rejects_dangling_target(com):
    populate(com)
    bundle = com.server.export_group(com.group_id, com.moderator)
    payload = json.loads(bundle.to_json())
    payload["group"]["areas"][0]["comments"][0]["target"] = {
        "kind": "on_item",
        "item_id": "i00000missing",
    }
    fresh = make_server(FakeClock(), seed=997)
    admin = fresh.register_user("Admin", "admin@other.test", "pw")
    with pytest.raises(IntegrityViolation) as err:
        fresh.import_group(payload, admin.user_id)
    assert "dangling-item-target" in str(err.value)
    assert fresh.state.groups == {}


def test_import_rejects_broken_anchor_offset(com):
    populate(com)
    bundle = com.server.export_group(com.group_id, com.moderator)
    payload = json.loads(bundle.to_json())
    documents = payload["group"]["areas"][0]["documents"]
    documents[0]["anchors"][0]["offsets"]["1"] = 0  # a letter, not blank space
    fresh = make_server(FakeClock(), seed=996)
    admin = fresh.register_user("Admin", "admin@other.test", "pw")
    with pytest.raises(IntegrityViolation) as err:
        fresh.import_group(payload, admin.user_id)
    assert "anchor-not-whitespace" in str(err.value)


def test_import_rejects_future_version(com):
    populate(com)
    bundle = com.server.export_group(com.group_id, com.moderator)
    payload = json.loads(bundle.to_json())
    payload["format_version"] = 99
    fresh = make_server(FakeClock(), seed=995)
    admin = fresh.register_user("Admin", "admin@other.test", "pw")
    with pytest.raises(UnsupportedVersion):
        fresh.import_group(payload, admin.user_id)


def test_import_same_server_needs_rename(com):
    populate(com)
    bundle = com.server.export_group(com.group_id, com.moderator)
    with pytest.raises(DuplicateName):
        com.server.import_group(bundle.payload, com.moderator)
    # ids from the bundle already live on this server
    with pytest.raises(IntegrityViolation) as err:
        com.server.import_group(bundle.payload, com.moderator, rename="Labortech II")
    assert "id-collision" in str(err.value)


# -- feedback -----------------------------------------------------------------------------

def test_feedback_flow(server, com):
    session = server.authenticate("kazmi@mail.test", "pw")
    record = server.submit_feedback(
        session.token, "group", 5, "love the folio", group_id=com.group_id
    )
    assert record.rating == 5
    listed = server.list_feedback(com.moderator, "group", com.group_id)
    assert [entry["rating"] for entry in listed] == [5]
    assert listed[0]["author"] == "Kazmi"


def test_feedback_rating_bounds(server, com):
    session = server.authenticate("kazmi@mail.test", "pw")
    with pytest.raises(InvalidRating):
        server.submit_feedback(session.token, "group", 0, "x", group_id=com.group_id)
    with pytest.raises(InvalidRating):
        server.submit_feedback(session.token, "group", 6, "x", group_id=com.group_id)


def test_feedback_requires_session(server, com):
    with pytest.raises(Unauthenticated):
        server.submit_feedback(None, "group", 3, "x", group_id=com.group_id)


def test_anonymous_feedback_hides_author(server, com):
    session = server.authenticate("kazmi@mail.test", "pw")
    server.submit_feedback(
        session.token, "group", 2, "meh", group_id=com.group_id, anonymous=True
    )
    listed = server.list_feedback(com.moderator, "group", com.group_id)
    assert listed[0]["author"] is None
    # anonymity survives export too
    bundle = server.export_group(com.group_id, com.moderator)
    assert bundle.payload["group"]["feedback"][0]["author"] is None


def test_platform_feedback_operator_only(clock):
    server = make_server(clock, operators=("root@mail.test",))
    com = build_community(server)
    operator = server.register_user("Root", "root@mail.test", "pw").user_id
    session = server.authenticate("kazmi@mail.test", "pw")
    server.submit_feedback(session.token, "platform", 3, "platform note")
    with pytest.raises(NotAuthorized):
        server.list_feedback(com.member, "platform")
    listed = server.list_feedback(operator, "platform")
    assert [entry["text"] for entry in listed] == ["platform note"]


def test_group_feedback_member_only(server, com):
    session = server.authenticate("otto@mail.test", "pw")
    with pytest.raises(NotAuthorized):
        server.submit_feedback(session.token, "group", 3, "x", group_id=com.group_id)
    with pytest.raises(NotAuthorized):
        server.list_feedback(com.outsider, "group", com.group_id)


# -- persistence ----------------------------------------------------------------------------

def test_sqlite_restart_preserves_everything(tmp_path):
    path = str(tmp_path / "convene.db")
    clock = FakeClock()
    server = make_server(clock, storage=SqliteStorage(path), mail_secret=None)
    com = build_community(server)
    secret_id, open_id = populate(com)
    from convene import RoutingTarget

    note_token = server.encode_token(com.area_id, RoutingTarget("global"))
    counts = {
        "groups": len(server.state.groups),
        "comments": len(server.state.comments),
        "anchors": len(server.state.anchors),
    }
    server.close()

    reborn = make_server(clock, storage=SqliteStorage(path), mail_secret=None)
    assert len(reborn.state.groups) == counts["groups"]
    assert len(reborn.state.comments) == counts["comments"]
    assert len(reborn.state.anchors) == counts["anchors"]
    # credentials survive: the member can still log in
    session = reborn.authenticate("kazmi@mail.test", "pw")
    assert session.user_id == com.member
    # the mail secret persisted with the store, so old tokens still verify
    assert reborn.decode_token(note_token)[0] == com.area_id
    # closed polls kept their outcomes, including the secret one's ballots
    assert reborn.state.polls[secret_id].closed
    assert reborn.state.polls[secret_id].ballots  # internal store keeps them
    # linked-area homepage back-links were rebuilt
    page = reborn.group_homepage(com.linked_group_id, com.linked_member)
    assert (com.area_id, "Workshops") in page.linked_areas
    reborn.close()
