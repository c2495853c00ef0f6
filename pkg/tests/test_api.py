"""HTTP endpoints: flows, error mapping, and the unauthenticated sweep."""

import base64

import pytest
from fastapi.testclient import TestClient

from convene.api import create_app



@pytest.fixture
def client(server):
    return TestClient(create_app(server))


def register_and_login(client, name, email, password="pw"):
    response = client.post(
        "/users", json={"display_name": name, "email": email, "password": password}
    )
    assert response.status_code == 201, response.text
    user_id = response.json()["user_id"]
    response = client.post(
        "/sessions", json={"identifier": email, "secret": password}
    )
    assert response.status_code == 201
    token = response.json()["token"]
    return user_id, {"Authorization": f"Bearer {token}"}


@pytest.fixture
def web(client):
    """A populated little world driven entirely over HTTP."""
    mod_id, mod = register_and_login(client, "Maya", "maya@mail.test")
    kaz_id, kaz = register_and_login(client, "Kazmi", "kazmi@mail.test")
    group = client.post("/groups", json={"name": "Labortech"}, headers=mod).json()
    client.post(f"/groups/{group['id']}/join", headers=kaz)
    area = client.post(
        f"/groups/{group['id']}/areas",
        json={"title": "Workshops", "description": "planning"},
        headers=mod,
    ).json()
    return {
        "client": client,
        "mod": mod,
        "mod_id": mod_id,
        "kaz": kaz,
        "kaz_id": kaz_id,
        "group": group["id"],
        "area": area["id"],
    }


def test_full_document_discussion_flow(web):
    client = web["client"]
    response = client.post(
        f"/areas/{web['area']}/items",
        json={
            "title": "Proposal: Shorter Workshops",
            "kind": {"kind": "document", "text": "ab cd"},
        },
        headers=web["kaz"],
    )
    assert response.status_code == 201
    item = response.json()
    document_id = item["kind"]["document_id"]

    response = client.post(
        f"/documents/{document_id}/anchors",
        json={"offset": 2, "subject": "Shorter workshops", "body": "trim it"},
        headers=web["kaz"],
    )
    assert response.status_code == 201
    anchor = response.json()
    comment_id = anchor["comment"]["id"]

    response = client.get(f"/areas/{web['area']}/comments", headers=web["mod"])
    headers_view = response.json()
    assert headers_view[0]["item_reference"]["label"] == "1. Proposal: Shorter Workshops"

    response = client.post(
        "/activation",
        json={"via": "reference", "comment_id": comment_id},
        headers=web["mod"],
    )
    state = response.json()
    assert state["displayed_item"] == item["id"]
    assert state["highlighted_anchor"] == anchor["anchor_id"]

    response = client.get(
        f"/documents/{document_id}/annotated",
        params={"active_anchor": anchor["anchor_id"]},
        headers=web["mod"],
    )
    segments = response.json()
    assert [s["type"] for s in segments] == ["text", "marker", "text"]
    assert segments[1]["active"] is True

    response = client.post(
        f"/documents/{document_id}/revisions",
        json={"text": "intro ab cd"},
        headers=web["kaz"],
    )
    assert response.json()["revision"] == 2
    segments = client.get(
        f"/documents/{document_id}/annotated", headers=web["mod"]
    ).json()
    text = "".join(s["text"] for s in segments if s["type"] == "text")
    assert text == "intro ab cd"


def test_poll_flow_over_http(web):
    client = web["client"]
    response = client.post(
        f"/areas/{web['area']}/items",
        json={
            "title": "Venue",
            "kind": {
                "kind": "decision",
                "question": "Pick the venue",
                "procedure": "plurality",
                "options": ["Hall", "Lab"],
            },
        },
        headers=web["mod"],
    )
    poll_id = response.json()["kind"]["poll_id"]
    response = client.post(
        f"/polls/{poll_id}/ballots",
        json={"content": {"kind": "single_choice", "option": 1}},
        headers=web["kaz"],
    )
    assert response.status_code == 201
    view = client.get(f"/polls/{poll_id}", headers=web["kaz"]).json()
    assert view["my_ballot"] == {"kind": "single_choice", "option": 1}
    assert view["tally"]["counts"] == {"Hall": 0, "Lab": 1}
    # secret by default: the plain member cannot list ballots
    assert client.get(f"/polls/{poll_id}/ballots", headers=web["kaz"]).status_code == 403
    assert client.get(f"/polls/{poll_id}/ballots", headers=web["mod"]).status_code == 200
    response = client.post(f"/polls/{poll_id}/close", headers=web["mod"])
    assert response.json()["status"] == "winner" and response.json()["winner"] == 1
    response = client.post(
        f"/polls/{poll_id}/ballots",
        json={"content": {"kind": "single_choice", "option": 0}},
        headers=web["kaz"],
    )
    assert response.status_code == 409


def test_error_mapping(web):
    client = web["client"]
    assert client.get("/groups/g000missing", headers=web["mod"]).status_code == 404
    assert (
        client.post("/groups", json={"name": "Labortech"}, headers=web["mod"]).status_code
        == 409
    )
    response = client.post(
        "/sessions", json={"identifier": "maya@mail.test", "secret": "nope"}
    )
    assert response.status_code == 401
    response = client.post(
        f"/areas/{web['area']}/items",
        json={"title": "x", "kind": {"kind": "link", "url": "not a url"}},
        headers=web["kaz"],
    )
    assert response.status_code == 400


def test_closed_group_read_denied_anonymously(client):
    mod_id, mod = register_and_login(client, "Maya", "m@mail.test")
    group = client.post(
        "/groups", json={"name": "Sealed", "access": "closed"}, headers=mod
    ).json()
    area = client.post(
        f"/groups/{group['id']}/areas", json={"title": "A"}, headers=mod
    ).json()
    assert client.get(f"/groups/{group['id']}").status_code == 403
    assert client.get(f"/areas/{area['id']}/comments").status_code == 403
    # open groups read fine anonymously
    open_group = client.post("/groups", json={"name": "Open"}, headers=mod).json()
    assert client.get(f"/groups/{open_group['id']}").status_code == 200


def test_export_import_over_http(web):
    client = web["client"]
    client.post(
        f"/areas/{web['area']}/comments",
        json={"subject": "s", "body": "b", "target": {"kind": "global"}},
        headers=web["kaz"],
    )
    exported = client.get(f"/groups/{web['group']}/export", headers=web["mod"])
    assert exported.status_code == 200
    bundle = exported.json()
    assert bundle["format_version"] == 1
    assert client.get(f"/groups/{web['group']}/export", headers=web["kaz"]).status_code == 403

    response = client.post(
        "/groups/import",
        json={"bundle": bundle, "rename": "Labortech Mirror"},
        headers=web["kaz"],
    )
    assert response.status_code == 422  # same-server ids collide
    assert "id-collision" in response.json()["detail"]


def test_mail_endpoints(web):
    client = web["client"]
    response = client.get(
        f"/areas/{web['area']}/posting-address", headers=web["kaz"]
    )
    address = response.json()["address"]
    assert "+" in address and address.endswith("@mail.test")

    message = (
        f"From: kazmi@mail.test\r\nTo: {address}\r\n"
        "Subject: by mail\r\nMessage-ID: <m1@c>\r\n\r\nhello from mail\r\n"
    ).encode()
    response = client.post(
        f"/areas/{web['area']}/inbound-mail",
        json={"raw_b64": base64.b64encode(message).decode()},
        headers=web["mod"],
    )
    assert response.status_code == 201
    assert response.json()["body"] == "hello from mail"

    mbox = (
        b"From x@x Thu Jan 15 00:00:00 2004\n"
        b"From: old@old.test\nSubject: archived\nMessage-ID: <a1@l>\n"
        b"Date: Mon, 2 Jun 2003 10:00:00 +0000\n\nbody\n"
    )
    response = client.post(
        f"/areas/{web['area']}/import-mail",
        json={"mbox_b64": base64.b64encode(mbox).decode(), "address_map": {}},
        headers=web["mod"],
    )
    assert response.json()["imported"] == 1
    assert (
        client.post(
            f"/areas/{web['area']}/import-mail",
            json={"mbox_b64": base64.b64encode(mbox).decode(), "address_map": {}},
            headers=web["kaz"],
        ).status_code
        == 403
    )


def test_feedback_endpoint(web):
    client = web["client"]
    response = client.post(
        "/feedback",
        json={"scope": "group", "rating": 5, "text": "nice", "group_id": web["group"]},
        headers=web["kaz"],
    )
    assert response.status_code == 201
    listed = client.get(
        "/feedback",
        params={"scope": "group", "group_id": web["group"]},
        headers=web["mod"],
    )
    assert [entry["rating"] for entry in listed.json()] == [5]
    bad = client.post(
        "/feedback",
        json={"scope": "group", "rating": 9, "text": "", "group_id": web["group"]},
        headers=web["kaz"],
    )
    assert bad.status_code == 400


# -- the unauthenticated sweep ----------------------------------------------------------

MUTATING_BODIES = {
    ("POST", "/groups"): {"name": "X"},
    ("POST", "/groups/{group_id}/join"): None,
    ("POST", "/groups/{group_id}/members/{member_id}/approve"): None,
    ("POST", "/groups/{group_id}/areas"): {"title": "T"},
    ("POST", "/groups/import"): {"bundle": {}},
    ("POST", "/areas/{area_id}/link"): {"group_id": "g0"},
    ("POST", "/areas/{area_id}/items"): {
        "title": "T", "kind": {"kind": "discussion", "prompt": "p"},
    },
    ("POST", "/areas/{area_id}/comments"): {
        "subject": "s", "body": "b", "target": {"kind": "global"},
    },
    ("POST", "/areas/{area_id}/notify"): {"kind": "new_item", "object_id": "i0"},
    ("POST", "/areas/{area_id}/inbound-mail"): {"raw_b64": ""},
    ("POST", "/areas/{area_id}/import-mail"): {"mbox_b64": ""},
    ("POST", "/documents/{document_id}/revisions"): {"text": "t"},
    ("POST", "/documents/{document_id}/anchors"): {"offset": 0, "body": "b"},
    ("POST", "/polls/{poll_id}/ballots"): {
        "content": {"kind": "yes_no_abstain", "choice": "yes"},
    },
    ("POST", "/polls/{poll_id}/close"): None,
    ("POST", "/feedback"): {"scope": "platform", "rating": 3, "text": ""},
    ("DELETE", "/sessions/current"): None,
}

# Identity bootstrap: these must stay reachable without a session, or nobody
# could ever log in. The sweep checks they cannot mutate group state.
BOOTSTRAP = {("POST", "/users"), ("POST", "/sessions")}

# POST in shape only: computes viewer state from a body, writes nothing.
# Still access-checked like any read.
READONLY_POST = {("POST", "/activation")}


def test_unauthenticated_sweep_covers_every_mutating_route(server):
    app = create_app(server)
    client = TestClient(app)
    mutating = set()
    for route in app.routes:
        methods = getattr(route, "methods", None) or set()
        for method in methods - {"GET", "HEAD", "OPTIONS"}:
            mutating.add((method, route.path))
    assert mutating - BOOTSTRAP - READONLY_POST == set(MUTATING_BODIES), (
        "new mutating endpoint: add it to the sweep table"
    )
    response = client.post(
        "/activation", json={"via": "subject", "comment_id": "c0"}
    )
    assert response.status_code == 404 and server.state.comments == {}
    params = {
        "group_id": "g0", "member_id": "u0", "area_id": "a0",
        "document_id": "d0", "poll_id": "p0",
    }
    for (method, template), body in MUTATING_BODIES.items():
        path = template.format(**params)
        response = client.request(method, path, json=body)
        assert response.status_code == 401, (method, path, response.status_code)
        assert response.json()["error"] in ("Unauthenticated",)
    # bootstrap endpoints reject garbage without touching group state
    assert client.post("/sessions", json={"identifier": "x", "secret": "y"}).status_code == 401
    assert server.state.groups == {}
