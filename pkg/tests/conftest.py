import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import pytest

from convene import GroupAccess, JoinPolicy, Server

SUITE_SECRET = b"suite-secret-0123456789abcdef!!!"


class FakeClock:
    """Deterministic clock: every reading advances one step, so records
    created in sequence carry strictly increasing timestamps."""

    def __init__(self, start: datetime | None = None, step_seconds: float = 1.0):
        self.current = start or datetime(2004, 1, 15, tzinfo=timezone.utc)
        self.step = timedelta(seconds=step_seconds)

    def __call__(self) -> datetime:
        now = self.current
        self.current += self.step
        return now

    def advance(self, seconds: float) -> None:
        self.current += timedelta(seconds=seconds)


def make_server(clock=None, seed=0xC0FFEE, **kwargs) -> Server:
    kwargs.setdefault("mail_secret", SUITE_SECRET)
    kwargs.setdefault("mail_domain", "mail.test")
    kwargs.setdefault("base_url", "http://convene.test")
    kwargs.setdefault("scrypt_cost", 16)
    return Server(clock=clock or FakeClock(), rng=random.Random(seed), **kwargs)


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def server(clock):
    return make_server(clock)


@dataclass
class Community:
    """One open group with an area linked to a second group, plus the three
    access-matrix roles: owner member (and a moderator), linked member, and
    a registered outsider."""

    server: Server
    moderator: str
    member: str
    linked_member: str
    outsider: str
    group_id: str
    linked_group_id: str
    area_id: str


def build_community(server: Server, access=GroupAccess.OPEN) -> Community:
    moderator = server.register_user("Maya Moderator", "maya@mail.test", "pw").user_id
    member = server.register_user("Kazmi", "kazmi@mail.test", "pw").user_id
    linked = server.register_user("Lena Linked", "lena@mail.test", "pw").user_id
    outsider = server.register_user("Otto Outsider", "otto@mail.test", "pw").user_id
    group = server.create_group(
        "Labortech", "conference planning", access, JoinPolicy.OPEN_JOIN, moderator
    )
    server.join_group(group.id, member)
    coalition = server.create_group(
        "Coalition", "allied group", GroupAccess.CLOSED, JoinPolicy.OPEN_JOIN, linked
    )
    area = server.create_meeting_area(
        group.id, "Workshops", "workshop planning", moderator
    )
    server.link_area(area.id, coalition.id, moderator)
    return Community(
        server=server,
        moderator=moderator,
        member=member,
        linked_member=linked,
        outsider=outsider,
        group_id=group.id,
        linked_group_id=coalition.id,
        area_id=area.id,
    )


@pytest.fixture
def community(server):
    return build_community(server)
