"""Polls (nonbinding) and decisions (binding) with deterministic tallies.

Four procedures: majority (yes/no/abstain, passes on yes > no), plurality
(single choice), approval (choose any subset), and consensus (agree /
stand aside / block; a single block fails the proposal). Ties are reported
as ties, never broken. Closure past a deadline is evaluated lazily on the
next read or cast; no background scheduler exists.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterable

from .errors import (
    AlreadyClosed,
    ContentMismatch,
    DeadlinePassed,
    InvalidSpec,
    NotAuthorized,
    NotEligible,
    PollClosed,
    UnknownPoll,
)
from .model import Item, PollItem


class Procedure(str, Enum):
    MAJORITY = "majority"
    PLURALITY = "plurality"
    APPROVAL = "approval"
    CONSENSUS = "consensus"


class VoteChoice(str, Enum):
    YES = "yes"
    NO = "no"
    ABSTAIN = "abstain"


class ConsentStance(str, Enum):
    AGREE = "agree"
    STAND_ASIDE = "stand_aside"
    BLOCK = "block"


MAJORITY_CATEGORIES = ("yes", "no", "abstain")
CONSENSUS_CATEGORIES = ("agree", "stand_aside", "block")


@dataclass(frozen=True)
class PollSpec:
    question: str
    procedure: Procedure
    options: tuple[str, ...] = ()
    binding: bool = False
    deadline: datetime | None = None
    quorum: float | None = None
    # Secrecy: individual ballots are moderator-only unless opened here.
    open_ballots: bool = False


def validate_poll_spec(spec: PollSpec) -> None:
    if not spec.question.strip():
        raise InvalidSpec("poll question must not be empty")
    if spec.procedure in (Procedure.PLURALITY, Procedure.APPROVAL):
        if len(spec.options) < 2:
            raise InvalidSpec(f"{spec.procedure.value} needs at least 2 options")
        if len(set(spec.options)) != len(spec.options):
            raise InvalidSpec("options must be distinct")
    elif spec.options:
        raise InvalidSpec(f"{spec.procedure.value} polls take no options list")
    if spec.quorum is not None and not 0.0 <= spec.quorum <= 1.0:
        raise InvalidSpec("quorum must be a fraction in [0, 1]")


# -- ballot content -------------------------------------------------------------

@dataclass(frozen=True)
class YesNoAbstain:
    choice: VoteChoice


@dataclass(frozen=True)
class SingleChoice:
    option: int


@dataclass(frozen=True)
class ApprovalSet:
    options: frozenset[int]


@dataclass(frozen=True)
class Consent:
    stance: ConsentStance
    reason: str | None = None


BallotContent = YesNoAbstain | SingleChoice | ApprovalSet | Consent

_PROCEDURE_CONTENT = {
    Procedure.MAJORITY: YesNoAbstain,
    Procedure.PLURALITY: SingleChoice,
    Procedure.APPROVAL: ApprovalSet,
    Procedure.CONSENSUS: Consent,
}


def validate_ballot_content(spec: PollSpec, content: BallotContent) -> None:
    expected = _PROCEDURE_CONTENT[spec.procedure]
    if not isinstance(content, expected):
        raise ContentMismatch(
            f"{spec.procedure.value} ballots carry {expected.__name__}"
        )
    if isinstance(content, SingleChoice):
        if not 0 <= content.option < len(spec.options):
            raise ContentMismatch(f"option index {content.option} out of range")
    elif isinstance(content, ApprovalSet):
        bad = [i for i in content.options if not 0 <= i < len(spec.options)]
        if bad:
            raise ContentMismatch(f"option indices out of range: {sorted(bad)}")


@dataclass
class Ballot:
    poll_id: str
    voter: str
    cast_at: datetime
    content: BallotContent


@dataclass(frozen=True)
class Tally:
    counts: dict[str, int]
    participation: int
    eligible_count: int
    quorum_met: bool
    computed_at: datetime


class PollStatus(str, Enum):
    OPEN = "open"
    PASSED = "passed"
    FAILED = "failed"
    WINNER = "winner"
    TIED = "tied"
    QUORUM_NOT_MET = "quorum_not_met"


@dataclass(frozen=True)
class Outcome:
    status: PollStatus
    winner: int | None = None
    tied: tuple[int, ...] | None = None
    closed_at: datetime | None = None


@dataclass
class PollRecord:
    poll_id: str
    area_id: str
    item_id: str
    author: str
    spec: PollSpec
    opened_at: datetime
    eligible: frozenset[str]
    ballots: dict[str, Ballot] = field(default_factory=dict)
    closed: bool = False
    outcome: Outcome | None = None
    final_tally: Tally | None = None


# -- pure counting ---------------------------------------------------------------

def count_ballots(spec: PollSpec, contents: Iterable[BallotContent]) -> dict[str, int]:
    if spec.procedure == Procedure.MAJORITY:
        counts = {c: 0 for c in MAJORITY_CATEGORIES}
        for content in contents:
            counts[content.choice.value] += 1
        return counts
    if spec.procedure == Procedure.CONSENSUS:
        counts = {c: 0 for c in CONSENSUS_CATEGORIES}
        for content in contents:
            counts[content.stance.value] += 1
        return counts
    counts = {label: 0 for label in spec.options}
    if spec.procedure == Procedure.PLURALITY:
        for content in contents:
            counts[spec.options[content.option]] += 1
    else:
        for content in contents:
            for i in content.options:
                counts[spec.options[i]] += 1
    return counts


def quorum_met(spec: PollSpec, participation: int, eligible_count: int) -> bool:
    if spec.quorum is None:
        return True
    return participation >= math.ceil(spec.quorum * eligible_count)


def compute_tally(
    spec: PollSpec,
    contents: Iterable[BallotContent],
    eligible_count: int,
    at: datetime,
) -> Tally:
    contents = list(contents)
    participation = len(contents)
    return Tally(
        counts=count_ballots(spec, contents),
        participation=participation,
        eligible_count=eligible_count,
        quorum_met=quorum_met(spec, participation, eligible_count),
        computed_at=at,
    )


def decide_outcome(spec: PollSpec, tally: Tally, closed_at: datetime) -> Outcome:
    if not tally.quorum_met:
        return Outcome(PollStatus.QUORUM_NOT_MET, closed_at=closed_at)
    if spec.procedure == Procedure.MAJORITY:
        passed = tally.counts["yes"] > tally.counts["no"]
        return Outcome(
            PollStatus.PASSED if passed else PollStatus.FAILED, closed_at=closed_at
        )
    if spec.procedure == Procedure.CONSENSUS:
        passed = tally.counts["block"] == 0 and tally.participation >= 1
        return Outcome(
            PollStatus.PASSED if passed else PollStatus.FAILED, closed_at=closed_at
        )
    top = max(tally.counts[label] for label in spec.options)
    leaders = tuple(
        i for i, label in enumerate(spec.options) if tally.counts[label] == top
    )
    if len(leaders) == 1:
        return Outcome(PollStatus.WINNER, winner=leaders[0], closed_at=closed_at)
    return Outcome(PollStatus.TIED, tied=leaders, closed_at=closed_at)


# -- operations -------------------------------------------------------------------

class DecisionOps:
    """Poll operations; mixed into the server over its shared state."""

    def open_poll(self, area_id: str, spec: PollSpec, author: str) -> Item:
        area = self._require_area(area_id)
        with self._group_lock(area.owner_group):
            self._require_post_access(author, area)
            validate_poll_spec(spec)
            poll_id = self._new_id("p")
            record = PollRecord(
                poll_id=poll_id,
                area_id=area_id,
                item_id="",
                author=author,
                spec=spec,
                opened_at=self._now(),
                eligible=self._eligible_voters(area),
            )
            self._state.polls[poll_id] = record
            item = self._append_item(
                area, author, spec.question, PollItem(poll_id, binding=spec.binding)
            )
            record.item_id = item.id
            self._persist_group(area.owner_group)
            return item

    def cast_ballot(
        self,
        poll_id: str,
        voter: str,
        content: BallotContent,
        at: datetime | None = None,
    ) -> Ballot:
        record = self._require_poll(poll_id)
        area = self._state.areas[record.area_id]
        with self._group_lock(area.owner_group):
            at = at or self._now()
            self._autoclose(record, at)
            if record.closed:
                if record.spec.deadline is not None and at > record.spec.deadline:
                    raise DeadlinePassed(f"poll closed at {record.spec.deadline}")
                raise PollClosed(poll_id)
            if voter not in record.eligible:
                raise NotEligible(f"{voter} was not eligible when the poll opened")
            validate_ballot_content(record.spec, content)
            ballot = Ballot(poll_id=poll_id, voter=voter, cast_at=at, content=content)
            record.ballots[voter] = ballot  # recasting replaces
            self._persist_group(area.owner_group)
            return ballot

    def tally(self, poll_id: str, at: datetime | None = None) -> Tally:
        record = self._require_poll(poll_id)
        area = self._state.areas[record.area_id]
        with self._group_lock(area.owner_group):
            at = at or self._now()
            self._autoclose(record, at)
            if record.closed:
                return record.final_tally
            return compute_tally(
                record.spec,
                (b.content for b in record.ballots.values()),
                len(record.eligible),
                at,
            )

    def close_poll(
        self, poll_id: str, actor: str, at: datetime | None = None
    ) -> Outcome:
        record = self._require_poll(poll_id)
        area = self._state.areas[record.area_id]
        with self._group_lock(area.owner_group):
            at = at or self._now()
            self._autoclose(record, at)
            if record.closed:
                raise AlreadyClosed(poll_id)
            past_deadline = (
                record.spec.deadline is not None and at >= record.spec.deadline
            )
            if not past_deadline:
                group = self._state.groups[area.owner_group]
                if actor != record.author and not self._is_moderator(actor, group):
                    raise NotAuthorized(
                        "only the poll author or a moderator may close early"
                    )
            self._finalize(record, at)
            self._persist_group(area.owner_group)
            return record.outcome

    def get_poll(self, poll_id: str, at: datetime | None = None) -> PollRecord:
        record = self._require_poll(poll_id)
        area = self._state.areas[record.area_id]
        with self._group_lock(area.owner_group):
            self._autoclose(record, at or self._now())
            return copy.deepcopy(record)

    def poll_ballots(self, poll_id: str, actor: str) -> list[Ballot]:
        """Individual ballots: moderators only, unless the poll was opened
        with open ballots, in which case any reader with access may look."""
        record = self._require_poll(poll_id)
        area = self._state.areas[record.area_id]
        group = self._state.groups[area.owner_group]
        if record.spec.open_ballots:
            self._require_read_access(actor, area)
        elif not self._is_moderator(actor, group):
            raise NotAuthorized("ballots on this poll are visible to moderators only")
        return [copy.deepcopy(record.ballots[v]) for v in sorted(record.ballots)]

    # -- internals --

    def _require_poll(self, poll_id: str) -> PollRecord:
        record = self._state.polls.get(poll_id)
        if record is None:
            raise UnknownPoll(poll_id)
        return record

    def _eligible_voters(self, area) -> frozenset[str]:
        group = self._state.groups[area.owner_group]
        voters = set(group.members)
        for gid in area.linked_groups:
            linked = self._state.groups.get(gid)
            if linked is not None:
                voters.update(linked.members)
        return frozenset(voters)

    def _autoclose(self, record: PollRecord, at: datetime) -> None:
        if (
            not record.closed
            and record.spec.deadline is not None
            and at > record.spec.deadline
        ):
            # Lazy automatic closure; the outcome is stamped at the deadline
            # itself so it does not depend on when somebody first looked.
            self._finalize(record, record.spec.deadline)
            self._persist_group(self._state.areas[record.area_id].owner_group)

    def _finalize(self, record: PollRecord, closed_at: datetime) -> None:
        tally = compute_tally(
            record.spec,
            (b.content for b in record.ballots.values()),
            len(record.eligible),
            closed_at,
        )
        record.final_tally = tally
        record.outcome = decide_outcome(record.spec, tally, closed_at)
        record.closed = True
