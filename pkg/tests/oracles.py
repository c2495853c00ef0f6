"""Independent oracles the suites check production code against.

Everything here is written from the contract, not from the production
algorithms: the alignment oracle finds the lexicographically smallest
maximal matching by explicit scan over candidate pairs (cross-checked on
tiny inputs by full enumeration), and the ballot oracle recounts raw cast
events by brute force.
"""

from __future__ import annotations

import math

ANCHOR_WHITESPACE = (" ", "\t", "\n")


# -- alignment -------------------------------------------------------------------

def lcs_prefix_table(a: str, b: str) -> list[list[int]]:
    """P[i][j] = length of the LCS of a[:i] and b[:j], built forward."""
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table


def suffix_lcs_table(a: str, b: str) -> list[list[int]]:
    """S[i][j] = LCS(a[i:], b[j:]), via the prefix table of the reversals."""
    reversed_table = lcs_prefix_table(a[::-1], b[::-1])
    n, m = len(a), len(b)
    return [
        [reversed_table[n - i][m - j] for j in range(m + 1)] for i in range(n + 1)
    ]


def core_alignment_by_scan(a: str, b: str) -> list[tuple[int, int]]:
    """Lexicographically smallest maximal alignment, by committing the
    smallest feasible next pair over and over."""
    suffix = suffix_lcs_table(a, b)
    n, m = len(a), len(b)
    pairs: list[tuple[int, int]] = []
    i = j = 0
    remaining = suffix[0][0]
    while remaining:
        best = None
        for i2 in range(i, n):
            for j2 in range(j, m):
                if a[i2] == b[j2] and suffix[i2 + 1][j2 + 1] == remaining - 1:
                    best = (i2, j2)
                    break
            if best is not None:
                break
        assert best is not None, "suffix table promised a completion"
        pairs.append(best)
        i, j = best[0] + 1, best[1] + 1
        remaining -= 1
    return pairs


def enumerate_optimal_alignments(a: str, b: str) -> list[tuple[tuple[int, int], ...]]:
    """Every maximal alignment (tiny inputs only)."""
    suffix = suffix_lcs_table(a, b)
    total = suffix[0][0]
    out: list[tuple[tuple[int, int], ...]] = []
    acc: list[tuple[int, int]] = []

    def rec(i: int, j: int, remaining: int) -> None:
        if remaining == 0:
            out.append(tuple(acc))
            return
        for i2 in range(i, len(a)):
            for j2 in range(j, len(b)):
                if a[i2] == b[j2] and suffix[i2 + 1][j2 + 1] == remaining - 1:
                    acc.append((i2, j2))
                    rec(i2 + 1, j2 + 1, remaining - 1)
                    acc.pop()

    rec(0, 0, total)
    return out


def strip_affixes(old: str, new: str) -> tuple[int, int]:
    """Shared-prefix length and shared-suffix length after it (the declared
    preprocessing of the remap contract: prefix takes precedence)."""
    limit = min(len(old), len(new))
    p = 0
    while p < limit and old[p] == new[p]:
        p += 1
    s = 0
    while s < limit - p and old[len(old) - 1 - s] == new[len(new) - 1 - s]:
        s += 1
    return p, s


def oracle_alignment(old: str, new: str) -> list[tuple[int, int]]:
    p, s = strip_affixes(old, new)
    pairs = [(k, k) for k in range(p)]
    core_old = old[p : len(old) - s]
    core_new = new[p : len(new) - s]
    pairs.extend(
        (p + i, p + j) for i, j in core_alignment_by_scan(core_old, core_new)
    )
    pairs.extend(
        (len(old) - s + k, len(new) - s + k) for k in range(s)
    )
    return pairs


def oracle_remap(old: str, new: str, offset: int) -> int | None:
    """Where the anchored character lands, per the oracle alignment."""
    mapping = dict(oracle_alignment(old, new))
    landed = mapping.get(offset)
    if landed is None:
        return None
    # A copied character is identical, so a whitespace anchor stays blank.
    assert new[landed] == old[offset]
    return landed


# -- ballots ----------------------------------------------------------------------

def recount_events(procedure: str, options: tuple[str, ...], events):
    """Recount raw (voter, content) cast events: last cast per voter wins.

    Contents are plain dicts: {"choice": ...} for majority,
    {"option": i} for plurality, {"options": [i...]} for approval,
    {"stance": ...} for consensus.
    """
    current = {}
    for voter, content in events:
        current[voter] = content
    if procedure == "majority":
        counts = {"yes": 0, "no": 0, "abstain": 0}
        for content in current.values():
            counts[content["choice"]] += 1
    elif procedure == "consensus":
        counts = {"agree": 0, "stand_aside": 0, "block": 0}
        for content in current.values():
            counts[content["stance"]] += 1
    elif procedure == "plurality":
        counts = {label: 0 for label in options}
        for content in current.values():
            counts[options[content["option"]]] += 1
    elif procedure == "approval":
        counts = {label: 0 for label in options}
        for content in current.values():
            for k in content["options"]:
                counts[options[k]] += 1
    else:
        raise ValueError(procedure)
    return counts, len(current)


def oracle_outcome(
    procedure: str,
    options: tuple[str, ...],
    counts: dict[str, int],
    participation: int,
    quorum: float | None,
    eligible_count: int,
):
    """(status, winner, tied) per the decision rules."""
    if quorum is not None and participation < math.ceil(quorum * eligible_count):
        return ("quorum_not_met", None, None)
    if procedure == "majority":
        return ("passed" if counts["yes"] > counts["no"] else "failed", None, None)
    if procedure == "consensus":
        passed = counts["block"] == 0 and participation >= 1
        return ("passed" if passed else "failed", None, None)
    top = max(counts[label] for label in options)
    leaders = tuple(k for k, label in enumerate(options) if counts[label] == top)
    if len(leaders) == 1:
        return ("winner", leaders[0], None)
    return ("tied", None, leaders)


# -- discussion forests ------------------------------------------------------------

def oracle_threaded_order(entries):
    """Depth-first reply order for (comment_id, created_at, seq, parent_id)
    entries; roots and siblings sort by (created_at, seq)."""
    by_time = sorted(entries, key=lambda e: (e[1], e[2]))
    children: dict[str, list] = {}
    roots = []
    for entry in by_time:
        if entry[3] is None:
            roots.append(entry)
        else:
            children.setdefault(entry[3], []).append(entry)
    ordered: list[str] = []

    def walk(entry) -> None:
        ordered.append(entry[0])
        for child in children.get(entry[0], ()):
            walk(child)

    for root in roots:
        walk(root)
    return ordered


def oracle_reply_forest(messages):
    """message-id -> parent message-id (None unless the parent is in the
    archive), from In-Reply-To with a References fallback."""
    import re

    ids = set()
    parsed = []
    for msg in messages:
        mid = (msg.get("Message-ID") or "").strip().strip("<>")
        parent = None
        irt = msg.get("In-Reply-To")
        refs = msg.get("References")
        if irt:
            found = re.findall(r"<([^<>]+)>", str(irt))
            parent = found[0] if found else str(irt).strip().strip("<>")
        elif refs:
            found = re.findall(r"<([^<>]+)>", str(refs))
            parent = found[-1] if found else None
        ids.add(mid)
        parsed.append((mid, parent))
    return {mid: (parent if parent in ids else None) for mid, parent in parsed}
