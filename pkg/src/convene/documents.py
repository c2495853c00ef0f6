"""Versioned plain-text documents with whitespace-anchored in-text comments.

Anchors are point positions in blank space (space, tab, newline). When a
document is revised, every live anchor is remapped through a character-level
LCS diff of the two texts: the shared prefix and suffix map by identity and
the changed core is aligned by a walk that matches each character as early
as possible (leftmost tie-break). An anchor whose character is not copied
by the diff becomes orphaned; its comment stays readable.
"""

from __future__ import annotations

import copy
from array import array
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import datetime
from typing import TYPE_CHECKING

from .errors import (
    AnchorRevisionMismatch,
    InvalidAnchor,
    InvalidEncoding,
    InvalidSpec,
    NotPlainText,
    OffsetOutOfRange,
    OversizeUpload,
    UnknownDocument,
)
from .model import InText, Item

if TYPE_CHECKING:
    from .model import Comment

ANCHOR_WHITESPACE = frozenset(" \t\n")
SNAP_RADIUS = 20
DEFAULT_UPLOAD_CAP = 10 * 1024 * 1024

# Cell budget for the core diff table. A revision whose changed region
# exceeds it is treated as a rewrite: anchors inside the region orphan,
# anchors in the shared prefix/suffix still map exactly.
DIFF_CELL_BUDGET = 4_000_000


# -- sources and records -------------------------------------------------------

@dataclass(frozen=True)
class PlainTextSource:
    text: str

    @classmethod
    def from_bytes(cls, raw: bytes) -> "PlainTextSource":
        try:
            return cls(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise InvalidEncoding(f"document is not valid UTF-8: {exc}") from None


@dataclass(frozen=True)
class UploadedSource:
    blob: bytes
    filename: str
    media_type: str


DocumentSource = PlainTextSource | UploadedSource


@dataclass
class DocumentRevision:
    document_id: str
    revision: int
    source: DocumentSource
    author: str
    created_at: datetime

    @property
    def is_plaintext(self) -> bool:
        return isinstance(self.source, PlainTextSource)

    @property
    def text(self) -> str:
        if not isinstance(self.source, PlainTextSource):
            raise NotPlainText("uploaded documents have no text")
        return self.source.text


@dataclass
class Anchor:
    anchor_id: str
    document_id: str
    created_on_revision: int
    # revision -> character offset, or None once orphaned. Has an entry for
    # the creation revision and every later one.
    offsets: dict[int, int | None] = field(default_factory=dict)
    comment_id: str | None = None

    def offset_at(self, revision: int) -> int | None:
        if revision not in self.offsets:
            raise AnchorRevisionMismatch(
                f"anchor {self.anchor_id} has no mapping for revision {revision}"
            )
        return self.offsets[revision]


@dataclass
class DocumentRecord:
    document_id: str
    area_id: str
    item_id: str
    revisions: list[DocumentRevision] = field(default_factory=list)
    anchor_ids: list[str] = field(default_factory=list)

    @property
    def latest(self) -> DocumentRevision:
        return self.revisions[-1]


# -- annotated rendering --------------------------------------------------------

@dataclass(frozen=True)
class TextRun:
    text: str


@dataclass(frozen=True)
class ReferenceMarker:
    anchor_id: str
    active: bool = False


AnnotatedSegment = TextRun | ReferenceMarker


# -- pure diff machinery ---------------------------------------------------------

def is_anchor_whitespace(ch: str) -> bool:
    return ch in ANCHOR_WHITESPACE


def offset_is_anchorable(text: str, offset: int) -> bool:
    if not 0 <= offset < len(text):
        raise OffsetOutOfRange(f"offset {offset} outside [0, {len(text)})")
    return text[offset] in ANCHOR_WHITESPACE


def common_affixes(old: str, new: str) -> tuple[int, int]:
    """Length of the shared prefix and of the shared suffix after it."""
    limit = min(len(old), len(new))
    p = 0
    while p < limit and old[p] == new[p]:
        p += 1
    s = 0
    while s < limit - p and old[len(old) - 1 - s] == new[len(new) - 1 - s]:
        s += 1
    return p, s


def _core_walk(a: str, b: str) -> list[tuple[int, int]]:
    """Leftmost maximal alignment of two strings with no shared affixes.

    Returns the lexicographically smallest sequence of matched index pairs
    among all maximum-cardinality alignments. From each committed match the
    next pair is the smallest feasible one: row by row, the first occurrence
    of that row's character at or right of the column cursor is feasible
    exactly when the suffix-LCS table drops by one across it (occurrences
    further right never help, the table is non-increasing), otherwise the
    row's character is matched by no optimal alignment and is skipped.
    """
    n, m = len(a), len(b)
    rows = [array("I", bytes(4 * (m + 1))) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        cur = rows[i]
        below = rows[i + 1]
        ai = a[i]
        for j in range(m - 1, -1, -1):
            if ai == b[j]:
                cur[j] = below[j + 1] + 1
            else:
                x = below[j]
                y = cur[j + 1]
                cur[j] = x if x >= y else y
    occurrences: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        occurrences.setdefault(ch, []).append(j)
    pairs: list[tuple[int, int]] = []
    i = j = 0
    remaining = rows[0][0]
    while remaining:
        positions = occurrences.get(a[i])
        j2 = None
        if positions:
            k = bisect_left(positions, j)
            if k < len(positions):
                j2 = positions[k]
        if j2 is None or rows[i + 1][j2 + 1] != remaining - 1:
            i += 1
            continue
        pairs.append((i, j2))
        i += 1
        j = j2 + 1
        remaining -= 1
    return pairs


def lcs_alignment(old: str, new: str) -> list[tuple[int, int]]:
    """Maximal monotone matching of equal characters, leftmost tie-break.

    Returns (old_index, new_index) pairs in increasing order. Unmatched old
    characters were deleted, unmatched new characters inserted.
    """
    p, s = common_affixes(old, new)
    pairs = [(k, k) for k in range(p)]
    core_old = old[p : len(old) - s]
    core_new = new[p : len(new) - s]
    if core_old and core_new and len(core_old) * len(core_new) <= DIFF_CELL_BUDGET:
        pairs.extend((p + i, p + j) for i, j in _core_walk(core_old, core_new))
    for k in range(s):
        pairs.append((len(old) - s + k, len(new) - s + k))
    return pairs


def snap_to_whitespace(text: str, index: int, radius: int = SNAP_RADIUS) -> int | None:
    """Nearest anchorable position within `radius` of `index`, preferring left."""
    for d in range(radius + 1):
        left = index - d
        if 0 <= left < len(text) and text[left] in ANCHOR_WHITESPACE:
            return left
        right = index + d
        if d and right < len(text) and text[right] in ANCHOR_WHITESPACE:
            return right
    return None


def remap_offset(
    new_text: str, offset: int, mapping: dict[int, int]
) -> int | None:
    """Carry one anchor offset through a precomputed alignment mapping."""
    j = mapping.get(offset)
    if j is None:
        return None
    if new_text[j] in ANCHOR_WHITESPACE:
        return j
    return snap_to_whitespace(new_text, j)


def remap_anchor(old_text: str, new_text: str, offset: int) -> int | None:
    """New position of the anchor at `offset` after the edit, or None.

    The anchored character must survive the LCS diff as a copied character;
    if it is copied somewhere no longer blank, the anchor snaps to the
    nearest whitespace within SNAP_RADIUS characters (left preferred).
    """
    if not offset_is_anchorable(old_text, offset):
        raise InvalidAnchor(f"character at offset {offset} is not whitespace")
    mapping = dict(lcs_alignment(old_text, new_text))
    return remap_offset(new_text, offset, mapping)


def annotate(
    text: str,
    markers: list[tuple[int, str]],
    active_anchor: str | None = None,
) -> list[AnnotatedSegment]:
    """Interleave reference markers with text runs.

    `markers` is (offset, anchor_id), already sorted; each marker is emitted
    before the character at its offset. Concatenating the TextRuns always
    reproduces `text`.
    """
    segments: list[AnnotatedSegment] = []
    pos = 0
    for offset, anchor_id in markers:
        if offset > pos:
            segments.append(TextRun(text[pos:offset]))
            pos = offset
        segments.append(ReferenceMarker(anchor_id, active=anchor_id == active_anchor))
    if pos < len(text):
        segments.append(TextRun(text[pos:]))
    return segments


# -- operations -----------------------------------------------------------------

class DocumentOps:
    """Document operations; mixed into the server over its shared state."""

    def create_document(
        self,
        area_id: str,
        title: str,
        source: DocumentSource,
        author: str,
    ) -> tuple[Item, DocumentRevision]:
        area = self._require_area(area_id)
        with self._group_lock(area.owner_group):
            self._require_post_access(author, area)
            self._check_source_size(source)
            document_id = self._new_id("d")
            record = DocumentRecord(
                document_id=document_id, area_id=area_id, item_id=""
            )
            revision = DocumentRevision(
                document_id=document_id,
                revision=1,
                source=source,
                author=author,
                created_at=self._now(),
            )
            record.revisions.append(revision)
            self._state.documents[document_id] = record
            item = self._append_item(
                area, author, title, self._document_kind(document_id)
            )
            record.item_id = item.id
            self._persist_group(area.owner_group)
            return copy.deepcopy(item), copy.deepcopy(revision)

    def validate_anchor_offset(
        self, document_id: str, offset: int, revision: int | None = None
    ) -> bool:
        rev = self._require_revision(document_id, revision)
        if not rev.is_plaintext:
            raise NotPlainText("in-text anchors exist only on plain-text documents")
        return offset_is_anchorable(rev.text, offset)

    def attach_intext(
        self,
        document_id: str,
        offset: int,
        subject: str,
        body: str,
        author: str,
        revision: int | None = None,
    ) -> tuple["Comment", Anchor]:
        record = self._require_document(document_id)
        area = self._require_area(record.area_id)
        with self._group_lock(area.owner_group):
            self._require_post_access(author, area)
            rev = self._require_revision(document_id, revision)
            if not rev.is_plaintext:
                raise NotPlainText(
                    "in-text anchors exist only on plain-text documents"
                )
            if rev.revision != record.latest.revision:
                raise AnchorRevisionMismatch(
                    "in-text comments attach to the latest revision"
                )
            if not offset_is_anchorable(rev.text, offset):
                raise InvalidAnchor(
                    f"offset {offset} is not in blank space"
                )
            anchor = Anchor(
                anchor_id=self._new_id("n"),
                document_id=document_id,
                created_on_revision=rev.revision,
                offsets={rev.revision: offset},
            )
            self._state.anchors[anchor.anchor_id] = anchor
            record.anchor_ids.append(anchor.anchor_id)
            if not subject:
                subject = self._state.items[record.item_id].title
            comment = self._append_comment(
                area, author, subject, body, InText(anchor.anchor_id)
            )
            anchor.comment_id = comment.id
            self._persist_group(area.owner_group)
            return copy.deepcopy(comment), copy.deepcopy(anchor)

    def revise_document(
        self, document_id: str, new_text: str, author: str
    ) -> DocumentRevision:
        record = self._require_document(document_id)
        area = self._require_area(record.area_id)
        with self._group_lock(area.owner_group):
            self._require_post_access(author, area)
            latest = record.latest
            if not latest.is_plaintext:
                raise NotPlainText("uploaded documents take upload revisions")
            self._check_source_size(PlainTextSource(new_text))
            old_text = latest.text
            mapping = dict(lcs_alignment(old_text, new_text))
            revision = DocumentRevision(
                document_id=document_id,
                revision=latest.revision + 1,
                source=PlainTextSource(new_text),
                author=author,
                created_at=self._now(),
            )
            # Extend every anchor map inside the same write so no reader can
            # observe a live anchor missing the newest revision.
            for anchor_id in record.anchor_ids:
                anchor = self._state.anchors[anchor_id]
                old_offset = anchor.offsets[latest.revision]
                if old_offset is None:
                    anchor.offsets[revision.revision] = None
                else:
                    anchor.offsets[revision.revision] = remap_offset(
                        new_text, old_offset, mapping
                    )
            record.revisions.append(revision)
            self._persist_group(area.owner_group)
            return copy.deepcopy(revision)

    def replace_upload(
        self,
        document_id: str,
        blob: bytes,
        filename: str,
        media_type: str,
        author: str,
    ) -> DocumentRevision:
        record = self._require_document(document_id)
        area = self._require_area(record.area_id)
        with self._group_lock(area.owner_group):
            self._require_post_access(author, area)
            if record.latest.is_plaintext:
                raise InvalidSpec("plain-text documents take text revisions")
            source = UploadedSource(blob=blob, filename=filename, media_type=media_type)
            self._check_source_size(source)
            revision = DocumentRevision(
                document_id=document_id,
                revision=record.latest.revision + 1,
                source=source,
                author=author,
                created_at=self._now(),
            )
            record.revisions.append(revision)
            self._persist_group(area.owner_group)
            return copy.deepcopy(revision)

    def render_annotated(
        self,
        document_id: str,
        revision: int | None = None,
        anchor_ids: list[str] | None = None,
        active_anchor: str | None = None,
    ) -> list[AnnotatedSegment]:
        record = self._require_document(document_id)
        rev = self._require_revision(document_id, revision)
        if not rev.is_plaintext:
            raise NotPlainText("uploaded documents render as downloads")
        if anchor_ids is None:
            anchor_ids = list(record.anchor_ids)
        markers: list[tuple[int, int, str]] = []
        for order, anchor_id in enumerate(anchor_ids):
            anchor = self._state.anchors.get(anchor_id)
            if anchor is None or anchor.document_id != document_id:
                raise AnchorRevisionMismatch(
                    f"anchor {anchor_id} does not belong to this document"
                )
            offset = anchor.offset_at(rev.revision)
            if offset is None:
                continue  # orphaned: listed separately, never rendered inline
            markers.append((offset, order, anchor_id))
        markers.sort()
        return annotate(
            rev.text, [(off, aid) for off, _, aid in markers], active_anchor
        )

    def orphaned_anchors(
        self, document_id: str, revision: int | None = None
    ) -> list[Anchor]:
        record = self._require_document(document_id)
        rev = self._require_revision(document_id, revision)
        out = []
        for anchor_id in record.anchor_ids:
            anchor = self._state.anchors[anchor_id]
            if rev.revision in anchor.offsets and anchor.offsets[rev.revision] is None:
                out.append(copy.deepcopy(anchor))
        return out

    def get_document(self, document_id: str) -> DocumentRecord:
        return copy.deepcopy(self._require_document(document_id))

    def get_anchor(self, anchor_id: str) -> Anchor:
        anchor = self._state.anchors.get(anchor_id)
        if anchor is None:
            raise InvalidAnchor(f"unknown anchor {anchor_id}")
        return copy.deepcopy(anchor)

    # -- internals --

    def _document_kind(self, document_id: str):
        from .model import DocumentItem

        return DocumentItem(document_id)

    def _require_document(self, document_id: str) -> DocumentRecord:
        record = self._state.documents.get(document_id)
        if record is None:
            raise UnknownDocument(document_id)
        return record

    def _require_revision(
        self, document_id: str, revision: int | None
    ) -> DocumentRevision:
        record = self._require_document(document_id)
        if revision is None:
            return record.latest
        if not 1 <= revision <= len(record.revisions):
            raise AnchorRevisionMismatch(
                f"document {document_id} has no revision {revision}"
            )
        return record.revisions[revision - 1]

    def _check_source_size(self, source: DocumentSource) -> None:
        cap = self._upload_cap
        if isinstance(source, UploadedSource):
            if len(source.blob) > cap:
                raise OversizeUpload(f"upload exceeds {cap} bytes")
        elif len(source.text.encode("utf-8")) > cap:
            raise OversizeUpload(f"document exceeds {cap} bytes")
