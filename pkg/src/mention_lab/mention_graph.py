"""@-mention extraction, reply/call classification and per-project mention multigraphs.

A mention of ``v`` by ``u`` is a *reply* when ``v`` has already posted in the thread
(opened it, or commented strictly earlier), and a *call* otherwise.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from mention_lab.ingest import ProjectData, ProjectId, StoreError, ThreadRecord, load_project, norm_login
from mention_lab.timeutil import Window, format_ts

KINDS = ("reply", "call")

_MENTION = re.compile(r"(?<!\w)@([A-Za-z0-9-]{1,39})(?![A-Za-z0-9-])(?!/[A-Za-z0-9])")
_FENCE = re.compile(r"^ {0,3}(`{3,}|~{3,})")
_QUOTE = re.compile(r"^ {0,3}>")
_BACKTICKS = re.compile(r"`+")


def _masked_spans(body: str) -> list[tuple[int, int]]:
    """Character ranges that are code (fenced or inline) or quoted-reply lines."""
    spans = []
    pos = 0
    fence = None  # (char, length) of the open fence
    for line in body.splitlines(keepends=True):
        start, end = pos, pos + len(line)
        pos = end
        m = _FENCE.match(line)
        if fence is not None:
            spans.append((start, end))
            if m and m.group(1)[0] == fence[0] and len(m.group(1)) >= fence[1] \
                    and not line[m.end():].strip():
                fence = None
            continue
        if m:
            fence = (m.group(1)[0], len(m.group(1)))
            spans.append((start, end))
            continue
        if _QUOTE.match(line):
            spans.append((start, end))
            continue
        runs = list(_BACKTICKS.finditer(line))
        i = 0
        while i < len(runs):
            opener = runs[i]
            closer = next((r for r in runs[i + 1:] if len(r.group()) == len(opener.group())), None)
            if closer is None:
                i += 1
                continue
            spans.append((start + opener.start(), start + closer.end()))
            i = runs.index(closer) + 1
    return spans


def extract_mentions(body: str) -> list[tuple[str, int]]:
    """Return ``(username, byte_offset)`` for each @-mention in prose.

    Mentions inside fenced code blocks, inline code spans and ``>`` quoted lines are
    skipped, as are e-mail-like tokens and ``@org/team`` references. Duplicates are kept.
    The offset is the UTF-8 byte position of the ``@``.
    """
    if not body:
        return []
    spans = _masked_spans(body)
    out = []
    for m in _MENTION.finditer(body):
        at = m.start()
        if any(lo <= at < hi for lo, hi in spans):
            continue
        out.append((m.group(1), len(body[:at].encode("utf-8"))))
    return out


@dataclass(frozen=True, order=True)
class MentionEdge:
    thread: int
    timestamp: datetime
    event_index: int
    offset: int
    mentioner: str
    mentionee: str
    kind: str

    def to_dict(self) -> dict:
        return {"mentioner": self.mentioner, "mentionee": self.mentionee, "thread": self.thread,
                "timestamp": format_ts(self.timestamp), "kind": self.kind,
                "event_index": self.event_index, "offset": self.offset}


def classify_thread(thread: ThreadRecord, window: Window | None = None) -> list[MentionEdge]:
    """One edge per non-self mention in the thread, labelled reply or call.

    With ``window`` given, events outside it are ignored entirely, so "has posted"
    only looks at in-window history.
    """
    indexed = list(enumerate(thread.events))
    if window is not None:
        indexed = [(i, e) for i, e in indexed if e.timestamp in window]
    opener = norm_login(thread.author)
    opener_posted = bool(indexed) and indexed[0][0] == 0
    edges = []
    posted: set[str] = set()
    k = 0  # events[:k] are strictly earlier than the current one
    for pos, (idx, event) in enumerate(indexed):
        while k < pos and indexed[k][1].timestamp < event.timestamp:
            posted.add(norm_login(indexed[k][1].author))
            k += 1
        author = norm_login(event.author)
        for name, offset in extract_mentions(event.body):
            target = norm_login(name)
            if target == author:
                continue
            is_reply = target in posted or (opener_posted and idx > 0 and target == opener)
            edges.append(MentionEdge(thread.number, event.timestamp, idx, offset, author, target,
                                     "reply" if is_reply else "call"))
    return edges


@dataclass(frozen=True)
class MentionGraph:
    project: ProjectId
    edges: tuple[MentionEdge, ...]
    window: Window

    def of_kind(self, kind: str) -> list[MentionEdge]:
        return [e for e in self.edges if e.kind == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
                       for e in self.edges)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()


def build_graph(source, project: ProjectId | str | None = None, window: Window | None = None,
                *, context: str = "full") -> MentionGraph:
    """Union of :func:`classify_thread` over a project's threads, filtered to ``window``.

    ``source`` is a :class:`ProjectData` or a store directory (then ``project`` is required).
    ``context="full"`` classifies against the whole thread history and keeps edges whose
    timestamp falls in the window; ``context="window"`` additionally ignores out-of-window
    events when deciding reply vs call.
    """
    window = window or Window()
    if isinstance(source, ProjectData):
        data = source
    else:
        if project is None:
            raise ValueError("build_graph from a store needs a project")
        data = load_project(Path(source), ProjectId.from_obj(project))
    if context not in ("full", "window"):
        raise ValueError(f"unknown classification context {context!r}")
    edges = []
    for thread in data.threads:
        for e in classify_thread(thread, window if context == "window" else None):
            if e.timestamp in window:
                edges.append(e)
    edges.sort()
    return MentionGraph(data.project, tuple(edges), window)


@dataclass(frozen=True)
class InteractionMatrix:
    """Nonnegative integer count matrix with labelled rows and columns."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: np.ndarray

    def __post_init__(self):
        if self.cells.shape != (len(self.rows), len(self.cols)):
            raise ValueError("cell shape does not match labels")
        if self.cells.size and self.cells.min() < 0:
            raise ValueError("interaction counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.cells.sum())

    def row_index(self, label: str) -> int | None:
        try:
            return self.rows.index(label)
        except ValueError:
            return None

    def col_index(self, label: str) -> int | None:
        try:
            return self.cols.index(label)
        except ValueError:
            return None

    def transpose(self) -> "InteractionMatrix":
        return InteractionMatrix(self.cols, self.rows, self.cells.T.copy())

    @classmethod
    def from_counts(cls, counts: dict[tuple[str, str], int], rows=None, cols=None) -> "InteractionMatrix":
        rows = tuple(sorted({r for r, _ in counts})) if rows is None else tuple(rows)
        cols = tuple(sorted({c for _, c in counts})) if cols is None else tuple(cols)
        ri = {r: i for i, r in enumerate(rows)}
        ci = {c: j for j, c in enumerate(cols)}
        cells = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for (r, c), n in counts.items():
            cells[ri[r], ci[c]] += n
        return cls(rows, cols, cells)


def interaction_matrix(graph: MentionGraph, kind: str) -> InteractionMatrix:
    """Square mention-count matrix for one edge kind, indexed by every user on such an edge."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    counts: dict[tuple[str, str], int] = {}
    users = set()
    for e in graph.edges:
        if e.kind != kind:
            continue
        counts[(e.mentioner, e.mentionee)] = counts.get((e.mentioner, e.mentionee), 0) + 1
        users.update((e.mentioner, e.mentionee))
    labels = tuple(sorted(users))
    return InteractionMatrix.from_counts(counts, labels, labels)


def write_edges(graph: MentionGraph, path) -> None:
    Path(path).write_text(graph.to_jsonl(), encoding="utf-8")


__all__ = ["KINDS", "MentionEdge", "MentionGraph", "InteractionMatrix", "extract_mentions",
           "classify_thread", "build_graph", "interaction_matrix", "write_edges", "StoreError"]
