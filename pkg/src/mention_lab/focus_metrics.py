"""KL-divergence specialization scores over interaction matrices.

For a row ``u`` with total ``A`` in a matrix with grand total ``m``, the raw score is
the KL divergence of the row profile from the column marginals. It is normalized
between the smallest value any integer allocation of ``A`` can reach and the
upper bound ``ln(m / A)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from mention_lab.ingest import CommitRecord, ThreadRecord, norm_login
from mention_lab.mention_graph import InteractionMatrix, MentionGraph, interaction_matrix
from mention_lab.timeutil import Window

SUM_TOL = 1e-9


class UndefinedDivergence(ValueError):
    pass


class InactiveSubject(ValueError):
    """The selected row/column has zero total, so its specialization is undefined."""


def kl_divergence(p, q) -> float:
    """Sum of ``p_i ln(p_i / q_i)`` in nats, with ``0 ln(0/q) = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("P and Q must have the same length")
    if abs(p.sum() - 1.0) > SUM_TOL or abs(q.sum() - 1.0) > SUM_TOL:
        raise ValueError("P and Q must each sum to 1")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probabilities must be nonnegative")
    nz = p > 0
    if np.any(q[nz] <= 0):
        raise UndefinedDivergence("undefined divergence: P has mass where Q is zero")
    return max(float(np.sum(p[nz] * np.log(p[nz] / q[nz]))), 0.0)


def _delta(alloc: np.ndarray, q: np.ndarray, total: int) -> float:
    nz = alloc > 0
    p = alloc[nz] / total
    return float(np.sum(p * np.log(p / q[nz])))


def _term(s: int, a: int, q: float) -> float:
    return 0.0 if s == 0 else (s / a) * math.log(s / (a * q))


def delta_min(q: np.ndarray, total: int) -> float:
    """Smallest divergence any integer allocation of ``total`` units can have against ``q``.

    Cells are capped at ``ceil(total * q_j)``. Starting from the floors, remaining units go
    one at a time to the cell with the smallest increase (cells visited in decreasing
    marginal order on ties), then single-unit moves are applied while any lowers the score.
    The objective is separable convex, so the result is the exact integer minimum.
    """
    q = np.asarray(q, dtype=float)
    order = sorted(np.flatnonzero(q > 0), key=lambda j: (-q[j], j))
    target = total * q
    cap = {j: math.ceil(target[j] - 1e-12) for j in order}
    alloc = {j: min(math.floor(target[j] + 1e-12), cap[j]) for j in order}
    remaining = total - sum(alloc.values())

    def gain(j):
        s = alloc[j]
        return _term(s + 1, total, q[j]) - _term(s, total, q[j])

    heap = [(gain(j), rank, j) for rank, j in enumerate(order) if alloc[j] < cap[j]]
    heapq.heapify(heap)
    rank_of = {j: r for r, j in enumerate(order)}
    while remaining > 0 and heap:
        _, _, j = heapq.heappop(heap)
        alloc[j] += 1
        remaining -= 1
        if alloc[j] < cap[j]:
            heapq.heappush(heap, (gain(j), rank_of[j], j))

    improved = True
    while improved:
        improved = False
        for a in order:
            if alloc[a] == 0:
                continue
            loss = _term(alloc[a] - 1, total, q[a]) - _term(alloc[a], total, q[a])
            for b in order:
                if b == a or alloc[b] >= cap[b]:
                    continue
                change = loss + _term(alloc[b] + 1, total, q[b]) - _term(alloc[b], total, q[b])
                if change < -1e-15:
                    alloc[a] -= 1
                    alloc[b] += 1
                    improved = True
                    break
            if improved:
                break
    vec = np.zeros(len(q), dtype=np.int64)
    for j, s in alloc.items():
        vec[j] = s
    return max(_delta(vec, q, total), 0.0)


@dataclass(frozen=True)
class SpecializationScore:
    subject: str
    axis: str  # "outward" (row) or "inward" (column)
    raw_delta: float
    normalized: float
    delta_min: float
    delta_max: float


def specialization(matrix: InteractionMatrix, index: int, axis: str = "outward") -> SpecializationScore:
    """Normalized specialization of row ``index`` (outward) or column ``index`` (inward)."""
    if axis not in ("outward", "inward"):
        raise ValueError("axis must be 'outward' or 'inward'")
    cells = matrix.cells if axis == "outward" else matrix.cells.T
    labels = matrix.rows if axis == "outward" else matrix.cols
    m = int(cells.sum())
    if m <= 0:
        raise InactiveSubject("undefined for inactive subject: empty matrix")
    vec = cells[index].astype(np.int64)
    total = int(vec.sum())
    if total <= 0:
        raise InactiveSubject(f"undefined for inactive subject {labels[index]!r}")
    q = cells.sum(axis=0) / m
    raw = kl_divergence(vec / total, q)
    d_max = math.log(m / total)
    d_min = delta_min(q, total)
    if d_max - d_min <= 1e-12:
        norm = 0.0
    else:
        norm = min(max((raw - d_min) / (d_max - d_min), 0.0), 1.0)
    return SpecializationScore(labels[index], axis, raw, norm, d_min, d_max)


def _score_for(matrix: InteractionMatrix, login: str, axis: str) -> float | None:
    idx = matrix.row_index(login) if axis == "outward" else matrix.col_index(login)
    if idx is None:
        return None
    try:
        return specialization(matrix, idx, axis).normalized
    except InactiveSubject:
        return None


def oss_iss(graph: MentionGraph, developer: str) -> dict[str, float | None]:
    """Outward/inward social specialization for replies (rho) and calls (kappa).

    ``None`` marks an undefined score (no relevant mentions), which is not the same as 0.
    """
    login = norm_login(developer)
    reply = interaction_matrix(graph, "reply")
    call = interaction_matrix(graph, "call")
    return {
        "OSS_rho": _score_for(reply, login, "outward"),
        "OSS_kappa": _score_for(call, login, "outward"),
        "ISS_kappa": _score_for(call, login, "inward"),
        "ISS_rho": _score_for(reply, login, "inward"),
    }


def module_of(path: str, depth: int = 1) -> str:
    """Leading ``depth`` directories of ``path``; files at the repository root map to "."."""
    dirs = path.strip("/").split("/")[:-1]
    return "/".join(dirs[:depth]) if dirs else "."


def commit_module_matrix(commits: list[CommitRecord], window: Window | None = None,
                         depth: int = 1) -> InteractionMatrix:
    """Developers by modules; a cell counts the commits by that developer touching that module."""
    counts: dict[tuple[str, str], int] = {}
    for c in commits:
        if not c.author_login or (window is not None and c.author_date not in window):
            continue
        dev = norm_login(c.author_login)
        for mod in sorted({module_of(f.path, depth) for f in c.file_changes}):
            counts[(dev, mod)] = counts.get((dev, mod), 0) + 1
    return InteractionMatrix.from_counts(counts)


def daf(matrix: InteractionMatrix, developer: str) -> SpecializationScore | None:
    """Developer attention focus; ``None`` when the developer has no commits in the matrix."""
    idx = matrix.row_index(norm_login(developer))
    if idx is None or matrix.total == 0:
        return None
    try:
        return specialization(matrix, idx, "outward")
    except InactiveSubject:
        return None


def degree_and_responsiveness(graph: MentionGraph, threads: list[ThreadRecord], developer: str,
                              window: Window | None = None) -> dict[str, int]:
    """Social out-degree, call in-degree and responsiveness within ``window``.

    Responsiveness counts distinct threads where the developer was called and later
    authored an event (strictly after the earliest call in that thread).
    """
    row = degree_table(graph, threads, window).get(norm_login(developer))
    return dict(row) if row else {"social_outdegree": 0, "observed_call_indegree": 0, "responsiveness": 0}


def social_specialization_table(graph: MentionGraph) -> dict[str, dict[str, float | None]]:
    """:func:`oss_iss` for every user on any edge, building each matrix once."""
    mats = {"reply": interaction_matrix(graph, "reply"), "call": interaction_matrix(graph, "call")}
    users = set()
    for e in graph.edges:
        users.update((e.mentioner, e.mentionee))
    return {u: {"OSS_rho": _score_for(mats["reply"], u, "outward"),
                "OSS_kappa": _score_for(mats["call"], u, "outward"),
                "ISS_kappa": _score_for(mats["call"], u, "inward"),
                "ISS_rho": _score_for(mats["reply"], u, "inward")} for u in sorted(users)}


def degree_table(graph: MentionGraph, threads: list[ThreadRecord],
                 window: Window | None = None) -> dict[str, dict[str, int]]:
    """:func:`degree_and_responsiveness` for every user on any edge, in one pass."""
    window = window or graph.window
    out: dict[str, dict[str, int]] = {}
    first_call: dict[tuple[str, int], datetime] = {}
    for e in graph.edges:
        out.setdefault(e.mentioner, {"social_outdegree": 0, "observed_call_indegree": 0, "responsiveness": 0})
        row = out.setdefault(e.mentionee, {"social_outdegree": 0, "observed_call_indegree": 0, "responsiveness": 0})
        out[e.mentioner]["social_outdegree"] += 1
        if e.kind == "call":
            row["observed_call_indegree"] += 1
            key = (e.mentionee, e.thread)
            if key not in first_call or e.timestamp < first_call[key]:
                first_call[key] = e.timestamp
    by_number = {t.number: t for t in threads}
    for (login, number), ts in first_call.items():
        thread = by_number.get(number)
        if thread is not None and any(norm_login(ev.author) == login and ev.timestamp > ts
                                      and ev.timestamp in window for ev in thread.events):
            out[login]["responsiveness"] += 1
    return out
