"""Fix-link discovery and SZZ-style blame over ingested diffs.

Fixing commits are found through GitHub closing keywords ("closes #123") in commit
messages and pull-request text. Lines a fix deletes or modifies are traced back
through a replay of the first-parent line history; the last commit that changed
each line (ignoring whitespace-only edits) is flagged as likely buggy.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from mention_lab.ingest import CommitRecord, ProjectData, norm_login
from mention_lab.timeutil import Window

logger = logging.getLogger(__name__)

KEYWORDS = ("close", "closes", "closed", "fix", "fixes", "fixed", "resolve", "resolves", "resolved")
_LINK = re.compile(
    r"\b(close[sd]?|fix(?:e[sd])?|resolve[sd]?)\b[ \t]*:?[ \t]*"
    r"(?:#(\d+)|https?://github\.com/([\w.-]+)/([\w.-]+)/issues/(\d+))(?!\w)",
    re.IGNORECASE,
)
_WS = re.compile(r"\s+")


@dataclass(frozen=True, order=True)
class FixLink:
    issue_number: int
    fixer: str  # fixing commit sha
    source: str = "commit"  # "commit" or "pull_request"
    pull_request: int | None = None
    keyword: str = ""
    offset: int = 0

    def to_dict(self) -> dict:
        return {"issue_number": self.issue_number, "fixer": self.fixer, "source": self.source,
                "pull_request": self.pull_request, "evidence": [self.keyword, self.offset]}


@dataclass(frozen=True)
class BuggyAttribution:
    buggy_sha: str
    fixing_sha: str
    issue_number: int
    lines: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict:
        return {"buggy_sha": self.buggy_sha, "fixing_sha": self.fixing_sha,
                "issue_number": self.issue_number, "lines": [list(x) for x in self.lines]}


@dataclass
class SzzResult:
    links: list[FixLink] = field(default_factory=list)
    dangling: list[dict] = field(default_factory=list)
    attributions: list[BuggyAttribution] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)


class MissingHistory(Exception):
    """The diffs needed to replay a file's line history are absent or do not apply."""


def _scan(text: str, project) -> list[tuple[int, str, int]]:
    out = []
    for m in _LINK.finditer(text):
        if m.group(2):
            number = int(m.group(2))
        else:
            if project is not None and (m.group(3).lower(), m.group(4).lower()) != \
                    (project.owner.lower(), project.name.lower()):
                continue
            number = int(m.group(5))
        out.append((number, m.group(1).lower(), len(text[:m.start()].encode("utf-8"))))
    return out


def find_fix_links(data: ProjectData) -> tuple[list[FixLink], list[dict]]:
    """Issue-closing references from commit messages and pull-request title/body.

    A PR-based reference attributes the fix to the PR's merge commit(s). References to
    numbers that are not issue threads of the project come back as dangling records.
    """
    threads = data.thread_index()
    commit_shas = {c.sha for c in data.commits}
    found: dict[tuple[int, str], FixLink] = {}
    dangling = []

    def accept(number, link_fn, where):
        target = threads.get(number)
        if target is None or target.kind != "issue":
            dangling.append({"issue_number": number, "where": where,
                             "reason": "no such issue" if target is None else "refers to a pull request"})
            return
        link = link_fn()
        key = (link.issue_number, link.fixer)
        if key not in found:
            found[key] = link

    for c in data.commits:
        for number, kw, off in _scan(c.message, data.project):
            accept(number, lambda: FixLink(number, c.sha, "commit", None, kw, off), f"commit {c.sha}")
    for t in data.threads:
        if t.kind != "pull_request":
            continue
        body = t.events[0].body if t.events else ""
        text = f"{t.title}\n\n{body}" if t.title else body
        for number, kw, off in _scan(text, data.project):
            merges = [s for s in t.merge_commits if s in commit_shas]
            if not merges:
                dangling.append({"issue_number": number, "where": f"pull request #{t.number}",
                                 "reason": "pull request has no merge commit in the store"})
                continue
            for sha in merges:
                accept(number, lambda: FixLink(number, sha, "pull_request", t.number, kw, off),
                       f"pull request #{t.number}")
    return sorted(found.values()), dangling


def _norm_ws(line: str) -> str:
    return _WS.sub("", line)


class LineHistory:
    """First-parent line-history replay over a project's commits.

    ``track_renames`` carries a renamed file's line origins over to the new path;
    otherwise a rename starts the file afresh, owned by the renaming commit.
    ``ignore_whitespace`` lets a line whose change was whitespace-only keep its
    previous origin, so blame skips cosmetic edits.
    """

    def __init__(self, commits: list[CommitRecord], *, track_renames: bool = True,
                 ignore_whitespace: bool = True):
        self.commits = {c.sha: c for c in commits}
        ordered = sorted(commits, key=lambda c: (c.author_date, c.sha))
        self._implicit_parent = {c.sha: (ordered[i - 1].sha if i else None) for i, c in enumerate(ordered)}
        self.track_renames = track_renames
        self.ignore_whitespace = ignore_whitespace

    def parent(self, sha: str) -> str | None:
        c = self.commits[sha]
        if c.parents is None:
            return self._implicit_parent[sha]
        if not c.parents:
            return None
        if c.parents[0] not in self.commits:
            raise MissingHistory(f"parent {c.parents[0]} of {sha} is not in the store")
        return c.parents[0]

    def chain(self, sha: str) -> list[str]:
        """Commits from the root to ``sha`` inclusive, following first parents."""
        out = []
        seen = set()
        cur: str | None = sha
        while cur is not None:
            if cur in seen:
                raise MissingHistory(f"cycle in parent links at {cur}")
            seen.add(cur)
            out.append(cur)
            cur = self.parent(cur)
        out.reverse()
        return out

    def _apply(self, files: dict, commit: CommitRecord) -> None:
        for fc in commit.file_changes:
            if fc.status == "deleted":
                files.pop(fc.old_path or fc.path, None)
                continue
            if fc.status == "added":
                lines = []
            elif fc.status == "renamed" and fc.old_path:
                if fc.old_path not in files:
                    raise MissingHistory(f"{commit.sha}: renamed source {fc.old_path} unknown")
                lines = files.pop(fc.old_path)
                if not self.track_renames:
                    lines = [(text, commit.sha) for text, _ in lines]
            else:
                if fc.path not in files:
                    raise MissingHistory(f"{commit.sha}: no prior history for {fc.path}")
                lines = files[fc.path]
            lines = list(lines)
            for h in sorted(fc.hunks, key=lambda h: h.old_start, reverse=True):
                lo = h.old_start - 1
                hi = lo + len(h.old_lines)
                if lo < 0 or hi > len(lines) or (not h.old_lines and lo > len(lines)):
                    raise MissingHistory(f"{commit.sha}: hunk at {fc.path}:{h.old_start} out of range")
                removed = lines[lo:hi]
                if [t for t, _ in removed] != list(h.old_lines):
                    raise MissingHistory(f"{commit.sha}: hunk at {fc.path}:{h.old_start} does not apply")
                lines[lo:hi] = self._new_entries(removed, h.new_lines, commit.sha)
            files[fc.path] = lines

    def _new_entries(self, removed, new_lines, sha):
        unused = list(removed)
        out = []
        for text in new_lines:
            origin = sha
            if self.ignore_whitespace:
                key = _norm_ws(text)
                for i, (old_text, old_origin) in enumerate(unused):
                    if _norm_ws(old_text) == key:
                        origin = old_origin
                        del unused[i]
                        break
            out.append((text, origin))
        return out

    def replay(self, tip: str):
        """Yield ``(sha, files)`` after applying each commit on the chain to ``tip``."""
        files: dict[str, list[tuple[str, str]]] = {}
        for sha in self.chain(tip):
            self._apply(files, self.commits[sha])
            yield sha, files


def _fixed_lines(fix_commit: CommitRecord, ignore_whitespace: bool):
    """Parent-side ``(path, line_no, text)`` that the fix deletes or modifies."""
    out = []
    for fc in fix_commit.file_changes:
        if fc.status == "added":
            continue
        path = fc.old_path or fc.path
        for h in fc.hunks:
            adds = [_norm_ws(t) for t in h.new_lines]
            for i, text in enumerate(h.old_lines):
                if ignore_whitespace:
                    key = _norm_ws(text)
                    if key in adds:  # cosmetic change in the fix itself
                        adds.remove(key)
                        continue
                out.append((path, h.old_start + i, text))
    return out


def attribute_all(links: list[FixLink], history: LineHistory) -> tuple[list[BuggyAttribution], list[dict]]:
    """Blame every fix link; returns attributions sorted by (issue, fixing sha, buggy sha)."""
    queries: dict[str, list[FixLink]] = {}
    skipped = []
    for link in links:
        fix = history.commits.get(link.fixer)
        if fix is None:
            skipped.append({"issue_number": link.issue_number, "fixer": link.fixer, "reason": "fixing commit missing"})
            continue
        try:
            parent = history.parent(fix.sha)
        except MissingHistory as exc:
            skipped.append({"issue_number": link.issue_number, "fixer": link.fixer, "reason": str(exc)})
            continue
        if parent is None:
            continue  # root commit: nothing to blame
        queries.setdefault(parent, []).append(link)

    results: list[BuggyAttribution] = []
    pending = dict(queries)
    for tip in sorted(queries, key=lambda s: (history.commits[s].author_date, s), reverse=True):
        if tip not in pending:
            continue
        try:
            for sha, files in history.replay(tip):
                for link in pending.pop(sha, ()):
                    try:
                        results.extend(_blame(link, files, history))
                    except MissingHistory as exc:
                        logger.warning("skipping fix %s for #%d: %s", link.fixer, link.issue_number, exc)
                        skipped.append({"issue_number": link.issue_number, "fixer": link.fixer, "reason": str(exc)})
        except MissingHistory as exc:
            for link in pending.pop(tip, ()):
                logger.warning("skipping fix %s for #%d: %s", link.fixer, link.issue_number, exc)
                skipped.append({"issue_number": link.issue_number, "fixer": link.fixer, "reason": str(exc)})
    results.sort(key=lambda a: (a.issue_number, a.fixing_sha, a.buggy_sha))
    return results, skipped


def _blame(link: FixLink, files, history: LineHistory) -> list[BuggyAttribution]:
    fix = history.commits[link.fixer]
    per_buggy: dict[str, list[tuple[str, int]]] = {}
    for path, line_no, text in _fixed_lines(fix, history.ignore_whitespace):
        lines = files.get(path)
        if lines is None or line_no > len(lines) or lines[line_no - 1][0] != text:
            raise MissingHistory(f"fix {fix.sha}: {path}:{line_no} does not match replayed history")
        origin = lines[line_no - 1][1]
        if history.commits[origin].author_date >= fix.author_date:
            logger.warning("blamed commit %s is not older than fix %s; ignored", origin, fix.sha)
            continue
        per_buggy.setdefault(origin, []).append((path, line_no))
    return [BuggyAttribution(sha, fix.sha, link.issue_number, tuple(lines))
            for sha, lines in sorted(per_buggy.items())]


def attribute_buggy(link: FixLink, history: LineHistory) -> list[BuggyAttribution]:
    """Blame one fix link. Unresolvable history yields ``[]`` with a warning."""
    return attribute_all([link], history)[0]


def run_szz(data: ProjectData, *, track_renames: bool = True, ignore_whitespace: bool = True,
            window: Window | None = None) -> SzzResult:
    """Fix links plus attributions. With ``window``, only fixing commits dated inside it are used."""
    links, dangling = find_fix_links(data)
    commits = {c.sha: c for c in data.commits}
    if window is not None:
        links = [l for l in links if commits[l.fixer].author_date in window]
    history = LineHistory(data.commits, track_renames=track_renames, ignore_whitespace=ignore_whitespace)
    attributions, skipped = attribute_all(links, history)
    return SzzResult(links, dangling, attributions, skipped)


def buggy_commit_counts(data: ProjectData, window: Window | None = None,
                        result: SzzResult | None = None, **szz_flags) -> dict[str, int]:
    """Distinct buggy commits per developer, for buggy commits (and their fixes) inside ``window``.

    Every committer in the window appears, zero included.
    """
    window = window or Window()
    if result is None:
        result = run_szz(data, window=window, **szz_flags)
    commits = {c.sha: c for c in data.commits}
    counts: dict[str, int] = {}
    for c in data.commits:
        if c.author_login and c.author_date in window:
            counts.setdefault(norm_login(c.author_login), 0)
    buggy = {a.buggy_sha for a in result.attributions
             if commits[a.fixing_sha].author_date in window and commits[a.buggy_sha].author_date in window}
    for sha in sorted(buggy):
        login = commits[sha].author_login
        if login:
            key = norm_login(login)
            counts[key] = counts.get(key, 0) + 1
    return counts


def fixing_commit_counts(data: ProjectData, result: SzzResult, window: Window | None = None) -> dict[str, int]:
    """Distinct fixing commits per developer (reported only; too collinear to model)."""
    window = window or Window()
    commits = {c.sha: c for c in data.commits}
    counts: dict[str, int] = {}
    for sha in sorted({l.fixer for l in result.links}):
        c = commits[sha]
        if c.author_login and c.author_date in window:
            key = norm_login(c.author_login)
            counts[key] = counts.get(key, 0) + 1
    return counts
