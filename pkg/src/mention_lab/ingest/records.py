"""Canonical record types shared by every stage downstream of ingestion."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime

from mention_lab.timeutil import format_ts, parse_ts

SHA_RE = re.compile(r"^[0-9a-f]{40}$")
THREAD_KINDS = ("issue", "pull_request")


class RecordError(ValueError):
    """A record violates one of the store invariants."""


def norm_login(login: str) -> str:
    """Comparison key for a GitHub login: trimmed, leading "@" removed, lower-cased."""
    return login.strip().lstrip("@").lower()


@dataclass(frozen=True, order=True)
class ProjectId:
    owner: str
    name: str

    def __post_init__(self):
        for part in (self.owner, self.name):
            if not part or "/" in part:
                raise RecordError(f"invalid project id part {part!r}")

    @classmethod
    def parse(cls, text: str) -> "ProjectId":
        if text.count("/") != 1:
            raise RecordError(f"project must be owner/name, got {text!r}")
        owner, name = text.split("/")
        return cls(owner, name)

    @property
    def slug(self) -> str:
        """Filesystem-safe directory name."""
        return f"{self.owner}__{self.name}"

    def __str__(self) -> str:
        return f"{self.owner}/{self.name}"

    def to_dict(self) -> dict:
        return {"owner": self.owner, "name": self.name}

    @classmethod
    def from_obj(cls, obj) -> "ProjectId":
        if isinstance(obj, ProjectId):
            return obj
        if isinstance(obj, str):
            return cls.parse(obj)
        return cls(obj["owner"], obj["name"])


@dataclass(frozen=True)
class CommentEvent:
    author: str
    timestamp: datetime
    body: str

    def to_dict(self) -> dict:
        return {"author": self.author, "timestamp": format_ts(self.timestamp), "body": self.body}

    @classmethod
    def from_dict(cls, d: dict) -> "CommentEvent":
        return cls(author=str(d["author"]).strip().lstrip("@"), timestamp=parse_ts(d["timestamp"]),
                   body=d.get("body") or "")


@dataclass(frozen=True)
class ThreadRecord:
    """An issue or pull request. ``events[0]`` is the opening post."""

    project: ProjectId
    number: int
    kind: str
    created_at: datetime
    author: str
    events: tuple[CommentEvent, ...] = ()
    title: str = ""
    merge_commits: tuple[str, ...] = ()

    def __post_init__(self):
        if self.number <= 0:
            raise RecordError(f"thread number must be positive, got {self.number}")
        if self.kind not in THREAD_KINDS:
            raise RecordError(f"thread #{self.number}: unknown kind {self.kind!r}")
        prev = None
        for ev in self.events:
            if ev.timestamp < self.created_at:
                raise RecordError(
                    f"thread #{self.number}: comment by {ev.author} at {format_ts(ev.timestamp)} "
                    f"precedes thread creation {format_ts(self.created_at)}")
            if prev is not None and ev.timestamp < prev:
                raise RecordError(f"thread #{self.number}: events not sorted by timestamp")
            prev = ev.timestamp

    def to_dict(self) -> dict:
        d = {
            "project": self.project.to_dict(),
            "number": self.number,
            "kind": self.kind,
            "created_at": format_ts(self.created_at),
            "author": self.author,
            "title": self.title,
            "events": [e.to_dict() for e in self.events],
        }
        if self.merge_commits:
            d["merge_commits"] = list(self.merge_commits)
        return d

    @classmethod
    def from_dict(cls, d: dict, project: ProjectId | None = None) -> "ThreadRecord":
        proj = ProjectId.from_obj(d["project"]) if "project" in d else project
        if proj is None:
            raise RecordError("thread record lacks a project")
        return cls(
            project=proj,
            number=int(d["number"]),
            kind=d["kind"],
            created_at=parse_ts(d["created_at"]),
            author=str(d["author"]).strip().lstrip("@"),
            events=tuple(CommentEvent.from_dict(e) for e in d.get("events") or ()),
            title=d.get("title") or "",
            merge_commits=tuple(s.lower() for s in d.get("merge_commits") or ()),
        )


@dataclass(frozen=True)
class Hunk:
    """Parent lines ``[old_start, old_start + len(old_lines))`` are replaced by ``new_lines``.

    With no deleted lines the new lines are inserted before parent line ``old_start``.
    Line numbers are 1-based.
    """

    old_start: int
    old_lines: tuple[str, ...] = ()
    new_start: int = 0
    new_lines: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"old_start": self.old_start, "old_lines": list(self.old_lines),
                "new_start": self.new_start, "new_lines": list(self.new_lines)}

    @classmethod
    def from_dict(cls, d: dict) -> "Hunk":
        return cls(int(d["old_start"]), tuple(d.get("old_lines") or ()),
                   int(d.get("new_start", 0)), tuple(d.get("new_lines") or ()))


@dataclass(frozen=True)
class FileChange:
    path: str
    hunks: tuple[Hunk, ...] = ()
    old_path: str | None = None
    status: str = "modified"  # added | modified | deleted | renamed

    def to_dict(self) -> dict:
        d = {"path": self.path, "status": self.status, "hunks": [h.to_dict() for h in self.hunks]}
        if self.old_path is not None:
            d["old_path"] = self.old_path
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FileChange":
        return cls(path=d["path"], hunks=tuple(Hunk.from_dict(h) for h in d.get("hunks") or ()),
                   old_path=d.get("old_path"), status=d.get("status", "modified"))


@dataclass(frozen=True)
class CommitRecord:
    sha: str
    author_login: str | None
    author_date: datetime
    message: str
    file_changes: tuple[FileChange, ...] = ()
    # None means "not recorded": the commit's parent is the previous commit in date order.
    parents: tuple[str, ...] | None = None

    def __post_init__(self):
        if not SHA_RE.match(self.sha):
            raise RecordError(f"commit sha must be 40 lowercase hex characters, got {self.sha!r}")

    def to_dict(self) -> dict:
        d = {
            "sha": self.sha,
            "author_login": self.author_login,
            "author_date": format_ts(self.author_date),
            "message": self.message,
            "file_changes": [f.to_dict() for f in self.file_changes],
        }
        if self.parents is not None:
            d["parents"] = list(self.parents)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CommitRecord":
        login = d.get("author_login")
        if login is not None:
            login = str(login).strip().lstrip("@") or None
        parents = d.get("parents")
        return cls(
            sha=str(d["sha"]).lower(),
            author_login=login,
            author_date=parse_ts(d["author_date"]),
            message=d.get("message") or "",
            file_changes=tuple(FileChange.from_dict(f) for f in d.get("file_changes") or ()),
            parents=None if parents is None else tuple(p.lower() for p in parents),
        )


@dataclass(frozen=True)
class DeveloperRecord:
    login: str
    github_created_at: datetime

    def to_dict(self) -> dict:
        return {"login": self.login, "github_created_at": format_ts(self.github_created_at)}

    @classmethod
    def from_dict(cls, d: dict) -> "DeveloperRecord":
        return cls(str(d["login"]).strip().lstrip("@"), parse_ts(d["github_created_at"]))


@dataclass
class ProjectData:
    """Everything ingested for one project, as read back from the store."""

    project: ProjectId
    threads: list[ThreadRecord] = field(default_factory=list)
    commits: list[CommitRecord] = field(default_factory=list)
    developers: list[DeveloperRecord] = field(default_factory=list)

    def developer_index(self) -> dict[str, DeveloperRecord]:
        return {norm_login(d.login): d for d in self.developers}

    def thread_index(self) -> dict[int, ThreadRecord]:
        return {t.number: t for t in self.threads}

    def commit_index(self) -> dict[str, CommitRecord]:
        return {c.sha: c for c in self.commits}

    def time_bounds(self) -> tuple[datetime, datetime] | None:
        """Earliest and latest activity timestamp (thread events, creations, commits)."""
        stamps = [c.author_date for c in self.commits]
        for t in self.threads:
            stamps.append(t.created_at)
            stamps.extend(e.timestamp for e in t.events)
        if not stamps:
            return None
        return min(stamps), max(stamps)
