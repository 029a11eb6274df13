"""On-disk canonical store: one directory per project holding JSONL partitions and a manifest.

Layout::

    STORE/owner__name/threads.jsonl
    STORE/owner__name/commits.jsonl
    STORE/owner__name/developers.jsonl
    STORE/owner__name/manifest.json

Writes are canonical (sorted records, sorted keys, fixed separators), so the same
input always produces byte-identical files and the same digest.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from mention_lab.ingest.records import (
    CommitRecord,
    DeveloperRecord,
    ProjectData,
    ProjectId,
    RecordError,
    ThreadRecord,
    norm_login,
)

PARTITIONS = ("threads", "commits", "developers")
MANIFEST = "manifest.json"


class StoreError(Exception):
    """The store is missing, unreadable, or corrupt."""


class MalformedRecordError(RecordError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonicalize(data: ProjectData) -> ProjectData:
    """Sort records into canonical order and enforce uniqueness invariants."""
    threads = sorted(data.threads, key=lambda t: t.number)
    for a, b in zip(threads, threads[1:]):
        if a.number == b.number:
            raise RecordError(f"duplicate thread number #{a.number} in {data.project}")
    commits = sorted(data.commits, key=lambda c: (c.author_date, c.sha))
    for a, b in zip(commits, commits[1:]):
        if a.sha == b.sha:
            raise RecordError(f"duplicate commit sha {a.sha} in {data.project}")
    developers = sorted(data.developers, key=lambda d: norm_login(d.login))
    for a, b in zip(developers, developers[1:]):
        if norm_login(a.login) == norm_login(b.login):
            raise RecordError(f"duplicate developer record {a.login!r}")
    for t in threads:
        if t.project != data.project:
            raise RecordError(f"thread #{t.number} belongs to {t.project}, not {data.project}")
    _check_developer_ages(threads, commits, developers)
    return ProjectData(data.project, threads, commits, developers)


def _check_developer_ages(threads, commits, developers):
    first_seen: dict[str, object] = {}

    def see(login, ts):
        if not login:
            return
        key = norm_login(login)
        if key not in first_seen or ts < first_seen[key]:
            first_seen[key] = ts

    for c in commits:
        see(c.author_login, c.author_date)
    for t in threads:
        see(t.author, t.created_at)
        for e in t.events:
            see(e.author, e.timestamp)
    for d in developers:
        seen = first_seen.get(norm_login(d.login))
        if seen is not None and d.github_created_at > seen:
            raise RecordError(f"developer {d.login!r}: GitHub account created after first observed activity")


def project_dir(store_dir, project: ProjectId) -> Path:
    return Path(store_dir) / project.slug


def _partition_lines(data: ProjectData) -> dict[str, list[str]]:
    return {
        "threads": [_dumps(t.to_dict()) for t in data.threads],
        "commits": [_dumps(c.to_dict()) for c in data.commits],
        "developers": [_dumps(d.to_dict()) for d in data.developers],
    }


def _digest(blobs: dict[str, bytes]) -> str:
    h = hashlib.sha256()
    for name in PARTITIONS:
        h.update(name.encode())
        h.update(b"\0")
        h.update(blobs[name])
        h.update(b"\0")
    return h.hexdigest()


def write_project(store_dir, data: ProjectData, *, complete: bool = True,
                  incomplete_reason: str | None = None, source: str = "fixture") -> dict:
    """Replace the project's partitions with ``data`` (canonicalized). Returns the manifest."""
    data = canonicalize(data)
    pdir = project_dir(store_dir, data.project)
    pdir.mkdir(parents=True, exist_ok=True)
    blobs = {}
    for name, lines in _partition_lines(data).items():
        blobs[name] = "".join(line + "\n" for line in lines).encode("utf-8")
    for name, blob in blobs.items():
        tmp = pdir / f".{name}.jsonl.tmp"
        tmp.write_bytes(blob)
        os.replace(tmp, pdir / f"{name}.jsonl")
    manifest = {
        "project": str(data.project),
        "counts": {"threads": len(data.threads), "commits": len(data.commits),
                   "developers": len(data.developers)},
        "digest": _digest(blobs),
        "complete": bool(complete),
        "incomplete_reason": incomplete_reason,
        "source": source,
    }
    (pdir / MANIFEST).write_text(_dumps(manifest) + "\n", encoding="utf-8")
    return manifest


def read_manifest(store_dir, project: ProjectId) -> dict:
    path = project_dir(store_dir, project) / MANIFEST
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StoreError(f"no store for {project} under {store_dir}") from None
    except (OSError, ValueError) as exc:
        raise StoreError(f"unreadable manifest {path}: {exc}") from exc


def read_jsonl(path: Path, parse):
    """Parse each nonblank line with ``parse``; errors name the file and 1-based line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedRecordError(path, lineno, str(exc)) from exc
    return out


def load_project(store_dir, project: ProjectId) -> ProjectData:
    pdir = project_dir(store_dir, project)
    if not pdir.is_dir():
        raise StoreError(f"unknown project {project} (no directory {pdir})")
    try:
        threads = read_jsonl(pdir / "threads.jsonl", lambda d: ThreadRecord.from_dict(d, project))
        commits = read_jsonl(pdir / "commits.jsonl", CommitRecord.from_dict)
        developers = read_jsonl(pdir / "developers.jsonl", DeveloperRecord.from_dict)
    except FileNotFoundError as exc:
        raise StoreError(f"store for {project} is missing a partition: {exc.filename}") from exc
    return ProjectData(project, threads, commits, developers)


def stored_digest(store_dir, project: ProjectId) -> str:
    """Recompute the content digest from the partition files on disk."""
    pdir = project_dir(store_dir, project)
    blobs = {}
    for name in PARTITIONS:
        try:
            blobs[name] = (pdir / f"{name}.jsonl").read_bytes()
        except OSError as exc:
            raise StoreError(f"cannot read {name}.jsonl for {project}: {exc}") from exc
    return _digest(blobs)


def list_projects(store_dir) -> list[ProjectId]:
    root = Path(store_dir)
    if not root.is_dir():
        raise StoreError(f"store directory {root} does not exist")
    out = []
    for child in sorted(root.iterdir()):
        if (child / MANIFEST).is_file():
            out.append(ProjectId.parse(json.loads((child / MANIFEST).read_text())["project"]))
    return out
