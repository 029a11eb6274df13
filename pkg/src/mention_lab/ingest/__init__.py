"""Acquire project data (live API or JSONL fixtures) into the canonical store."""

from __future__ import annotations

from pathlib import Path

from mention_lab.ingest.github_api import GitHubClient, PartialCrawlError, RateLimitError, RetriableError, crawl_project
from mention_lab.ingest.records import (
    CommentEvent,
    CommitRecord,
    DeveloperRecord,
    FileChange,
    Hunk,
    ProjectData,
    ProjectId,
    RecordError,
    ThreadRecord,
    norm_login,
)
from mention_lab.ingest.store import (
    MalformedRecordError,
    StoreError,
    list_projects,
    load_project,
    read_jsonl,
    read_manifest,
    write_project,
)
from mention_lab.ingest.validate import ValidationReport, validate_store

__all__ = [
    "CommentEvent", "CommitRecord", "DeveloperRecord", "FileChange", "Hunk", "ProjectData",
    "ProjectId", "RecordError", "ThreadRecord", "norm_login", "MalformedRecordError", "StoreError",
    "ValidationReport", "validate_store", "ingest_project", "load_fixture", "load_project",
    "list_projects", "read_manifest", "write_project", "GitHubClient", "RetriableError",
    "RateLimitError", "PartialCrawlError",
]


def load_fixture(fixture_dir, project: ProjectId) -> ProjectData:
    """Read ``threads.jsonl``, ``commits.jsonl`` and (optional) ``developers.jsonl``."""
    fdir = Path(fixture_dir)
    threads_path = fdir / "threads.jsonl"
    if not threads_path.is_file():
        raise StoreError(f"fixture directory {fdir} has no threads.jsonl")
    threads = read_jsonl(threads_path, lambda d: ThreadRecord.from_dict(d, project))
    for t in threads:
        if t.project != project:
            raise RecordError(f"{threads_path}: thread #{t.number} belongs to {t.project}, not {project}")
    commits_path = fdir / "commits.jsonl"
    commits = read_jsonl(commits_path, CommitRecord.from_dict) if commits_path.is_file() else []
    dev_path = fdir / "developers.jsonl"
    developers = read_jsonl(dev_path, DeveloperRecord.from_dict) if dev_path.is_file() else []
    return ProjectData(project, threads, commits, developers)


def ingest_project(source: str, project: ProjectId | str, store_dir, *, fixture_dir=None,
                   client: GitHubClient | None = None) -> dict:
    """Ingest one project into ``store_dir`` and return its manifest.

    ``source`` is ``"fixture"`` (reads ``fixture_dir``) or ``"api"``. Re-ingesting
    replaces the project's partitions. An interrupted API crawl writes what it got,
    marks the store incomplete and re-raises.
    """
    project = ProjectId.from_obj(project)
    if source == "fixture":
        if fixture_dir is None:
            raise ValueError("fixture ingestion needs fixture_dir")
        data = load_fixture(fixture_dir, project)
        return write_project(store_dir, data, source="fixture")
    if source == "api":
        if client is None:
            client = GitHubClient(cache_dir=Path(store_dir) / ".crawl" / project.slug)
        try:
            data = crawl_project(client, project)
        except PartialCrawlError as exc:
            write_project(store_dir, exc.data, complete=False, incomplete_reason=str(exc.cause), source="api")
            raise
        return write_project(store_dir, data, source="api")
    raise ValueError(f"unknown source {source!r}; expected 'fixture' or 'api'")
