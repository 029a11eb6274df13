"""Completeness checks over an ingested project store."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from mention_lab.ingest.records import ProjectId, norm_login
from mention_lab.ingest.store import (
    PARTITIONS,
    StoreError,
    load_project,
    project_dir,
    read_manifest,
    stored_digest,
)

EXPECTED_FIELDS = {
    "threads": ("project", "number", "kind", "created_at", "author", "events"),
    "commits": ("sha", "author_login", "author_date", "message", "file_changes"),
    "developers": ("login", "github_created_at"),
}


@dataclass
class ValidationReport:
    project: ProjectId
    complete: bool
    reasons: list[str] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    missing_fields: dict[str, dict[str, int]] = field(default_factory=dict)
    zero_event_threads: list[int] = field(default_factory=list)
    unattributable_commits: list[str] = field(default_factory=list)
    logins_without_developer_record: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "project": str(self.project),
            "complete": self.complete,
            "reasons": list(self.reasons),
            "counts": dict(self.counts),
            "missing_fields": {k: dict(v) for k, v in self.missing_fields.items()},
            "zero_event_threads": list(self.zero_event_threads),
            "unattributable_commits": list(self.unattributable_commits),
            "logins_without_developer_record": list(self.logins_without_developer_record),
        }


def _missing_field_counts(store_dir, project) -> dict[str, dict[str, int]]:
    out = {}
    pdir = project_dir(store_dir, project)
    for name in PARTITIONS:
        counts = {f: 0 for f in EXPECTED_FIELDS[name]}
        with open(pdir / f"{name}.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                for f in counts:
                    if rec.get(f) is None:
                        counts[f] += 1
        out[name] = {k: v for k, v in counts.items() if v}
    return out


def validate_store(store_dir, project: ProjectId) -> ValidationReport:
    """Inspect a stored project and decide whether it is complete enough to analyse.

    A project is incomplete when it has no threads, when a crawl was interrupted,
    when partitions disagree with the manifest, or when any thread has no events
    (the symptom of a null API response). Commits without a login are reported but
    do not make the project incomplete; they are simply unattributable.
    Raises :class:`StoreError` when the store cannot be read at all.
    """
    manifest = read_manifest(store_dir, project)
    try:
        data = load_project(store_dir, project)
        missing = _missing_field_counts(store_dir, project)
        digest = stored_digest(store_dir, project)
    except OSError as exc:
        raise StoreError(f"unreadable store for {project}: {exc}") from exc

    report = ValidationReport(project=project, complete=True)
    report.counts = {"threads": len(data.threads), "commits": len(data.commits),
                     "developers": len(data.developers)}
    report.missing_fields = missing
    report.zero_event_threads = [t.number for t in data.threads if not t.events]
    report.unattributable_commits = [c.sha for c in data.commits if not c.author_login]

    known = set(data.developer_index())
    seen = {norm_login(c.author_login) for c in data.commits if c.author_login}
    report.logins_without_developer_record = sorted(seen - known)

    if not data.threads:
        report.reasons.append("no threads")
    if not manifest.get("complete", False):
        report.reasons.append(f"crawl incomplete: {manifest.get('incomplete_reason') or 'unknown'}")
    if manifest.get("digest") != digest:
        report.reasons.append("content digest does not match manifest")
    if manifest.get("counts") != report.counts:
        report.reasons.append("record counts do not match manifest")
    if report.zero_event_threads:
        report.reasons.append(f"{len(report.zero_event_threads)} thread(s) with zero events")
    report.complete = not report.reasons
    return report
