"""GitHub REST crawler producing :class:`ProjectData`.

Every successful response is cached under a crawl directory, so an interrupted
crawl resumes from where it stopped instead of re-fetching pages.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from pathlib import Path

import requests

from mention_lab.ingest.diffparse import parse_patch
from mention_lab.ingest.records import (
    CommentEvent,
    CommitRecord,
    DeveloperRecord,
    FileChange,
    ProjectData,
    ProjectId,
    ThreadRecord,
    norm_login,
)
from mention_lab.timeutil import parse_ts

logger = logging.getLogger(__name__)

API_URL = "https://api.github.com"
TOKEN_ENV = "MENTION_LAB_TOKEN"


class RetriableError(Exception):
    """Transient failure (network, rate limit, 5xx); safe to retry after ``retry_after`` seconds."""

    def __init__(self, message: str, retry_after: float = 60.0):
        super().__init__(message)
        self.retry_after = retry_after


class RateLimitError(RetriableError):
    pass


class PartialCrawlError(Exception):
    """Raised after writing whatever was fetched; the store is marked incomplete."""

    def __init__(self, message: str, data: ProjectData, cause: Exception):
        super().__init__(message)
        self.data = data
        self.cause = cause


class GitHubClient:
    def __init__(self, token: str | None = None, *, session=None, cache_dir=None,
                 max_retries: int = 5, max_wait: float = 900.0, sleep=time.sleep, clock=time.time):
        self._token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.session = session or requests.Session()
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_retries = max_retries
        self.max_wait = max_wait
        self._sleep = sleep
        self._clock = clock

    def _headers(self) -> dict:
        headers = {"Accept": "application/vnd.github+json"}
        if self._token:
            headers["Authorization"] = f"Bearer {self._token}"
        return headers

    def _cache_path(self, url: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / (hashlib.sha256(url.encode()).hexdigest() + ".json")

    def _wait_for(self, response, attempt: int) -> float:
        retry_after = response.headers.get("Retry-After")
        if retry_after is not None:
            return float(retry_after)
        if response.headers.get("X-RateLimit-Remaining") == "0":
            reset = float(response.headers.get("X-RateLimit-Reset", "0"))
            return max(reset - self._clock(), 1.0)
        return float(2 ** attempt)

    def get(self, url: str):
        """GET ``url`` and return ``(json_body, next_url)``. Honors rate-limit reset headers."""
        cached = self._cache_path(url)
        if cached is not None and cached.exists():
            entry = json.loads(cached.read_text(encoding="utf-8"))
            return entry["body"], entry["next"]
        last_wait = 1.0
        for attempt in range(self.max_retries + 1):
            try:
                resp = self.session.get(url, headers=self._headers(), timeout=30)
            except requests.RequestException as exc:
                last_wait = float(2 ** attempt)
                logger.warning("network error fetching %s (attempt %d): %s", url, attempt + 1, exc)
                if attempt == self.max_retries:
                    raise RetriableError(f"network failure for {url}: {exc}", last_wait) from exc
                self._sleep(last_wait)
                continue
            status = resp.status_code
            if status == 200:
                body = resp.json()
                nxt = resp.links.get("next", {}).get("url") if hasattr(resp, "links") else None
                if cached is not None:
                    cached.parent.mkdir(parents=True, exist_ok=True)
                    cached.write_text(json.dumps({"url": url, "body": body, "next": nxt}), encoding="utf-8")
                return body, nxt
            limited = status in (403, 429) and (
                resp.headers.get("X-RateLimit-Remaining") == "0" or "Retry-After" in resp.headers)
            if limited or status >= 500:
                last_wait = self._wait_for(resp, attempt)
                if attempt == self.max_retries or last_wait > self.max_wait:
                    cls = RateLimitError if limited else RetriableError
                    raise cls(f"GitHub returned {status} for {url}", last_wait)
                logger.warning("GitHub %d for %s; waiting %.0fs", status, url, last_wait)
                self._sleep(last_wait)
                continue
            resp.raise_for_status()
            raise RetriableError(f"unexpected status {status} for {url}", last_wait)
        raise RetriableError(f"retries exhausted for {url}", last_wait)

    def get_all(self, url: str) -> list:
        out = []
        while url:
            body, url = self.get(url)
            out.extend(body)
        return out


def _comment_events(items) -> list[CommentEvent]:
    events = []
    for c in items:
        user = (c.get("user") or {}).get("login")
        if not user:
            continue
        events.append(CommentEvent(user, parse_ts(c["created_at"]), c.get("body") or ""))
    return events


def _file_change(f: dict) -> FileChange:
    status = {"removed": "deleted"}.get(f.get("status", "modified"), f.get("status", "modified"))
    if status not in ("added", "modified", "deleted", "renamed"):
        status = "modified"
    hunks = tuple(parse_patch(f["patch"])) if f.get("patch") else ()
    return FileChange(path=f["filename"], hunks=hunks, old_path=f.get("previous_filename"), status=status)


def crawl_project(client: GitHubClient, project: ProjectId) -> ProjectData:
    """Fetch threads (issues and PRs with comments), commits with diffs, and account ages.

    On failure partway through, raises :class:`PartialCrawlError` carrying what was fetched.
    """
    base = f"{API_URL}/repos/{project.owner}/{project.name}"
    data = ProjectData(project)
    try:
        issues = client.get_all(f"{base}/issues?state=all&per_page=100&sort=created&direction=asc")
        for issue in issues:
            number = int(issue["number"])
            author = (issue.get("user") or {}).get("login") or "ghost"
            created = parse_ts(issue["created_at"])
            opening = CommentEvent(author, created, issue.get("body") or "")
            comments = []
            if issue.get("comments"):
                comments = _comment_events(client.get_all(f"{base}/issues/{number}/comments?per_page=100"))
            kind = "pull_request" if "pull_request" in issue else "issue"
            merge_commits: tuple[str, ...] = ()
            if kind == "pull_request":
                comments += _comment_events(client.get_all(f"{base}/pulls/{number}/comments?per_page=100"))
                pr, _ = client.get(f"{base}/pulls/{number}")
                if pr.get("merged_at") and pr.get("merge_commit_sha"):
                    merge_commits = (pr["merge_commit_sha"],)
            comments.sort(key=lambda e: e.timestamp)
            data.threads.append(ThreadRecord(project, number, kind, created, author,
                                             (opening, *comments), issue.get("title") or "", merge_commits))
        for item in client.get_all(f"{base}/commits?per_page=100"):
            detail, _ = client.get(f"{base}/commits/{item['sha']}")
            commit = detail.get("commit") or {}
            data.commits.append(CommitRecord(
                sha=detail["sha"],
                author_login=(detail.get("author") or {}).get("login"),
                author_date=parse_ts(commit["author"]["date"]),
                message=commit.get("message") or "",
                file_changes=tuple(_file_change(f) for f in detail.get("files") or ()),
                parents=tuple(p["sha"] for p in detail.get("parents") or ()),
            ))
        logins = {t.author for t in data.threads}
        logins |= {e.author for t in data.threads for e in t.events}
        logins |= {c.author_login for c in data.commits if c.author_login}
        for login in sorted(logins, key=norm_login):
            user, _ = client.get(f"{API_URL}/users/{login}")
            if user.get("created_at"):
                data.developers.append(DeveloperRecord(login, parse_ts(user["created_at"])))
    except (RetriableError, requests.HTTPError) as exc:
        raise PartialCrawlError(f"crawl of {project} interrupted: {exc}", data, exc) from exc
    return data
