import json
import logging

import pytest
import requests

from mention_lab.ingest import (
    CommentEvent,
    CommitRecord,
    GitHubClient,
    PartialCrawlError,
    ProjectData,
    ProjectId,
    RateLimitError,
    RecordError,
    RetriableError,
    ThreadRecord,
    ingest_project,
    load_project,
    read_manifest,
    validate_store,
    write_project,
)
from mention_lab.ingest.diffparse import parse_patch
from mention_lab.ingest.store import MalformedRecordError, StoreError
from mention_lab.synth import write_fixture_dir

from handbuilt import PROJECT, day, sha, szz_fixture


def _small_fixture(tmp_path):
    threads = [
        ThreadRecord(PROJECT, 1, "issue", day(0), "ann", (CommentEvent("ann", day(0), "hi @bo"),)),
        ThreadRecord(PROJECT, 2, "pull_request", day(1), "bo", (CommentEvent("bo", day(1), "pr"),)),
    ]
    commits = [CommitRecord(sha(k), "ann", day(k), f"c{k}") for k in (1, 2, 3)]
    return write_fixture_dir(ProjectData(PROJECT, threads, commits, []), tmp_path / "fx")


class TestRecords:
    def test_project_id_parsing(self):
        assert ProjectId.parse("octo/repo") == ProjectId("octo", "repo")
        with pytest.raises(RecordError):
            ProjectId.parse("no-slash")
        with pytest.raises(RecordError):
            ProjectId("", "x")

    def test_comment_before_thread_creation_names_thread(self):
        with pytest.raises(RecordError, match="#7"):
            ThreadRecord(PROJECT, 7, "issue", day(2), "ann", (CommentEvent("ann", day(1), "early"),))

    def test_events_must_be_sorted(self):
        evs = (CommentEvent("a", day(2), ""), CommentEvent("b", day(1), ""))
        with pytest.raises(RecordError, match="sorted"):
            ThreadRecord(PROJECT, 1, "issue", day(0), "a", evs)

    def test_bad_sha_rejected(self):
        with pytest.raises(RecordError):
            CommitRecord("xyz", "ann", day(0), "m")

    def test_round_trip(self):
        data = szz_fixture()
        for c in data.commits:
            assert CommitRecord.from_dict(c.to_dict()) == c
        for t in data.threads:
            assert ThreadRecord.from_dict(t.to_dict()) == t


class TestStore:
    def test_counts_and_idempotence(self, tmp_path):
        fx = _small_fixture(tmp_path)
        m1 = ingest_project("fixture", PROJECT, tmp_path / "store", fixture_dir=fx)
        assert m1["counts"]["threads"] == 2
        assert m1["counts"]["commits"] == 3
        m2 = ingest_project("fixture", PROJECT, tmp_path / "store", fixture_dir=fx)
        assert m1["digest"] == m2["digest"]
        assert len(load_project(tmp_path / "store", PROJECT).threads) == 2

    def test_malformed_line_names_file_and_line(self, tmp_path):
        fx = _small_fixture(tmp_path)
        with open(fx / "commits.jsonl", "a", encoding="utf-8") as fh:
            fh.write("{not json\n")
        with pytest.raises(MalformedRecordError) as info:
            ingest_project("fixture", PROJECT, tmp_path / "store", fixture_dir=fx)
        assert info.value.line == 4
        assert info.value.path.endswith("commits.jsonl")

    def test_comment_timestamp_violation_rejected(self, tmp_path):
        fx = _small_fixture(tmp_path)
        lines = (fx / "threads.jsonl").read_text().splitlines()
        rec = json.loads(lines[0])
        rec["events"][0]["timestamp"] = "2019-01-01T00:00:00Z"
        lines[0] = json.dumps(rec)
        (fx / "threads.jsonl").write_text("\n".join(lines) + "\n")
        with pytest.raises(RecordError, match="#1"):
            ingest_project("fixture", PROJECT, tmp_path / "store", fixture_dir=fx)

    def test_unknown_project_is_store_error(self, tmp_path):
        with pytest.raises(StoreError):
            read_manifest(tmp_path, PROJECT)


class TestValidation:
    def test_complete_fixture(self, tmp_path):
        write_project(tmp_path, szz_fixture())
        report = validate_store(tmp_path, PROJECT)
        assert report.complete
        assert report.unattributable_commits == []

    def test_missing_author_login_reported(self, tmp_path):
        data = szz_fixture()
        c = data.commits[0]
        data.commits[0] = CommitRecord(c.sha, None, c.author_date, c.message, c.file_changes)
        write_project(tmp_path, data)
        report = validate_store(tmp_path, PROJECT)
        assert report.unattributable_commits == [c.sha]
        assert report.missing_fields["commits"] == {"author_login": 1}
        assert report.complete

    def test_empty_project_incomplete(self, tmp_path):
        write_project(tmp_path, ProjectData(PROJECT))
        report = validate_store(tmp_path, PROJECT)
        assert not report.complete
        assert "no threads" in report.reasons

    def test_zero_event_thread_incomplete(self, tmp_path):
        data = szz_fixture()
        data.threads.append(ThreadRecord(PROJECT, 9, "issue", day(3), "ann", ()))
        write_project(tmp_path, data)
        report = validate_store(tmp_path, PROJECT)
        assert report.zero_event_threads == [9]
        assert not report.complete

    def test_tampered_partition_detected(self, tmp_path):
        write_project(tmp_path, szz_fixture())
        path = tmp_path / PROJECT.slug / "developers.jsonl"
        path.write_text(path.read_text().splitlines()[0] + "\n")
        report = validate_store(tmp_path, PROJECT)
        assert not report.complete

    def test_partial_crawl_flagged(self, tmp_path):
        write_project(tmp_path, szz_fixture(), complete=False, incomplete_reason="rate limited")
        report = validate_store(tmp_path, PROJECT)
        assert not report.complete
        assert any("rate limited" in r for r in report.reasons)


class TestDiffParse:
    def test_modification_and_insertion(self):
        patch = "@@ -1,3 +1,4 @@\n a\n-b\n+B\n c\n+d\n"
        hunks = parse_patch(patch)
        assert [(h.old_start, h.old_lines, h.new_lines) for h in hunks] == [
            (2, ("b",), ("B",)), (4, (), ("d",))]

    def test_new_file(self):
        (h,) = parse_patch("@@ -0,0 +1,2 @@\n+x\n+y\n")
        assert h.old_start == 1 and h.old_lines == () and h.new_lines == ("x", "y")


class FakeResponse:
    def __init__(self, status, body=None, headers=None, next_url=None):
        self.status_code = status
        self._body = body
        self.headers = headers or {}
        self.links = {"next": {"url": next_url}} if next_url else {}

    def json(self):
        return self._body

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(f"{self.status_code}")


class FakeSession:
    def __init__(self, routes):
        self.routes = {k: list(v) for k, v in routes.items()}
        self.calls = []

    def get(self, url, headers=None, timeout=None):
        self.calls.append((url, headers))
        queue = self.routes.get(url)
        if not queue:
            return FakeResponse(404)
        return queue.pop(0) if len(queue) > 1 else queue[0]


class TestGitHubClient:
    def test_retry_after_honoured(self):
        waits = []
        session = FakeSession({"u": [FakeResponse(429, headers={"Retry-After": "7"}), FakeResponse(200, [1])]})
        client = GitHubClient("t", session=session, sleep=waits.append)
        assert client.get("u") == ([1], None)
        assert waits == [7.0]

    def test_rate_limit_reset_header(self):
        waits = []
        headers = {"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": "1030"}
        session = FakeSession({"u": [FakeResponse(403, headers=headers), FakeResponse(200, [])]})
        client = GitHubClient("t", session=session, sleep=waits.append, clock=lambda: 1000.0)
        client.get("u")
        assert waits == [30.0]

    def test_exhausted_retries_raise_retriable(self):
        headers = {"Retry-After": "5"}
        session = FakeSession({"u": [FakeResponse(429, headers=headers)]})
        client = GitHubClient("t", session=session, sleep=lambda s: None, max_retries=2)
        with pytest.raises(RateLimitError) as info:
            client.get("u")
        assert info.value.retry_after == 5.0
        assert isinstance(info.value, RetriableError)

    def test_server_error_backoff_is_exponential(self):
        waits = []
        session = FakeSession({"u": [FakeResponse(502), FakeResponse(502), FakeResponse(200, [])]})
        GitHubClient("t", session=session, sleep=waits.append).get("u")
        assert waits == [1.0, 2.0]

    def test_pagination_and_cache(self, tmp_path):
        session = FakeSession({"p1": [FakeResponse(200, [1, 2], next_url="p2")], "p2": [FakeResponse(200, [3])]})
        client = GitHubClient("t", session=session, cache_dir=tmp_path)
        assert client.get_all("p1") == [1, 2, 3]
        fresh = GitHubClient("t", session=FakeSession({}), cache_dir=tmp_path)
        assert fresh.get_all("p1") == [1, 2, 3]  # served from the crawl cache

    def test_token_never_logged(self, caplog, monkeypatch):
        monkeypatch.setenv("MENTION_LAB_TOKEN", "s3cret-token")
        session = FakeSession({"u": [FakeResponse(500), FakeResponse(200, [])]})
        client = GitHubClient(session=session, sleep=lambda s: None)
        with caplog.at_level(logging.DEBUG):
            client.get("u")
        assert session.calls[0][1]["Authorization"] == "Bearer s3cret-token"
        assert "s3cret-token" not in caplog.text
        assert "s3cret-token" not in repr(client.__dict__.get("session"))

    def test_partial_crawl_marks_store_incomplete(self, tmp_path):
        base = "https://api.github.com/repos/demo/repo"
        issue = {"number": 1, "user": {"login": "ann"}, "created_at": "2020-01-01T00:00:00Z",
                 "body": "hello", "comments": 0, "title": "t"}
        session = FakeSession({
            f"{base}/issues?state=all&per_page=100&sort=created&direction=asc": [FakeResponse(200, [issue])],
            f"{base}/commits?per_page=100": [FakeResponse(429, headers={"Retry-After": "1"})],
        })
        client = GitHubClient("t", session=session, sleep=lambda s: None, max_retries=1)
        with pytest.raises(PartialCrawlError):
            ingest_project("api", PROJECT, tmp_path, client=client)
        report = validate_store(tmp_path, PROJECT)
        assert not report.complete
        assert report.counts["threads"] == 1
