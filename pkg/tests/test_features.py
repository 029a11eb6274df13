import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from mention_lab.features import (
    AGE_SCALE,
    FEATURE_FIELDS,
    InsufficientHistory,
    assemble,
    make_split,
    population_stats,
    read_features,
    write_features,
)
from mention_lab.ingest import (
    CommentEvent,
    CommitRecord,
    DeveloperRecord,
    FileChange,
    Hunk,
    ProjectData,
    ThreadRecord,
    list_projects,
    load_project,
)

from handbuilt import MENTION_STATS, PROJECT, mention_fixture, sha

UTC = timezone.utc


def at(y, m, d=1):
    return datetime(y, m, d, 12, tzinfo=UTC)


def _commit(n, who, when, path="src/x.py"):
    return CommitRecord(sha(n), who, when, f"c{n}", (FileChange(path, (Hunk(1, (), 1, (f"l{n}",)),), status="added"),))


def _thread(n, opener, when, *posts):
    events = [CommentEvent(opener, when, posts[0] if posts else "")]
    for k, (who, body) in enumerate(posts[1:], 1):
        events.append(CommentEvent(who, when + timedelta(hours=k), body))
    return ThreadRecord(PROJECT, n, "issue", when, opener, tuple(events))


def feature_fixture() -> ProjectData:
    """2020-01-01 .. 2021-01-01, split (6 months) at 2020-07-01.

    nine:   9 commits Jan..Jun, never answers; called 3 times after the split
    lead:   2 commits and opens every thread
    talker: 50 comments, no commits
    brief:  commits spread over two weeks only
    """
    commits = [_commit(k, "nine", at(2020, k % 6 + 1, 2 + k)) for k in range(1, 10)]
    commits += [_commit(20, "lead", at(2020, 1, 1)), _commit(21, "lead", at(2020, 6, 1), "docs/y.md")]
    commits += [_commit(30, "brief", at(2020, 3, 1)), _commit(31, "brief", at(2020, 3, 14))]
    threads = [_thread(1, "lead", at(2020, 2, 1), "kickoff", *[("talker", f"note {i}") for i in range(50)])]
    threads += [_thread(n, "lead", at(2020, 8 + n, 1), "@nine please look") for n in (2, 3, 4)]
    threads.append(_thread(5, "lead", at(2021, 1, 1), "closing"))
    devs = [DeveloperRecord("nine", at(2018, 1, 1)), DeveloperRecord("lead", at(2015, 1, 1))]
    return ProjectData(PROJECT, threads, commits, devs)


class TestSplit:
    def test_arithmetic(self):
        data = ProjectData(PROJECT, [], [_commit(1, "a", datetime(2014, 1, 1, tzinfo=UTC)),
                                         _commit(2, "a", datetime(2018, 1, 1, tzinfo=UTC))])
        split = make_split(data, 6)
        assert split.split == datetime(2017, 7, 1, tzinfo=UTC)
        assert make_split(data, 3).split == datetime(2017, 10, 1, tzinfo=UTC)
        assert make_split(data, 12).split == datetime(2017, 1, 1, tzinfo=UTC)

    def test_short_project_excluded(self):
        data = ProjectData(PROJECT, [], [_commit(1, "a", at(2020, 1)), _commit(2, "a", at(2020, 5))])
        with pytest.raises(InsufficientHistory):
            make_split(data, 6)

    def test_bad_response_months(self):
        with pytest.raises(ValueError):
            make_split(feature_fixture(), 5)

    def test_windows_are_disjoint(self):
        split = make_split(feature_fixture())
        assert split.observation.end == split.response.start == split.split


class TestAssemble:
    def rows(self, **kw):
        data = feature_fixture()
        return {r.developer: r for r in assemble(data, make_split(data), **kw)}

    def test_population_filter(self):
        rows = self.rows()
        assert sorted(rows) == ["lead", "nine"]  # talker has no commits, brief is too short

    def test_direct_recount(self):
        r = self.rows()["nine"]
        assert r.log_commits == pytest.approx(math.log(10))
        assert r.log_responsiveness == 0.0
        assert r.future_mentions == 3
        assert r.committer_only == 1 and r.log_total_posts == 0.0
        assert r.top_committer_or_owner == 1
        assert r.oss_rho_absent == 1 and r.oss_rho == 0.0
        age = (datetime(2020, 7, 1, 12, tzinfo=UTC) - at(2018, 1, 1)).days / AGE_SCALE
        assert r.github_age_days == pytest.approx(age, rel=1e-3)
        assert r.github_age_days_sq == pytest.approx(r.github_age_days ** 2)

    def test_lead(self):
        r = self.rows()["lead"]
        assert r.top_committer_or_owner == 0
        assert r.log_total_posts == pytest.approx(math.log(2))
        assert r.future_mentions == 0
        assert r.daf_absent == 0

    def test_commit_only_participation(self):
        rows = self.rows(participation="commits")
        assert "lead" in rows and "nine" in rows
        with pytest.raises(ValueError):
            self.rows(participation="bogus")

    def test_response_events_do_not_touch_covariates(self):
        data = feature_fixture()
        split = make_split(data)
        base = assemble(data, split)
        cut = ProjectData(PROJECT, [t for t in data.threads if t.created_at < split.split],
                          [c for c in data.commits if c.author_date < split.split], data.developers)
        again = assemble(cut, split)
        strip = lambda rows: [{f: getattr(r, f) for f in FEATURE_FIELDS if f != "future_mentions"} for r in rows]
        assert strip(again) == strip(base)


class TestSynthetic:
    def test_values_finite_and_filter_monotone(self, synth_store):
        store, projects, _ = synth_store
        for pid in list_projects(store):
            data = load_project(store, pid)
            six = assemble(data, make_split(data, 6))
            twelve = assemble(data, make_split(data, 12))
            assert six
            assert {r.developer for r in twelve} <= {r.developer for r in six}
            for r in six:
                for f in FEATURE_FIELDS[2:]:
                    assert np.isfinite(getattr(r, f))
                assert r.log_commits > 0
                assert 0 <= r.oss_rho <= 1 and 0 <= r.iss_kappa <= 1 and 0 <= r.daf <= 1

    def test_csv_round_trip(self, synth_store, tmp_path):
        store, _, _ = synth_store
        data = load_project(store, list_projects(store)[0])
        rows = assemble(data, make_split(data))
        write_features(rows, tmp_path / "f.csv")
        assert read_features(tmp_path / "f.csv") == rows

    def test_missing_columns_listed(self, tmp_path):
        (tmp_path / "f.csv").write_text("project,developer\nx,y\n")
        with pytest.raises(ValueError, match="future_mentions"):
            read_features(tmp_path / "f.csv")


class TestPopulationStats:
    def test_hand_counts(self):
        stats = population_stats([mention_fixture()])
        for key, value in MENTION_STATS.items():
            assert stats[key] == value, key
        assert stats["call_response_rate"] == pytest.approx(14 / 17)
        assert stats["call_response_rate_excluding_never"] == pytest.approx(14 / 16)
        assert stats["fraction_issues_with_mention"] == 1.0
        assert stats["mean_mentions_per_pull_request"] == pytest.approx(14 / 3)

    def test_no_mentions(self):
        stats = population_stats([ProjectData(PROJECT, [_thread(1, "a", at(2020, 1), "hello")])])
        assert stats["fraction_issues_with_mention"] == 0.0
        assert stats["call_response_rate"] is None
        assert stats["fraction_pull_requests_with_mention"] is None

    def test_half_answered(self):
        threads = [_thread(1, "a", at(2020, 1), "@b", ("b", "yes")), _thread(2, "a", at(2020, 2), "@c")]
        stats = population_stats([ProjectData(PROJECT, threads)])
        assert stats["calls"] == 2 and stats["call_response_rate"] == 0.5
        assert stats["call_response_rate_excluding_never"] == 1.0
