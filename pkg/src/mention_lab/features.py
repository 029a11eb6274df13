"""Observation/response time split and the person-project feature table.

Covariates are computed from the observation window only and the response (future
call @-mentions) from the response window only; neither side looks across the split.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields
from datetime import datetime

from mention_lab.focus_metrics import commit_module_matrix, daf, degree_table, social_specialization_table
from mention_lab.ingest import ProjectData, ProjectId, norm_login
from mention_lab.mention_graph import build_graph, classify_thread
from mention_lab.szz import buggy_commit_counts
from mention_lab.timeutil import Window, add_months, format_ts

logger = logging.getLogger(__name__)

RESPONSE_MONTHS = (3, 6, 12)
AGE_SCALE = 1000.0  # github_age_days enters models in thousands of days


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class TimeSplit:
    project: ProjectId
    data_start: datetime
    split: datetime
    data_end: datetime
    response_months: int

    @property
    def observation(self) -> Window:
        return Window(self.data_start, self.split)

    @property
    def response(self) -> Window:
        # closed at data_end, which is the latest timestamp in the project
        return Window(self.split, None)

    def to_dict(self) -> dict:
        return {"project": str(self.project), "data_start": format_ts(self.data_start),
                "split": format_ts(self.split), "data_end": format_ts(self.data_end),
                "response_months": self.response_months}


def make_split(data: ProjectData, response_months: int = 6, min_observation_months: int = 3) -> TimeSplit:
    """Split ``response_months`` calendar months before the last activity."""
    if response_months not in RESPONSE_MONTHS:
        raise ValueError(f"response_months must be one of {RESPONSE_MONTHS}")
    bounds = data.time_bounds()
    if bounds is None:
        raise InsufficientHistory(f"{data.project}: no activity")
    start, end = bounds
    if add_months(start, response_months + min_observation_months) > end:
        raise InsufficientHistory(
            f"{data.project}: history {format_ts(start)}..{format_ts(end)} is shorter than "
            f"{response_months + min_observation_months} months")
    return TimeSplit(data.project, start, add_months(end, -response_months), end, response_months)


@dataclass(frozen=True)
class FeatureRow:
    project: str
    developer: str
    oss_rho: float
    oss_kappa: float
    iss_kappa: float
    log_social_outdegree: float
    log_buggy_commits: float
    daf: float
    top_committer_or_owner: int
    log_commits: float
    log_responsiveness: float
    committer_only: int
    log_total_posts: float
    log_observed_mentions: float
    github_age_days: float
    github_age_days_sq: float
    oss_rho_absent: int
    oss_kappa_absent: int
    iss_kappa_absent: int
    daf_absent: int
    future_mentions: int


FEATURE_FIELDS = tuple(f.name for f in fields(FeatureRow))
_INT_FIELDS = {"top_committer_or_owner", "committer_only", "oss_rho_absent", "oss_kappa_absent",
               "iss_kappa_absent", "daf_absent", "future_mentions"}


def _log1(x: float) -> float:
    return math.log1p(x)


def assemble(data: ProjectData, split: TimeSplit, *, min_participation_months: int = 3,
             participation: str = "any", daf_depth: int = 1, track_renames: bool = True,
             ignore_whitespace: bool = True) -> list[FeatureRow]:
    """One row per developer with a commit in the observation window and a long enough
    participation span.

    ``participation`` picks which activity dates the span: ``"any"`` (commits and posts)
    or ``"commits"``. Undefined specialization scores are imputed to 0 and flagged in the
    matching ``*_absent`` column.
    """
    if participation not in ("any", "commits"):
        raise ValueError("participation must be 'any' or 'commits'")
    obs, resp = split.observation, split.response
    obs_graph = build_graph(data, window=obs, context="window")
    resp_graph = build_graph(data, window=resp, context="window")
    social = social_specialization_table(obs_graph)
    degrees = degree_table(obs_graph, data.threads, obs)
    future = degree_table(resp_graph, data.threads, resp)
    buggy = buggy_commit_counts(data, obs, track_renames=track_renames, ignore_whitespace=ignore_whitespace)
    modules = commit_module_matrix(data.commits, obs, daf_depth)
    accounts = data.developer_index()

    commits: dict[str, int] = {}
    activity: dict[str, list[datetime]] = {}
    posts: dict[str, int] = {}
    for c in data.commits:
        if c.author_login and c.author_date in obs:
            key = norm_login(c.author_login)
            commits[key] = commits.get(key, 0) + 1
            activity.setdefault(key, []).append(c.author_date)
    for t in data.threads:
        for ev in t.events:
            if ev.timestamp in obs:
                key = norm_login(ev.author)
                posts[key] = posts.get(key, 0) + 1
                if participation == "any":
                    activity.setdefault(key, []).append(ev.timestamp)

    top = max(commits.values(), default=0)
    owner = norm_login(data.project.owner)
    rows = []
    for dev in sorted(commits):
        stamps = activity[dev]
        if add_months(min(stamps), min_participation_months) > max(stamps):
            continue
        soc = social.get(dev, {})
        deg = degrees.get(dev, {})
        focus = daf(modules, dev)
        account = accounts.get(dev)
        if account is not None:
            created = account.github_created_at
        else:
            logger.warning("%s: no account record for %s; using first observed activity", data.project, dev)
            created = min(stamps)
        age = max((split.split - created).total_seconds() / 86400.0, 0.0) / AGE_SCALE
        oss_rho, oss_kappa, iss_kappa = soc.get("OSS_rho"), soc.get("OSS_kappa"), soc.get("ISS_kappa")
        rows.append(FeatureRow(
            project=str(data.project),
            developer=dev,
            oss_rho=oss_rho or 0.0,
            oss_kappa=oss_kappa or 0.0,
            iss_kappa=iss_kappa or 0.0,
            log_social_outdegree=_log1(deg.get("social_outdegree", 0)),
            log_buggy_commits=_log1(buggy.get(dev, 0)),
            daf=focus.normalized if focus is not None else 0.0,
            top_committer_or_owner=int(commits[dev] == top or dev == owner),
            log_commits=_log1(commits[dev]),
            log_responsiveness=_log1(deg.get("responsiveness", 0)),
            committer_only=int(posts.get(dev, 0) == 0),
            log_total_posts=_log1(posts.get(dev, 0)),
            log_observed_mentions=_log1(deg.get("observed_call_indegree", 0)),
            github_age_days=age,
            github_age_days_sq=age * age,
            oss_rho_absent=int(oss_rho is None),
            oss_kappa_absent=int(oss_kappa is None),
            iss_kappa_absent=int(iss_kappa is None),
            daf_absent=int(focus is None),
            future_mentions=future.get(dev, {}).get("observed_call_indegree", 0),
        ))
    return rows


def population_stats(projects: list[ProjectData]) -> dict:
    """Mention prevalence and call-response rates over raw threads.

    A call is answered when the called user posts in that thread after the call.
    Rates with no calls to average over are reported as ``None``.
    """
    out = {"projects": len(projects), "issues": 0, "pull_requests": 0,
           "issues_with_mention": 0, "pull_requests_with_mention": 0,
           "mentions_in_issues": 0, "mentions_in_pull_requests": 0,
           "calls": 0, "calls_answered": 0, "calls_to_responders": 0, "calls_answered_by_responders": 0}
    for data in projects:
        called: dict[str, list[bool]] = {}
        for t in data.threads:
            edges = classify_thread(t)
            kind = "issues" if t.kind == "issue" else "pull_requests"
            out[kind] += 1
            out[f"{kind}_with_mention"] += int(bool(edges))
            out[f"mentions_in_{kind}"] += len(edges)
            for e in edges:
                if e.kind != "call":
                    continue
                answered = any(norm_login(ev.author) == e.mentionee and ev.timestamp > e.timestamp
                               for ev in t.events)
                called.setdefault(e.mentionee, []).append(answered)
        for flags in called.values():
            out["calls"] += len(flags)
            out["calls_answered"] += sum(flags)
            if any(flags):
                out["calls_to_responders"] += len(flags)
                out["calls_answered_by_responders"] += sum(flags)

    def ratio(a, b):
        return a / b if b else None

    out["fraction_issues_with_mention"] = ratio(out["issues_with_mention"], out["issues"])
    out["fraction_pull_requests_with_mention"] = ratio(out["pull_requests_with_mention"], out["pull_requests"])
    out["mean_mentions_per_issue"] = ratio(out["mentions_in_issues"], out["issues"])
    out["mean_mentions_per_pull_request"] = ratio(out["mentions_in_pull_requests"], out["pull_requests"])
    out["call_response_rate"] = ratio(out["calls_answered"], out["calls"])
    out["call_response_rate_excluding_never"] = ratio(out["calls_answered_by_responders"],
                                                      out["calls_to_responders"])
    return out


def write_features(rows: list[FeatureRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_FIELDS)
        for r in rows:
            d = asdict(r)
            writer.writerow([_fmt(d[f]) for f in FEATURE_FIELDS])


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_features(path) -> list[FeatureRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in FEATURE_FIELDS if f not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        out = []
        for rec in reader:
            vals = {}
            for f in FEATURE_FIELDS:
                if f in ("project", "developer"):
                    vals[f] = rec[f]
                elif f in _INT_FIELDS:
                    vals[f] = int(rec[f])
                else:
                    vals[f] = float(rec[f])
            out.append(FeatureRow(**vals))
    return out
