"""Deterministic synthetic projects for end-to-end runs and tests.

Each project has committers with a latent activity level that drives how often they
commit, post and get @-mentioned, so the generated covariates carry signal about
future mentions. Commits carry real line content, and some reference issues with a
closing keyword, so the blame replay has something to attribute.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from mention_lab.ingest import (
    CommentEvent,
    CommitRecord,
    DeveloperRecord,
    FileChange,
    Hunk,
    ProjectData,
    ProjectId,
    ThreadRecord,
    ingest_project,
)

DEFAULT_PROJECTS = ("acme/widgets", "acme/gears", "orbit/relay")
START = datetime(2016, 1, 4, tzinfo=timezone.utc)
MODULES = ("core", "api", "docs", "tests", "tools")
PHRASES = ("can you take a look", "this looks related", "thoughts?", "ping", "see the trace above",
           "any update here", "I think this is a regression", "please review")


def _sha(*parts) -> str:
    return hashlib.sha1(":".join(map(str, parts)).encode()).hexdigest()


def generate_project(project: str | ProjectId, seed: int = 0, *, months: int = 24,
                     n_committers: int = 60, n_commenters: int = 25, n_threads: int = 260) -> ProjectData:
    """Build one synthetic project spanning ``months`` months from a fixed start date."""
    project = ProjectId.from_obj(project)
    rng = np.random.default_rng([seed, int(_sha(project)[:8], 16)])
    span_days = months * 30.4
    end_day = span_days - 1

    committers = [f"{project.name[:3]}dev{i:02d}" for i in range(n_committers)]
    commenters = [f"{project.name[:3]}user{i:02d}" for i in range(n_commenters)]
    committers[0] = project.owner  # the owner commits too
    users = committers + commenters
    activity = rng.lognormal(0.0, 0.8, size=len(users))
    activity[len(committers):] *= 0.5
    first = rng.uniform(0, span_days * 0.45, size=len(users))
    last = np.where(rng.random(len(users)) < 0.8, end_day, first + rng.uniform(20, span_days, size=len(users)))
    last = np.minimum(last, end_day)
    silent = rng.random(len(users)) < 0.2  # committers that never post
    silent[len(committers):] = False
    home = rng.integers(0, len(MODULES), size=len(users))

    def when(day: float) -> datetime:
        return START + timedelta(seconds=int(round(day * 86400)))

    def pick(weights_mask, at_day: float, exclude=()) -> int | None:
        w = activity * ((first <= at_day) & (last >= at_day)) * weights_mask
        for k in exclude:
            w[k] = 0.0
        total = w.sum()
        if total <= 0:
            return None
        return int(rng.choice(len(users), p=w / total))

    posters = (~silent).astype(float)
    everyone = np.ones(len(users))

    # threads
    threads = []
    thread_days = np.sort(rng.uniform(0, end_day - 1, size=n_threads))
    for num, day in enumerate(thread_days, start=1):
        author = pick(posters, day)
        if author is None:
            continue
        kind = "pull_request" if rng.random() < 0.35 else "issue"
        t = day
        events = [CommentEvent(users[author], when(t), _body(rng, users, pick, everyone, t, author))]
        for _ in range(int(rng.poisson(2.5))):
            t += float(rng.exponential(2.0)) + 0.01
            if t >= end_day:
                break
            who = pick(posters, t)
            if who is None:
                continue
            events.append(CommentEvent(users[who], when(t), _body(rng, users, pick, everyone, t, who)))
        threads.append(ThreadRecord(project, num, kind, when(day), users[author], tuple(events),
                                    title=f"{kind.replace('_', ' ')} {num}"))

    # commits
    n_commits = rng.poisson(3 + 5 * activity[:n_committers])
    stamps = []
    for i in range(n_committers):
        for _ in range(int(n_commits[i])):
            stamps.append((float(rng.uniform(first[i], last[i])), i))
    stamps.sort()
    files: dict[str, list[str]] = {}
    open_issues = [t for t in threads if t.kind == "issue"]
    fixed: set[int] = set()
    commits = []
    last_sec = -1
    for idx, (day, i) in enumerate(stamps):
        sec = max(int(round(day * 86400)), last_sec + 1)
        last_sec = sec
        date = START + timedelta(seconds=sec)
        module = MODULES[home[i]] if rng.random() < 0.75 else MODULES[int(rng.integers(len(MODULES)))]
        path = f"{module}/file{int(rng.integers(3))}.py"
        message = f"update {path}"
        candidates = [t for t in open_issues if t.created_at < date and t.number not in fixed]
        fixing = path in files and candidates and rng.random() < 0.3
        if fixing:
            issue = candidates[int(rng.integers(len(candidates)))]
            fixed.add(issue.number)
            message = f"Fixes #{issue.number}: correct {module} behaviour"
        change = _edit(rng, files, path, idx, force_modify=bool(fixing))
        commits.append(CommitRecord(_sha(project, idx), users[i], date, message, (change,)))

    # accounts
    developers = []
    for k, login in enumerate(users):
        created = when(first[k]) - timedelta(days=int(rng.integers(30, 3500)))
        developers.append(DeveloperRecord(login, created))
    return ProjectData(project, threads, commits, developers)


def _body(rng, users, pick, everyone, day, author) -> str:
    parts = [PHRASES[int(rng.integers(len(PHRASES)))]]
    for _ in range(int(rng.poisson(0.8))):
        who = pick(everyone, day, exclude=(author,))
        if who is not None:
            parts.append(f"@{users[who]}")
    if rng.random() < 0.05:
        parts.append("`@ignored-in-code`")
    rng.shuffle(parts)
    return " ".join(parts)


def _edit(rng, files, path, idx, force_modify=False) -> FileChange:
    lines = files.get(path)
    if lines is None:
        new = tuple(f"line {idx}.{k}" for k in range(int(rng.integers(3, 8))))
        files[path] = list(new)
        return FileChange(path, (Hunk(1, (), 1, new),), status="added")
    if not force_modify and rng.random() < 0.4:
        new = tuple(f"line {idx}.{k}" for k in range(int(rng.integers(1, 4))))
        start = len(lines) + 1
        files[path] = lines + list(new)
        return FileChange(path, (Hunk(start, (), start, new),))
    lo = int(rng.integers(len(lines)))
    hi = min(len(lines), lo + int(rng.integers(1, 3)))
    old = tuple(lines[lo:hi])
    if rng.random() < 0.1:
        new = tuple("  " + s for s in old)  # whitespace-only reindent
    else:
        new = tuple(f"line {idx}.{k}" for k in range(hi - lo))
    files[path] = lines[:lo] + list(new) + lines[hi:]
    return FileChange(path, (Hunk(lo + 1, old, lo + 1, new),))


def write_fixture_dir(data: ProjectData, directory) -> Path:
    """Write the three fixture JSONL files for one project."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, records in (("threads", data.threads), ("commits", data.commits),
                          ("developers", data.developers)):
        with open(d / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    return d


def build_fixture_store(store_dir, fixture_root, projects=DEFAULT_PROJECTS, seed: int = 0,
                        months: int = 24) -> list[ProjectId]:
    """Generate fixtures under ``fixture_root`` and ingest them into ``store_dir``."""
    out = []
    for name in projects:
        pid = ProjectId.from_obj(name)
        fdir = write_fixture_dir(generate_project(pid, seed, months=months), Path(fixture_root) / pid.slug)
        ingest_project("fixture", pid, store_dir, fixture_dir=fdir)
        out.append(pid)
    return out
