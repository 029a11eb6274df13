import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mention_lab.ingest import CommentEvent, ProjectData, ThreadRecord
from mention_lab.mention_graph import (
    InteractionMatrix,
    build_graph,
    classify_thread,
    extract_mentions,
    interaction_matrix,
)
from mention_lab.timeutil import Window

from handbuilt import (
    MENTION_CALLS,
    MENTION_REPLIES,
    MENTION_TOKENS,
    PROJECT,
    SELF_MENTIONS,
    day,
    mention_fixture,
    naive_mentions,
    oracle_labels,
    random_thread,
)


def _thread(posts, number=1):
    events = tuple(CommentEvent(who, day(k), body) for k, (who, body) in enumerate(posts))
    return ThreadRecord(PROJECT, number, "issue", day(0), posts[0][0], events)


def _labels(edges):
    return [(e.mentioner, e.mentionee, e.kind) for e in edges]


class TestExtractMentions:
    def test_prose_mention(self):
        assert [n for n, _ in extract_mentions("can you take a look @kamipo?")] == ["kamipo"]

    def test_email_is_not_a_mention(self):
        assert extract_mentions("email me at a@b.com") == []

    def test_inline_code_masked(self):
        body = "`@foo` in code, @foo in prose"
        assert extract_mentions(body) == [("foo", body.index("@foo in"))]

    def test_fence_and_quote_masked(self):
        body = "> @quoted\n```\n@fenced\n```\n~~~\n@tilde\n~~~\n@kept"
        assert [n for n, _ in extract_mentions(body)] == ["kept"]

    def test_team_reference_skipped(self):
        assert extract_mentions("ping @acme/core and @solo") == [("solo", 20)]

    def test_byte_offsets(self):
        assert extract_mentions("héllo @x") == [("x", 7)]

    def test_duplicates_kept_in_order(self):
        assert [n for n, _ in extract_mentions("@a @b @a")] == ["a", "b", "a"]

    def test_length_limit(self):
        assert extract_mentions("@" + "a" * 40) == []
        assert [n for n, _ in extract_mentions("@" + "a" * 39)] == ["a" * 39]

    def test_empty_body(self):
        assert extract_mentions("") == []

    def test_fixture_matches_naive_parser(self):
        for t in mention_fixture().threads:
            for e in t.events:
                assert [n.lower() for n, _ in extract_mentions(e.body)] == naive_mentions(e.body)


class TestClassifyThread:
    def test_reply_to_opener(self):
        assert _labels(classify_thread(_thread([("a", "issue"), ("b", "@a thanks")]))) == [("b", "a", "reply")]

    def test_opening_mention_is_call(self):
        assert _labels(classify_thread(_thread([("a", "ping @d")]))) == [("a", "d", "call")]

    def test_call_then_reply(self):
        t = _thread([("a", "open"), ("c", "@d look"), ("d", "here"), ("c", "@d again")])
        assert _labels(classify_thread(t)) == [("c", "d", "call"), ("c", "d", "reply")]

    def test_self_mention_dropped(self):
        assert classify_thread(_thread([("a", "note to @A")])) == []

    def test_same_timestamp_is_not_earlier(self):
        events = (CommentEvent("a", day(0), "open"), CommentEvent("b", day(1), "hi"),
                  CommentEvent("c", day(1), "@b same second"))
        t = ThreadRecord(PROJECT, 1, "issue", day(0), "a", events)
        assert _labels(classify_thread(t)) == [("c", "b", "call")]

    def test_fixture_totals(self):
        edges = [e for t in mention_fixture().threads for e in classify_thread(t)]
        assert len(edges) == MENTION_TOKENS - SELF_MENTIONS
        assert sum(e.kind == "reply" for e in edges) == MENTION_REPLIES
        assert sum(e.kind == "call" for e in edges) == MENTION_CALLS

    def test_fixture_matches_oracle(self):
        for t in mention_fixture().threads:
            got = [(e.event_index, e.mentioner, e.mentionee, e.kind) for e in classify_thread(t)]
            assert got == oracle_labels(t)

    def test_window_context_matches_oracle(self):
        window = Window(day(3.5), day(8.5))
        for t in mention_fixture().threads:
            got = [(e.event_index, e.mentioner, e.mentionee, e.kind) for e in classify_thread(t, window)]
            assert got == oracle_labels(t, window)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_partition_and_oracle_on_random_threads(self, seed):
        t = random_thread(np.random.default_rng(seed))
        edges = classify_thread(t)
        non_self = sum(1 for e in t.events for n in naive_mentions(e.body) if n != e.author.lower())
        assert len(edges) == non_self
        assert [(e.event_index, e.mentioner, e.mentionee, e.kind) for e in edges] == oracle_labels(t)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 8))
    def test_truncation_never_turns_call_into_reply(self, seed, cut):
        t = random_thread(np.random.default_rng(seed))
        cut = min(cut, len(t.events))
        short = ThreadRecord(t.project, t.number, t.kind, t.created_at, t.author, t.events[:cut] or t.events[:1])
        full = {(e.event_index, e.offset): e.kind for e in classify_thread(t)}
        for e in classify_thread(short):
            assert full[(e.event_index, e.offset)] == e.kind


class TestGraph:
    def test_two_calls(self):
        data = ProjectData(PROJECT, [_thread([("a", "@x")], 1), _thread([("b", "@y")], 2)])
        assert len(build_graph(data).of_kind("call")) == 2

    def test_window_excluding_everything(self):
        g = build_graph(mention_fixture(), window=Window(day(100), day(200)))
        assert g.edges == ()

    def test_digest_deterministic(self):
        assert build_graph(mention_fixture()).digest() == build_graph(mention_fixture()).digest()

    def test_ordering(self):
        g = build_graph(mention_fixture())
        keys = [(e.thread, e.timestamp, e.event_index, e.offset) for e in g.edges]
        assert keys == sorted(keys)

    def test_unknown_project_in_store(self, tmp_path):
        with pytest.raises(Exception):
            build_graph(tmp_path, "nobody/nothing")

    def test_full_context_keeps_out_of_window_history(self):
        t = _thread([("a", "open"), ("b", "hi"), ("c", "@b later")])
        data = ProjectData(PROJECT, [t])
        window = Window(day(2), None)
        assert _labels(build_graph(data, window=window).edges) == [("c", "b", "reply")]
        assert _labels(build_graph(data, window=window, context="window").edges) == [("c", "b", "call")]


class TestInteractionMatrix:
    def test_reply_pair(self):
        t = _thread([("a", "open"), ("b", "@a one"), ("b", "@a two")])
        m = interaction_matrix(build_graph(ProjectData(PROJECT, [t])), "reply")
        assert m.cells[m.row_index("b"), m.col_index("a")] == 2

    def test_call_column_sum(self):
        data = ProjectData(PROJECT, [_thread([("c", "@d")], 1), _thread([("e", "@d")], 2)])
        m = interaction_matrix(build_graph(data), "call")
        assert m.cells[:, m.col_index("d")].sum() == 2

    def test_empty_kind(self):
        m = interaction_matrix(build_graph(ProjectData(PROJECT, [_thread([("a", "@x")])])), "reply")
        assert m.cells.shape == (0, 0)

    def test_weights_round_trip(self):
        g = build_graph(mention_fixture())
        for kind in ("reply", "call"):
            m = interaction_matrix(g, kind)
            counts = {(m.rows[i], m.cols[j]): int(m.cells[i, j]) for i, j in zip(*np.nonzero(m.cells))}
            again = InteractionMatrix.from_counts(counts, m.rows, m.cols)
            assert np.array_equal(again.cells, m.cells)
            assert m.total == len(g.of_kind(kind))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            InteractionMatrix(("a",), ("b",), np.array([[-1]]))
