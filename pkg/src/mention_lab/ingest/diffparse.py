"""Unified-diff patch text to :class:`Hunk` records with parent-side line numbers."""

from __future__ import annotations

import re

from mention_lab.ingest.records import Hunk

_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def parse_patch(patch: str) -> list[Hunk]:
    """Split a patch into contiguous change blocks.

    Context lines separate blocks, so one ``@@`` header can yield several hunks.
    """
    hunks: list[Hunk] = []
    old_no = new_no = 0
    dels: list[str] = []
    adds: list[str] = []
    block_old = block_new = 0
    in_hunk = False

    def flush():
        nonlocal dels, adds
        if dels or adds:
            hunks.append(Hunk(block_old, tuple(dels), block_new, tuple(adds)))
        dels, adds = [], []

    for line in patch.splitlines():
        m = _HEADER.match(line)
        if m:
            flush()
            old_no = int(m.group(1))
            new_no = int(m.group(3))
            # "-0,0" marks a new file; the first parent line would be line 1.
            if m.group(2) == "0" and old_no == 0:
                old_no = 1
            elif m.group(2) == "0":
                old_no += 1
            if m.group(4) == "0" and new_no == 0:
                new_no = 1
            elif m.group(4) == "0":
                new_no += 1
            in_hunk = True
            continue
        if not in_hunk or line.startswith("\\"):
            continue
        tag, text = line[:1], line[1:]
        if tag == "-":
            if not dels and not adds:
                block_old, block_new = old_no, new_no
            dels.append(text)
            old_no += 1
        elif tag == "+":
            if not dels and not adds:
                block_old, block_new = old_no, new_no
            adds.append(text)
            new_no += 1
        else:
            flush()
            old_no += 1
            new_no += 1
    flush()
    return hunks
