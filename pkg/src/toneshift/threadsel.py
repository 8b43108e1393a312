"""Selection of the thread segments used for prediction.

For every thread a user started we keep at most one segment: the prefix
ending at the user's last comment before they became active in any other
thread.  Segments must contain a comment from someone else and never have
24h or more between consecutive publications.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, asdict, replace
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import Publication, ThreadTree, comment_sort_key

MAX_GAP_SECONDS = 86_400
SEQ_CAP = 64
DELETED_AUTHOR = "[deleted]"

REJECT_NO_OTHER_COMMENTER = "no_other_commenter"
REJECT_GAP_EXCEEDED = "gap_exceeded"
REJECT_AUTHOR_NEVER_COMMENTS = "author_never_comments"
REJECT_CROSS_THREAD_OVERLAP = "cross_thread_overlap"


@dataclass(frozen=True)
class Message:
    """One publication inside a segment."""

    id: str
    author: str
    created_utc: int
    text: str
    is_post_author: bool
    kind: str = "comment"
    emt: float | None = None  # filled by the scoring stage


@dataclass
class ThreadSegment:
    """The sequence fed to the model plus the held-out target comment."""

    segment_id: str
    subreddit: str
    author: str
    messages: list[Message]
    target: Message
    n: int
    truncated: bool = False

    def validate(self) -> None:
        if not (2 <= len(self.messages) <= SEQ_CAP):
            raise ValueError("segment length out of range")
        first = self.messages[0]
        if first.kind != "post" or first.author != self.author:
            raise ValueError("segment must start with the author's post")
        if self.target.author != self.author or self.target.kind != "comment":
            raise ValueError("target must be an author comment")
        if not any(m.author != self.author for m in self.messages[1:]):
            raise ValueError("segment needs a comment from another user")
        times = [m.created_utc for m in self.messages] + [self.target.created_utc]
        for a, b in zip(times, times[1:]):
            if b - a >= MAX_GAP_SECONDS:
                raise ValueError("gap of 24h or more inside segment")

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ThreadSegment":
        d = json.loads(line)
        d["messages"] = [Message(**m) for m in d["messages"]]
        d["target"] = Message(**d["target"])
        return cls(**d)


def _as_message(pub: Publication, author: str) -> Message:
    return Message(
        id=pub.id,
        author=pub.author,
        created_utc=pub.created_utc,
        text=pub.text,
        is_post_author=pub.author == author,
        kind=pub.kind,
    )


def select_segments(
    user: str,
    threads: list[ThreadTree],
    activity: list[Publication],
    max_gap_seconds: int = MAX_GAP_SECONDS,
) -> tuple[list["ThreadSegment"], Counter]:
    """Extract segments for *user* from the threads they started.

    *activity* must contain every publication by the user across the corpus.
    Returns (segments, rejection counter by reason code).
    """
    rejections: Counter = Counter()
    segments: list[ThreadSegment] = []
    if user == DELETED_AUTHOR:
        # unattributable author: every publication may be a different person
        return segments, rejections

    events = sorted(
        (p for p in activity if p.author == user), key=lambda p: (p.created_utc, p.id)
    )
    for tree in threads:
        if tree.post.author != user:
            continue
        chrono = [tree.post] + tree.comments
        # first activity by the user in any *other* thread after this post
        cut = None
        for ev in events:
            if ev.thread_id != tree.post.id and ev.created_utc > tree.post.created_utc:
                cut = ev.created_utc
                break

        author_comments = [
            c for c in tree.comments if c.author == user and c.kind == "comment"
        ]
        if not author_comments:
            rejections[REJECT_AUTHOR_NEVER_COMMENTS] += 1
            continue
        eligible = [
            c for c in author_comments if cut is None or c.created_utc < cut
        ]
        if not eligible:
            rejections[REJECT_CROSS_THREAD_OVERLAP] += 1
            continue
        target_pub = eligible[-1]

        prefix = [p for p in chrono if comment_sort_key(p) < comment_sort_key(target_pub)]
        if not any(p.author != user for p in prefix[1:]):
            rejections[REJECT_NO_OTHER_COMMENTER] += 1
            continue
        times = [p.created_utc for p in prefix] + [target_pub.created_utc]
        if any(b - a >= max_gap_seconds for a, b in zip(times, times[1:])):
            rejections[REJECT_GAP_EXCEEDED] += 1
            continue

        seg = ThreadSegment(
            segment_id=tree.post.id,
            subreddit=tree.post.subreddit,
            author=user,
            messages=[_as_message(p, user) for p in prefix],
            target=_as_message(target_pub, user),
            n=len(prefix),
        )
        seg = truncate_segment(seg)
        seg.validate()
        segments.append(seg)
    return segments, rejections


def truncate_segment(segment: ThreadSegment) -> ThreadSegment:
    """Keep only the first 64 messages of the sequence; target unchanged."""
    if len(segment.messages) <= SEQ_CAP:
        return segment
    return ThreadSegment(
        segment_id=segment.segment_id,
        subreddit=segment.subreddit,
        author=segment.author,
        messages=segment.messages[:SEQ_CAP],
        target=segment.target,
        n=segment.n,
        truncated=True,
    )


def select_all(
    threads: list[ThreadTree], max_gap_seconds: int = MAX_GAP_SECONDS
) -> tuple[list[ThreadSegment], Counter]:
    """Run selection for every thread-starting user in the corpus."""
    by_author: dict[str, list[Publication]] = defaultdict(list)
    for tree in threads:
        by_author[tree.post.author].append(tree.post)
        for c in tree.comments:
            by_author[c.author].append(c)
    users = sorted({t.post.author for t in threads})
    all_segments: list[ThreadSegment] = []
    rejections: Counter = Counter()
    for user in users:
        user_threads = [t for t in threads if t.post.author == user]
        segs, rej = select_segments(
            user, user_threads, by_author[user], max_gap_seconds
        )
        all_segments.extend(segs)
        rejections.update(rej)
    all_segments.sort(key=lambda s: s.segment_id)
    return all_segments, rejections


def write_segments(segments: Iterable[ThreadSegment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seg in segments:
            fh.write(seg.to_json())
            fh.write("\n")


def read_segments(path: str | Path) -> Iterator[ThreadSegment]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield ThreadSegment.from_json(line)


def with_scores(segment: ThreadSegment, scorer) -> ThreadSegment:
    """Return a copy with every message's emt filled by *scorer(text).compound*."""
    msgs = [replace(m, emt=scorer(m.text).compound) for m in segment.messages]
    tgt = replace(segment.target, emt=scorer(segment.target.text).compound)
    return ThreadSegment(
        segment_id=segment.segment_id,
        subreddit=segment.subreddit,
        author=segment.author,
        messages=msgs,
        target=tgt,
        n=segment.n,
        truncated=segment.truncated,
    )
