"""Synthetic data generators for smoke tests and the recoverable-signal
experiment.

Two generators: raw dump lines that exercise the full ingest path, and
pre-scored segments whose target is a known function of the message tones
so a sequence model has something real to learn.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .threadsel import Message, ThreadSegment

_VOCAB = (
    "today felt heavy but talking here helps a bit more than expected "
    "thank you all for listening i am trying to keep going one day at a time "
    "sleep was rough again and work keeps piling up still hanging on "
    "this community means a lot really appreciate every reply"
).split()

SUBREDDITS = ("ANX", "BIP", "DEP", "SUI")


def _words(rng: np.random.Generator, lo: int = 4, hi: int = 18) -> str:
    n = int(rng.integers(lo, hi))
    return " ".join(rng.choice(_VOCAB, size=n))


def synthetic_dump_lines(
    n_threads: int = 50, seed: int = 0, subreddit: str = "DEP"
) -> list[str]:
    """Raw forum-dump JSON lines for *n_threads* complete threads.

    Each thread survives segment selection: the opening author gets at
    least one reply from someone else and comments again shortly after,
    with no cross-thread activity and no long gaps.
    """
    rng = np.random.default_rng(seed)
    lines = []
    base = 1_500_000_000
    for i in range(n_threads):
        author = f"user{i:03d}"
        tid = f"syn{i:05d}"
        t0 = base + i * 1_000_000
        lines.append(json.dumps({
            "id": tid, "author": author, "created_utc": t0,
            "subreddit": subreddit, "title": _words(rng, 3, 8),
            "selftext": _words(rng, 10, 30),
        }))
        n_replies = int(rng.integers(1, 4))
        t = t0
        last_id = tid
        for j in range(n_replies):
            t += int(rng.integers(300, 3600))
            cid = f"{tid}c{j}"
            lines.append(json.dumps({
                "id": cid, "author": f"helper{int(rng.integers(0, 20)):02d}",
                "created_utc": t, "subreddit": subreddit,
                "body": _words(rng), "parent_id": f"t3_{last_id}",
                "link_id": f"t3_{tid}",
            }))
        t += int(rng.integers(300, 3600))
        lines.append(json.dumps({
            "id": f"{tid}ca", "author": author, "created_utc": t,
            "subreddit": subreddit, "body": _words(rng),
            "parent_id": f"t1_{tid}c0", "link_id": f"t3_{tid}",
        }))
    return lines


def write_synthetic_dump(
    path: str | Path, n_threads: int = 50, seed: int = 0, subreddit: str = "DEP"
) -> None:
    Path(path).write_text("\n".join(synthetic_dump_lines(n_threads, seed, subreddit)) + "\n")


def _clipped_tone(rng: np.random.Generator) -> float:
    return float(np.clip(rng.normal(0.0, 0.45), -1.0, 1.0))


def synthetic_segments(
    n: int = 4000, seed: int = 0, subreddits=SUBREDDITS
) -> list[ThreadSegment]:
    """Pre-scored segments with a recoverable target signal.

    The target tone is 0.6 x (last message tone) + 0.4 x (mean tone) plus
    an order-dependent term, 0.15 x (last tone minus first tone), clamped
    to [-1, 1].  Neither the mean-tone nor the last-tone heuristic can
    capture all three terms, while a sequence model can.
    """
    rng = np.random.default_rng(seed)
    segments = []
    base = 1_600_000_000
    for i in range(n):
        author = f"author{i:05d}"
        length = int(rng.integers(3, 9))
        tones = [_clipped_tone(rng) for _ in range(length)]
        msgs = []
        t = base + i * 1_000_000
        for j in range(length):
            is_author = j == 0 or (j > 1 and rng.random() < 0.25)
            msgs.append(Message(
                id=f"s{i:05d}m{j}",
                author=author if is_author else f"other{j}",
                created_utc=t + j * 600,
                text=_words(rng),
                is_post_author=is_author,
                kind="post" if j == 0 else "comment",
                emt=tones[j],
            ))
        y = 0.6 * tones[-1] + 0.4 * float(np.mean(tones)) + 0.15 * (tones[-1] - tones[0])
        y = float(np.clip(y, -1.0, 1.0))
        target = Message(
            id=f"s{i:05d}t",
            author=author,
            created_utc=t + length * 600,
            text=_words(rng),
            is_post_author=True,
            kind="comment",
            emt=y,
        )
        segments.append(ThreadSegment(
            segment_id=f"s{i:05d}",
            subreddit=subreddits[i % len(subreddits)],
            author=author,
            messages=msgs,
            target=target,
            n=length,
        ))
    return segments
