"""Forum-dump parsing, thread reconstruction and the canonical corpus file.

The canonical corpus is newline-delimited JSON, one publication per line,
sorted by (thread_id, created_utc, id).  A sidecar manifest records counts
and source checksums so re-ingestion can be skipped when nothing changed.
"""

from __future__ import annotations

import bz2
import glob as globlib
import gzip
import hashlib
import json
import lzma
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Iterator

from .errors import MalformedRecord, MissingField

DELETED_BODIES = ("[deleted]", "[removed]")


@dataclass(frozen=True)
class Publication:
    """One post or comment as stored in the canonical corpus."""

    id: str
    thread_id: str
    author: str
    created_utc: int
    text: str
    subreddit: str
    kind: str  # "post" | "comment"
    parent_id: str | None = None

    def __post_init__(self):
        if self.kind not in ("post", "comment"):
            raise ValueError(f"bad kind {self.kind!r}")
        if self.kind == "post" and (self.parent_id is not None or self.id != self.thread_id):
            raise ValueError("post must have no parent and id == thread_id")
        if self.kind == "comment" and self.parent_id is None:
            raise ValueError("comment requires parent_id")
        if self.created_utc <= 0:
            raise ValueError("created_utc must be positive")

    def to_json(self) -> str:
        d = asdict(self)
        if d["parent_id"] is None:
            del d["parent_id"]
        return json.dumps(d, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Publication":
        return cls(**json.loads(line))


@dataclass
class ThreadTree:
    """A post and its comments, sorted by (created_utc, id)."""

    post: Publication
    comments: list[Publication]


def _strip_prefix(fullname: str) -> str:
    # pushshift fullnames carry a "t1_"/"t3_" type prefix
    if len(fullname) > 3 and fullname[0] == "t" and fullname[2] == "_":
        return fullname[3:]
    return fullname


def parse_record(line: str) -> Publication:
    """Parse one raw dump line (pushshift schema) into a Publication.

    Posts carry (title, selftext); comments carry (body, parent_id, link_id).
    Deleted bodies are preserved verbatim.
    """
    try:
        raw = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedRecord(f"unparseable line: {line[:80]!r}") from exc
    if not isinstance(raw, dict):
        raise MalformedRecord("record is not an object")

    for key in ("id", "author", "created_utc", "subreddit"):
        if key not in raw:
            raise MissingField(key)
    try:
        created = int(raw["created_utc"])
    except (ValueError, TypeError) as exc:
        raise MalformedRecord("created_utc is not an integer") from exc

    pid = _strip_prefix(str(raw["id"]))
    if "title" in raw:
        text = str(raw["title"]) + "\n" + str(raw.get("selftext", ""))
        return Publication(
            id=pid,
            thread_id=pid,
            author=str(raw["author"]),
            created_utc=created,
            text=text,
            subreddit=str(raw["subreddit"]),
            kind="post",
        )
    if "body" in raw:
        for key in ("parent_id", "link_id"):
            if key not in raw:
                raise MissingField(key)
        return Publication(
            id=pid,
            thread_id=_strip_prefix(str(raw["link_id"])),
            author=str(raw["author"]),
            created_utc=created,
            text=str(raw["body"]),
            subreddit=str(raw["subreddit"]),
            kind="comment",
            parent_id=_strip_prefix(str(raw["parent_id"])),
        )
    raise MissingField("title or body")


def comment_sort_key(p: Publication) -> tuple[int, str]:
    return (p.created_utc, p.id)


def build_threads(pubs: Iterable[Publication]) -> tuple[list[ThreadTree], int]:
    """Group publications into ThreadTrees.

    Comments whose thread_id matches no post are dropped; their count is
    returned alongside the trees.  Output is deterministic for any input
    order: trees sorted by post id, comments by (created_utc, id).
    """
    posts: dict[str, Publication] = {}
    comments: dict[str, list[Publication]] = defaultdict(list)
    orphan_count = 0
    for p in pubs:
        if p.kind == "post":
            posts[p.id] = p
        else:
            comments[p.thread_id].append(p)
    trees = []
    for pid in sorted(posts):
        cs = sorted(comments.get(pid, []), key=comment_sort_key)
        trees.append(ThreadTree(post=posts[pid], comments=cs))
    for tid, cs in comments.items():
        if tid not in posts:
            orphan_count += len(cs)
    return trees, orphan_count


def open_dump(path: str | Path):
    """Open a dump file, decompressing by extension (.gz, .bz2, .xz)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8", errors="replace")
    if suffix == ".bz2":
        return bz2.open(path, "rt", encoding="utf-8", errors="replace")
    if suffix == ".xz":
        return lzma.open(path, "rt", encoding="utf-8", errors="replace")
    if suffix == ".zst":
        raise MalformedRecord(
            "zstd-compressed dumps need the 'zstandard' package, which is not installed; "
            "decompress the file first"
        )
    return open(path, "r", encoding="utf-8", errors="replace")


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def ingest(
    input_glob: str,
    out_path: str | Path,
    subreddit: str | None = None,
) -> dict:
    """Parse dump files matching *input_glob* into a canonical corpus file.

    Returns the manifest dict (also written next to the corpus file).
    """
    sources = sorted(globlib.glob(input_glob))
    pubs: dict[str, Publication] = {}
    parsed = bad = 0
    comment_records = 0
    for src in sources:
        with open_dump(src) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    pub = parse_record(line)
                except (MalformedRecord, MissingField):
                    bad += 1
                    continue
                if subreddit is not None and pub.subreddit != subreddit:
                    continue
                parsed += 1
                if pub.kind == "comment":
                    comment_records += 1
                pubs[pub.id] = pub  # last occurrence wins on duplicate ids
    write_corpus(pubs.values(), out_path)
    trees, orphan_count = build_threads(pubs.values())
    manifest = {
        "records_parsed": parsed,
        "records_bad": bad,
        "publications": len(pubs),
        "threads": len(trees),
        "comment_records": comment_records,
        "orphan_count": orphan_count,
        "sources": {src: file_sha256(src) for src in sources},
    }
    manifest_path = Path(str(out_path) + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def write_corpus(pubs: Iterable[Publication], out_path: str | Path) -> None:
    ordered = sorted(pubs, key=lambda p: (p.thread_id, p.created_utc, p.id))
    with open(out_path, "w", encoding="utf-8") as fh:
        for p in ordered:
            fh.write(p.to_json())
            fh.write("\n")


def read_corpus(path: str | Path) -> Iterator[Publication]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield Publication.from_json(line)


def _median_max(values: list) -> tuple:
    return (statistics.median(values), max(values)) if values else (0, 0)


def descriptive_stats(pubs: Iterable[Publication]) -> dict[str, dict]:
    """Per-subreddit counts and medians/maxima of activity measures."""
    by_sub: dict[str, list[Publication]] = defaultdict(list)
    for p in pubs:
        by_sub[p.subreddit].append(p)
    if not by_sub:
        raise ValueError("corpus is empty")

    table = {}
    for sub in sorted(by_sub):
        items = by_sub[sub]
        posts = [p for p in items if p.kind == "post"]
        comments = [p for p in items if p.kind == "comment"]
        posts_per_user = Counter(p.author for p in posts)
        comments_per_user = Counter(c.author for c in comments)
        comments_per_thread = Counter(c.thread_id for c in comments)
        med_cthread, max_cthread = _median_max(
            [comments_per_thread.get(p.id, 0) for p in posts]
        )
        med_ppu, max_ppu = _median_max(list(posts_per_user.values()))
        med_cpc, max_cpc = _median_max(list(comments_per_user.values()))
        med_plen, max_plen = _median_max([len(p.text) for p in posts])
        med_clen, max_clen = _median_max([len(c.text) for c in comments])
        table[sub] = {
            "threads": len(posts),
            "comments": len(comments),
            "unique_users": len({p.author for p in items}),
            "posting_users": len(posts_per_user),
            "commenters": len(comments_per_user),
            "posts_per_poster": {"median": med_ppu, "max": max_ppu},
            "comments_per_commenter": {"median": med_cpc, "max": max_cpc},
            "comments_in_thread": {"median": med_cthread, "max": max_cthread},
            "post_length": {"median": med_plen, "max": max_plen},
            "comment_length": {"median": med_clen, "max": max_clen},
        }
    return table
