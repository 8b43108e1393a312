"""Per-message 768-d text embeddings and their content-addressed cache.

Two providers: a frozen distilled-transformer encoder (first-token pooling
by default) and a deterministic feature-hash provider for desk-scale runs
and tests.  The cache is a single append-only binary file plus a JSON
index sidecar, keyed by (provider_id, text hash).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CacheCorrupt, EncodeFailure, ProviderUnavailable

DIM = 768
_WORD_RE = re.compile(r"[a-z0-9']+")

MODEL_DIR_ENV = "TONESHIFT_MODEL_DIR"


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray  # float32, shape (768,)
    provider_id: str
    text_hash: str

    def __post_init__(self):
        if self.vector.shape != (DIM,):
            raise ValueError(f"embedding must have dimension {DIM}")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("embedding entries must be finite")


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def hash_embed(text: str, seed: int = 0) -> np.ndarray:
    """Seeded feature-hash of word unigrams and bigrams, L2-normalized.

    Empty (or token-free) text maps to the zero vector.
    """
    tokens = _WORD_RE.findall(text.lower())
    vec = np.zeros(DIM, dtype=np.float64)
    grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    salt = str(seed).encode()
    for gram in grams:
        digest = hashlib.blake2b(gram.encode(), key=salt, digest_size=8).digest()
        idx = int.from_bytes(digest[:4], "little") % DIM
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[idx] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec.astype(np.float32)


class HashProvider:
    """Deterministic test-scale embedding provider."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.provider_id = f"hash-768-v1-seed{seed}"

    def embed(self, text: str) -> Embedding:
        return Embedding(
            vector=hash_embed(text, self.seed),
            provider_id=self.provider_id,
            text_hash=text_digest(text),
        )


class TransformerProvider:
    """Frozen distilled-transformer encoder.

    Model assets are loaded from *model_dir* (or $TONESHIFT_MODEL_DIR).
    Pooling is the first-token hidden state of the final layer by default;
    "mean" pools over all token states instead.
    """

    def __init__(self, model_dir: str | None = None, pooling: str = "first"):
        if pooling not in ("first", "mean"):
            raise ValueError("pooling must be 'first' or 'mean'")
        self.pooling = pooling
        self.model_dir = model_dir or os.environ.get(MODEL_DIR_ENV)
        if not self.model_dir or not Path(self.model_dir).is_dir():
            raise ProviderUnavailable(
                f"transformer assets not found; set ${MODEL_DIR_ENV} to the model directory"
            )
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ProviderUnavailable("torch/transformers not installed") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(self.model_dir)
            self._model = AutoModel.from_pretrained(self.model_dir)
        except Exception as exc:
            raise ProviderUnavailable(f"cannot load model from {self.model_dir}") from exc
        self._model.eval()
        self.provider_id = f"transformer-{Path(self.model_dir).name}-{self.pooling}"

    def embed(self, text: str) -> Embedding:
        import torch

        digest = text_digest(text)
        if not text.strip():
            return Embedding(
                vector=np.zeros(DIM, dtype=np.float32),
                provider_id=self.provider_id,
                text_hash=digest,
            )
        try:
            with torch.no_grad():
                enc = self._tokenizer(
                    text, truncation=True, max_length=self._tokenizer.model_max_length,
                    return_tensors="pt",
                )
                hidden = self._model(**enc).last_hidden_state[0]
                vec = hidden[0] if self.pooling == "first" else hidden.mean(dim=0)
        except Exception as exc:
            raise EncodeFailure(f"encoder failed on text hash {digest}") from exc
        return Embedding(
            vector=vec.numpy().astype(np.float32),
            provider_id=self.provider_id,
            text_hash=digest,
        )


def get_provider(name: str, seed: int = 0, model_dir: str | None = None):
    if name == "hash":
        return HashProvider(seed=seed)
    if name == "transformer":
        return TransformerProvider(model_dir=model_dir)
    raise ValueError(f"unknown provider {name!r}")


_RECORD_FMT = f"<32s8s{DIM}f"
_RECORD_SIZE = struct.calcsize(_RECORD_FMT)


def _cache_key(provider_id: str, text_hash: str) -> bytes:
    return hashlib.sha256(f"{provider_id}\x00{text_hash}".encode()).digest()


def _payload_checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


class EmbeddingCache:
    """Append-only fixed-width record store with a JSON offset index.

    Many concurrent readers are fine; writes must come from one process.
    """

    def __init__(self, path: str | Path, read_only: bool = False):
        self.path = Path(path)
        self.index_path = Path(str(path) + ".index.json")
        self.read_only = read_only
        self._index: dict[str, int] = {}
        if self.index_path.exists():
            self._index = json.loads(self.index_path.read_text())
        elif self.path.exists():
            self._rebuild_index()
        if not read_only:
            self.path.touch(exist_ok=True)

    def _rebuild_index(self) -> None:
        self._index = {}
        with open(self.path, "rb") as fh:
            offset = 0
            while True:
                rec = fh.read(_RECORD_SIZE)
                if len(rec) < _RECORD_SIZE:
                    break
                self._index[rec[:32].hex()] = offset
                offset += _RECORD_SIZE

    def _flush_index(self) -> None:
        self.index_path.write_text(json.dumps(self._index))

    def __contains__(self, key: tuple[str, str]) -> bool:
        return _cache_key(*key).hex() in self._index

    def get(self, provider_id: str, text_hash: str) -> np.ndarray | None:
        key = _cache_key(provider_id, text_hash)
        offset = self._index.get(key.hex())
        if offset is None:
            return None
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            rec = fh.read(_RECORD_SIZE)
        if len(rec) < _RECORD_SIZE:
            raise CacheCorrupt("truncated cache record")
        stored_key, checksum = rec[:32], rec[32:40]
        payload = rec[40:]
        if stored_key != key or _payload_checksum(payload) != checksum:
            raise CacheCorrupt(f"checksum mismatch for key {key.hex()}")
        return np.frombuffer(payload, dtype="<f4").copy()

    def put(self, provider_id: str, text_hash: str, vector: np.ndarray) -> None:
        if self.read_only:
            raise PermissionError("cache opened read-only")
        key = _cache_key(provider_id, text_hash)
        if key.hex() in self._index:
            return
        payload = np.asarray(vector, dtype="<f4").tobytes()
        record = key + _payload_checksum(payload) + payload
        with open(self.path, "ab") as fh:
            offset = fh.tell()
            fh.write(record)
        self._index[key.hex()] = offset
        self._flush_index()

    def __len__(self) -> int:
        return len(self._index)


def message_features(
    texts: list[str],
    tones: list[float],
    author_flags: list[bool],
    provider,
    cache: EmbeddingCache | None = None,
) -> np.ndarray:
    """Per-message raw feature rows: 768-d embedding, tone, author flag."""
    if not (len(texts) == len(tones) == len(author_flags)):
        raise ValueError("texts, tones and author flags must align")
    rows = np.zeros((len(texts), DIM + 2))
    for i, text in enumerate(texts):
        if cache is not None:
            emb = get_or_compute(cache, text, provider)
        else:
            emb = provider.embed(text)
        rows[i, :DIM] = emb.vector
        rows[i, DIM] = tones[i]
        rows[i, DIM + 1] = 1.0 if author_flags[i] else 0.0
    return rows


def get_or_compute(cache: EmbeddingCache, text: str, provider) -> Embedding:
    """Cache-first embedding lookup; misses call the provider and store."""
    digest = text_digest(text)
    vec = cache.get(provider.provider_id, digest)
    if vec is not None:
        return Embedding(vector=vec.astype(np.float32), provider_id=provider.provider_id, text_hash=digest)
    emb = provider.embed(text)
    cache.put(provider.provider_id, digest, emb.vector)
    return emb
