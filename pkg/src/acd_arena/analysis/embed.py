"""Text embedding: a hashing mock, an HTTP client, and a content-addressed disk cache."""
from __future__ import annotations

import hashlib
import logging
import os
import re
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import httpx
import numpy as np

log = logging.getLogger(__name__)

DEFAULT_WIDTH = 3072
_TOKEN_RE = re.compile(r"[a-z0-9_]+")


class EmbeddingError(RuntimeError):
    pass


class Embedder(Protocol):
    name: str
    width: int

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _digest(text: str) -> bytes:
    return hashlib.sha256(text.encode("utf-8")).digest()


class HashEmbedder:
    """Signed feature hashing of unigrams and bigrams, L2-normalised."""

    def __init__(self, width: int = DEFAULT_WIDTH):
        if width < 1:
            raise ValueError("embedding width must be positive")
        self.width = width
        self.name = f"hash-{width}"

    def vector(self, text: str) -> np.ndarray:
        v = np.zeros(self.width)
        tokens = _TOKEN_RE.findall(text.lower())
        for feat in tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]:
            h = _digest(feat)
            idx = int.from_bytes(h[:8], "little") % self.width
            v[idx] += 1.0 if h[8] & 1 else -1.0
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v

    def embed_batch(self, texts):
        return np.array([self.vector(t) for t in texts]).reshape(len(texts), self.width)


class HttpEmbedder:
    """OpenAI-style ``/embeddings`` client with retry and exponential backoff."""

    def __init__(self, endpoint: str, model: str = "text-embedding-3-large", width: int = DEFAULT_WIDTH,
                 api_key: Optional[str] = None, client: Optional[httpx.Client] = None,
                 max_retries: int = 2, backoff: float = 0.5, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.width = width
        self.name = f"{model}@{endpoint}"
        self.api_key = api_key if api_key is not None else os.environ.get("OPENAI_API_KEY")
        self.client = client or httpx.Client()
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout

    def embed_batch(self, texts):
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.post(self.endpoint, json={"model": self.model, "input": list(texts)},
                                        headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                rows = sorted(resp.json()["data"], key=lambda r: r.get("index", 0))
                out = np.array([r["embedding"] for r in rows], dtype=float)
                if out.shape != (len(texts), self.width):
                    raise ValueError(f"expected {(len(texts), self.width)} embeddings, got {out.shape}")
                return out
            except (httpx.HTTPError, KeyError, ValueError, TypeError) as err:
                last = err
                log.warning("embedding request failed (attempt %d): %s", attempt + 1, err)
        raise EmbeddingError(f"embedding endpoint failed after {self.max_retries + 1} attempts: {last}")


@dataclass
class EmbeddingCache:
    """One ``.npy`` per (embedder, text) hash; writes are atomic renames."""

    root: Path
    hits: int = field(default=0, init=False)
    misses: int = field(default=0, init=False)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(embedder_name: str, text: str) -> str:
        return hashlib.sha256(f"{embedder_name}\x00{text}".encode("utf-8")).hexdigest()

    def get(self, embedder_name: str, text: str) -> Optional[np.ndarray]:
        path = self.root / f"{self.key(embedder_name, text)}.npy"
        if not path.exists():
            self.misses += 1
            return None
        self.hits += 1
        return np.load(path)

    def put(self, embedder_name: str, text: str, vector: np.ndarray) -> None:
        final = self.root / f"{self.key(embedder_name, text)}.npy"
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, np.asarray(vector, dtype=float))
        os.replace(tmp, final)


def embed(texts: Sequence[str], embedder: Embedder, cache: Optional[EmbeddingCache] = None,
          batch_size: int = 64, workers: int = 1) -> np.ndarray:
    """Embed ``texts`` in order; unique uncached texts are requested in batches."""
    texts = list(texts)
    if not texts:
        return np.zeros((0, embedder.width))
    vectors: dict[str, np.ndarray] = {}
    todo = []
    for t in dict.fromkeys(texts):
        hit = cache.get(embedder.name, t) if cache else None
        if hit is not None:
            vectors[t] = hit
        else:
            todo.append(t)
    batches = [todo[i:i + batch_size] for i in range(0, len(todo), batch_size)]

    def run(batch):
        out = embedder.embed_batch(batch)
        if cache:
            for t, v in zip(batch, out):
                cache.put(embedder.name, t, v)
        return batch, out

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(workers) as pool:
            done = list(pool.map(run, batches))
    else:
        done = [run(b) for b in batches]
    for batch, out in done:
        vectors.update(zip(batch, out))
    matrix = np.array([vectors[t] for t in texts], dtype=float)
    if not np.isfinite(matrix).all():
        raise EmbeddingError("embedder returned non-finite values")
    return matrix


def cache_dir_default() -> Path:
    return Path(os.environ.get("ACD_ARENA_CACHE", Path.home() / ".cache" / "acd_arena" / "embeddings"))

