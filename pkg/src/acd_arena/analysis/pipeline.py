"""End-to-end reason analysis: corpus -> embeddings -> PCA -> K-Means -> report files."""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .embed import EmbeddingCache, Embedder, HashEmbedder, embed
from .kmeans import kmeans, select_k
from .pca import pca
from .report import ReasonCorpus, cluster_report, load_corpus, write_clusters_csv, write_scatter_csv

log = logging.getLogger(__name__)


def parse_k_range(text: str) -> range:
    """``"2..10"`` (inclusive) or a single integer."""
    lo, sep, hi = text.partition("..")
    try:
        return range(int(lo), int(hi) + 1) if sep else range(int(lo), int(lo) + 1)
    except ValueError:
        raise ValueError(f"bad K range '{text}', expected e.g. 2..10") from None


def analyze_corpus(corpus: ReasonCorpus, out_dir: Union[str, Path], *, embedder: Optional[Embedder] = None,
                   cache: Optional[EmbeddingCache] = None, k_range: Sequence[int] = range(2, 11),
                   seed: int = 0, raw_space: bool = False, components: int = 3,
                   summarize: Optional[Callable] = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    embedder = embedder or HashEmbedder()
    matrix = embed(corpus.texts, embedder, cache)
    n = len(matrix)
    diagnostics: dict = {"source": corpus.source, "records": n, "embedding_width": int(matrix.shape[1]),
                         "space": "raw" if raw_space else f"pca{components}", "seed": seed}
    if n == 0:
        log.warning("no reasons to analyse")
        diagnostics.update(k=0, k_range=list(k_range), inertia={}, silhouette={}, elbow=None)
        write_clusters_csv(out / "clusters.csv", [])
        write_scatter_csv(out / "scatter3d.csv", corpus, np.zeros((0, 3)), np.zeros(0, dtype=int))
        (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2), encoding="utf-8")
        return diagnostics

    proj = pca(matrix, min(max(components, 3), n, matrix.shape[1]))
    space = matrix if raw_space else proj.projected[:, :components]
    ks = [k for k in k_range if 2 <= k <= n - 1]
    if len(ks) < len(list(k_range)):
        log.warning("K range clipped to %s for %d records", ks, n)
    if ks:
        k, diag = select_k(space, ks, seed=seed)
    else:
        k, diag = 1, {"k_range": [], "inertia": {}, "silhouette": {}, "elbow": None, "degenerate": False}
    model = kmeans(space, k, seed=seed, n_init=3)
    summaries = cluster_report(model, corpus, space, summarize)

    diagnostics.update(
        k=k,
        k_range=diag["k_range"],
        inertia={str(key): v for key, v in diag["inertia"].items()},
        silhouette={str(key): v for key, v in diag["silhouette"].items()},
        elbow=diag["elbow"],
        degenerate=diag.get("degenerate", False),
        explained_variance_ratio=[float(v) for v in proj.explained_ratio],
        cluster_sizes=[c.size for c in summaries],
        summaries=any(c.summary for c in summaries),
    )
    write_clusters_csv(out / "clusters.csv", summaries)
    write_scatter_csv(out / "scatter3d.csv", corpus, proj.projected, model.assignments)
    (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2), encoding="utf-8")
    return diagnostics


def make_summarizer(endpoint: str, model: str = "gpt-4o", api_key_env: str = "OPENAI_API_KEY",
                    client=None) -> Callable[[list], str]:
    """Chat-completion callable for :func:`cluster_report`."""
    from ..llm.client import HttpChatBackend

    backend = HttpChatBackend(endpoint, os.environ.get(api_key_env), client)
    return lambda messages: backend.complete(messages, model=model, temperature=0.0, timeout=60.0)


def run_analysis(log_path: Union[str, Path], agent: str, out_dir: Union[str, Path], *,
                 episode: Optional[int] = None, **kwargs) -> dict:
    return analyze_corpus(load_corpus(log_path, agent, episode), out_dir, **kwargs)
