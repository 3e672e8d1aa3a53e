"""Reason corpus extraction and per-cluster reports."""
from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .kmeans import ClusterModel

log = logging.getLogger(__name__)

SUMMARY_INSTRUCTION = "Summarize the main theme of the following security-related cluster in one sentence"


@dataclass(frozen=True)
class ReasonRecord:
    episode: int
    step: int
    verb: str
    reason: str


@dataclass
class ReasonCorpus:
    records: list
    source: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def texts(self) -> list[str]:
        return [r.reason for r in self.records]


def corpus_from_records(records: Iterable[dict], agent: str, episode: Optional[int] = None,
                        source: str = "") -> ReasonCorpus:
    """Reasons written by ``agent``; the step-0 sample of each episode and blank reasons are dropped."""
    kept = []
    for r in records:
        if r["agent"] != agent or (episode is not None and r["episode"] != episode):
            continue
        if r["step"] == 0 or not str(r.get("reason", "")).strip():
            continue
        kept.append(ReasonRecord(r["episode"], r["step"], r["verb"], r["reason"].strip()))
    return ReasonCorpus(kept, source)


def load_corpus(path: Union[str, Path], agent: str, episode: Optional[int] = None) -> ReasonCorpus:
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return corpus_from_records(rows, agent, episode, source=str(path))


@dataclass
class ClusterSummary:
    cluster: int
    size: int
    top_verbs: list = field(default_factory=list)
    representatives: list = field(default_factory=list)
    summary: Optional[str] = None


def summary_prompt(reasons: Sequence[str]) -> list[dict]:
    body = "\n".join(f"- {r}" for r in reasons)
    return [{"role": "user", "content": f"{SUMMARY_INSTRUCTION}:\n{body}"}]


def cluster_report(model: ClusterModel, corpus: ReasonCorpus, points: np.ndarray,
                   summarize: Optional[Callable[[list[dict]], str]] = None,
                   n_representatives: int = 3, n_verbs: int = 3) -> list[ClusterSummary]:
    """Size, dominant verbs and centroid-nearest reasons per cluster.

    ``points`` must be the matrix the model was fitted on. ``summarize`` takes
    chat messages and returns text; if any call fails, no summaries are kept.
    """
    points = np.asarray(points, dtype=float)
    out = []
    for j in range(model.k):
        idx = np.flatnonzero(model.assignments == j)
        verbs = Counter(corpus.records[i].verb for i in idx)
        dist = ((points[idx] - model.centroids[j]) ** 2).sum(1)
        order = idx[np.lexsort((idx, dist))]
        reps = list(dict.fromkeys(corpus.records[i].reason for i in order))[:n_representatives]
        out.append(ClusterSummary(j, int(len(idx)), sorted(verbs.items(), key=lambda kv: (-kv[1], kv[0]))[:n_verbs],
                                  reps))
    if summarize is not None:
        try:
            for c in out:
                members = [corpus.records[i].reason for i in np.flatnonzero(model.assignments == c.cluster)]
                c.summary = summarize(summary_prompt(members)).strip()
        except Exception as err:  # any transport or parse failure drops all summaries
            log.warning("cluster summarisation failed, emitting report without summaries: %s", err)
            for c in out:
                c.summary = None
    return out


def write_clusters_csv(path: Path, summaries: Sequence[ClusterSummary]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster", "size", "top_verbs", "representative_reasons", "summary"])
        for c in summaries:
            w.writerow([c.cluster, c.size, ";".join(f"{v}:{n}" for v, n in c.top_verbs),
                        " || ".join(c.representatives), c.summary or ""])


def write_scatter_csv(path: Path, corpus: ReasonCorpus, coords: np.ndarray, assignments: np.ndarray) -> None:
    coords = np.asarray(coords, dtype=float)
    if coords.shape[1] < 3:
        coords = np.hstack([coords, np.zeros((len(coords), 3 - coords.shape[1]))])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "step", "verb", "cluster", "pc1", "pc2", "pc3", "reason"])
        for r, xyz, lab in zip(corpus.records, coords, assignments):
            w.writerow([r.episode, r.step, r.verb, int(lab), *(f"{v:.10g}" for v in xyz[:3]), r.reason])
