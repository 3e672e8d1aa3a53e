from .embed import EmbeddingCache, EmbeddingError, HashEmbedder, HttpEmbedder, embed
from .kmeans import ClusterModel, DegenerateDataWarning, elbow, kmeans, select_k, silhouette, silhouette_samples
from .pca import PcaResult, ZeroVarianceWarning, pca
from .pipeline import analyze_corpus, make_summarizer, parse_k_range, run_analysis
from .report import (
    SUMMARY_INSTRUCTION,
    ClusterSummary,
    ReasonCorpus,
    ReasonRecord,
    cluster_report,
    corpus_from_records,
    load_corpus,
)

__all__ = [
    "SUMMARY_INSTRUCTION",
    "ClusterModel",
    "ClusterSummary",
    "DegenerateDataWarning",
    "EmbeddingCache",
    "EmbeddingError",
    "HashEmbedder",
    "HttpEmbedder",
    "PcaResult",
    "ReasonCorpus",
    "ReasonRecord",
    "ZeroVarianceWarning",
    "analyze_corpus",
    "cluster_report",
    "corpus_from_records",
    "elbow",
    "embed",
    "kmeans",
    "load_corpus",
    "make_summarizer",
    "parse_k_range",
    "pca",
    "run_analysis",
    "select_k",
    "silhouette",
    "silhouette_samples",
]
