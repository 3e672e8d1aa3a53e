import csv
import json
import threading
import warnings

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score
from sklearn.metrics import silhouette_score as sk_silhouette

from acd_arena.analysis import (
    SUMMARY_INSTRUCTION,
    DegenerateDataWarning,
    EmbeddingCache,
    EmbeddingError,
    HashEmbedder,
    HttpEmbedder,
    ReasonCorpus,
    ReasonRecord,
    ZeroVarianceWarning,
    analyze_corpus,
    cluster_report,
    corpus_from_records,
    elbow,
    embed,
    kmeans,
    parse_k_range,
    pca,
    select_k,
    silhouette,
)


def blobs(n_per, centres, scale=0.05, seed=0):
    rng = np.random.default_rng(seed)
    centres = np.asarray(centres, dtype=float)
    x = np.vstack([c + scale * rng.standard_normal((n_per, centres.shape[1])) for c in centres])
    y = np.repeat(np.arange(len(centres)), n_per)
    return x, y


# -- PCA ---------------------------------------------------------------------------

def _eigh_subspace(x, k):
    xc = x - x.mean(0)
    cov = xc.T @ xc / (len(x) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    return vals[order][:k], vecs[:, order][:, :k]


def test_planar_data_reconstructs():
    rng = np.random.default_rng(1)
    basis = np.linalg.qr(rng.standard_normal((5, 2)))[0]
    x = rng.standard_normal((40, 2)) @ basis.T + rng.standard_normal(5)
    res = pca(x, 2)
    assert np.max(np.abs(res.reconstruct() - x)) <= 1e-9


def test_isotropic_first_component_ratio():
    d = 5
    x = np.random.default_rng(2).standard_normal((20000, d))
    res = pca(x, 1)
    # leading sample eigenvalue of a 5x5 Wishart at n=20000 exceeds 1/d only by a few percent
    assert res.explained_ratio[0] == pytest.approx(1 / d, abs=0.02)


def test_repeated_row_warns():
    with pytest.warns(ZeroVarianceWarning):
        res = pca(np.tile([1.0, 2.0, 3.0], (6, 1)), 2)
    assert not res.projected.any()


@pytest.mark.parametrize("k", [0, 6])
def test_pca_bad_components(k):
    with pytest.raises(ValueError):
        pca(np.zeros((5, 5)) + np.arange(5), k)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_pca_against_eigh(seed, k):
    x = np.random.default_rng(seed).standard_normal((10, 5))
    res = pca(x, k)
    vals, vecs = _eigh_subspace(x, k)
    assert np.allclose(res.basis.T @ res.basis, np.eye(k), atol=1e-9)
    assert np.allclose(res.explained_variance, vals, atol=1e-6)
    assert np.all(np.diff(res.explained_variance) <= 1e-12)
    assert np.allclose(res.basis @ res.basis.T, vecs @ vecs.T, atol=1e-6)
    assert np.allclose(res.projected, (x - x.mean(0)) @ res.basis, atol=1e-9)


def test_pca_sign_convention():
    x = np.random.default_rng(5).standard_normal((30, 4))
    a, b = pca(x, 3), pca(x[::-1].copy(), 3)
    assert np.allclose(a.basis, b.basis, atol=1e-9)
    assert np.all(a.basis[np.abs(a.basis).argmax(0), range(3)] > 0)


# -- K-Means -------------------------------------------------------------------------

def test_two_points_two_clusters():
    x = np.array([[0.0, 0.0], [3.0, 4.0]])
    m = kmeans(x, 2, seed=0)
    assert sorted(map(tuple, m.centroids)) == [(0.0, 0.0), (3.0, 4.0)]
    assert m.inertia == 0.0


def test_k1_is_mean():
    x = np.random.default_rng(3).standard_normal((50, 3))
    m = kmeans(x, 1)
    assert np.allclose(m.centroids[0], x.mean(0))
    assert m.inertia == pytest.approx(((x - x.mean(0)) ** 2).sum())
    assert m.inertia == pytest.approx(x.var(0).sum() * len(x))


def test_four_blobs_recovered():
    x, y = blobs(60, [[0, 0, 0], [5, 0, 0], [0, 5, 0], [0, 0, 5]], scale=0.4)
    m = kmeans(x, 4, seed=1)
    assert adjusted_rand_score(y, m.assignments) >= 0.99
    # permutation-matched accuracy
    perm = {c: np.bincount(y[m.assignments == c]).argmax() for c in range(4)}
    assert np.mean([perm[c] == t for c, t in zip(m.assignments, y)]) >= 0.99


def test_k_exceeds_rows():
    with pytest.raises(ValueError, match="exceeds"):
        kmeans(np.zeros((3, 2)), 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_kmeans_properties(seed, k):
    x = np.random.default_rng(seed).standard_normal((30, 3))
    m = kmeans(x, k, seed=seed)
    h = m.inertia_history
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(h, h[1:]))
    d = ((x[:, None, :] - m.centroids[None]) ** 2).sum(-1)
    assert np.allclose(d[np.arange(len(x)), m.assignments], d.min(1))
    again = kmeans(x, k, seed=seed)
    assert np.array_equal(m.assignments, again.assignments)
    if m.silhouette is not None:
        assert -1 <= m.silhouette <= 1


def test_empty_cluster_reseeded():
    # duplicated points make k-means++ pick coincident centres
    x = np.vstack([np.zeros((10, 2)), np.ones((1, 2)) * 10])
    m = kmeans(x, 3, seed=0, n_init=1)
    assert len(np.unique(m.assignments)) >= 2


# -- silhouette ----------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 5), st.integers(1, 3))
def test_silhouette_matches_sklearn(seed, k, dim):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((25, dim))
    labels = rng.integers(0, k, 25)
    if len(np.unique(labels)) < 2:
        labels[0], labels[1] = 0, 1
    ours = silhouette(x, labels)
    assert -1 <= ours <= 1
    assert ours == pytest.approx(sk_silhouette(x, labels), abs=1e-9)


def test_silhouette_singletons_match_sklearn():
    x = np.array([[0.0], [0.1], [5.0], [9.0]])
    labels = np.array([0, 0, 1, 2])
    assert silhouette(x, labels) == pytest.approx(sk_silhouette(x, labels), abs=1e-12)


def test_silhouette_duplicate_clusters_is_one():
    x = np.vstack([np.zeros((5, 3)), np.ones((5, 3)) * 4, np.full((5, 3), -4.0)])
    labels = np.repeat([0, 1, 2], 5)
    assert silhouette(x, labels) == pytest.approx(1.0)


def test_silhouette_high_dim_path():
    x, y = blobs(10, np.eye(100)[:3] * 3, scale=0.1)
    assert silhouette(x, y) == pytest.approx(sk_silhouette(x, y), abs=1e-9)


# -- select_k ------------------------------------------------------------------------

def test_select_k_four_blobs():
    x, _ = blobs(50, [[0, 0], [6, 0], [0, 6], [6, 6]], scale=0.5)
    k, diag = select_k(x, range(2, 11), seed=0)
    assert k == 4
    assert set(diag["silhouette"]) == set(range(2, 11))
    assert diag["elbow"] == 4


def test_select_k_two_blobs():
    x, _ = blobs(40, [[0, 0, 0], [8, 8, 8]], scale=0.5)
    assert select_k(x, range(2, 8), seed=0)[0] == 2


def test_select_k_degenerate():
    with pytest.warns(DegenerateDataWarning):
        k, diag = select_k(np.ones((20, 3)), range(2, 5))
    assert k == 1 and diag["degenerate"]


def test_select_k_range_checked():
    x, _ = blobs(3, [[0, 0], [5, 5]])
    with pytest.raises(ValueError):
        select_k(x, range(2, 7))


def test_elbow_and_ties():
    assert elbow([2, 3, 4, 5], [100, 50, 10, 8]) == 4
    assert elbow([2, 3], [1, 0]) is None
    # identical clusters give equal silhouettes at several K only in degenerate setups;
    # the selection key prefers the smaller K on ties
    x = np.vstack([np.zeros((4, 1)), np.ones((4, 1)) * 10])
    k, diag = select_k(x, [2, 3], seed=0)
    assert k == 2


def test_parse_k_range():
    assert list(parse_k_range("2..5")) == [2, 3, 4, 5]
    assert list(parse_k_range("4")) == [4]
    with pytest.raises(ValueError):
        parse_k_range("two..ten")


# -- embeddings --------------------------------------------------------------------

def test_empty_corpus_empty_matrix():
    assert embed([], HashEmbedder(16)).shape == (0, 16)


def test_mock_embedder_width():
    texts = [f"reason number {i}" for i in range(10)]
    m = embed(texts, HashEmbedder(64))
    assert m.shape == (10, 64)
    assert np.allclose(np.linalg.norm(m, axis=1), 1.0)


def test_cache_hits_and_identity(tmp_path):
    cache = EmbeddingCache(tmp_path)
    e = HashEmbedder(32)
    a = embed(["same text", "same text", "other"], e, cache)
    assert np.array_equal(a[0], a[1])
    assert cache.misses == 2
    b = embed(["same text"], e, cache)
    assert cache.hits == 1 and np.array_equal(b[0], a[0])
    assert len(list(tmp_path.glob("*.npy"))) == 2
    assert not list(tmp_path.glob("*.tmp"))


def test_cache_concurrent_writers(tmp_path):
    cache = EmbeddingCache(tmp_path)
    vec = np.arange(8.0)
    threads = [threading.Thread(target=cache.put, args=("e", "t", vec)) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert np.array_equal(cache.get("e", "t"), vec)


def _embedding_server(fail_after=None):
    calls = {"n": 0}

    def handler(req):
        calls["n"] += 1
        if fail_after is not None and calls["n"] > fail_after:
            return httpx.Response(503)
        body = json.loads(req.content)
        vecs = HashEmbedder(8).embed_batch(body["input"])
        return httpx.Response(200, json={"data": [{"index": i, "embedding": v.tolist()} for i, v in enumerate(vecs)]})

    return httpx.Client(transport=httpx.MockTransport(handler)), calls


def test_http_embedder_batches(tmp_path):
    client, calls = _embedding_server()
    emb = HttpEmbedder("http://e/v1/embeddings", width=8, client=client)
    m = embed([f"t{i}" for i in range(10)], emb, EmbeddingCache(tmp_path), batch_size=4)
    assert m.shape == (10, 8) and calls["n"] == 3
    assert np.allclose(m, HashEmbedder(8).embed_batch([f"t{i}" for i in range(10)]))


def test_http_embedder_failure_keeps_partial_cache(tmp_path):
    client, _ = _embedding_server(fail_after=1)
    emb = HttpEmbedder("http://e/v1/embeddings", width=8, client=client, max_retries=1, backoff=0.0)
    cache = EmbeddingCache(tmp_path)
    with pytest.raises(EmbeddingError):
        embed([f"t{i}" for i in range(10)], emb, cache, batch_size=4)
    assert len(list(tmp_path.glob("*.npy"))) == 4


# -- corpus and report ------------------------------------------------------------

def _records():
    rows = []
    for ep in range(2):
        for step in range(6):
            rows.append({"episode": ep, "step": step, "agent": "blue_agent_0",
                         "verb": "DeployDecoy" if step % 2 else "Analyse", "reason": f"r{step}"})
            rows.append({"episode": ep, "step": step, "agent": "blue_agent_1", "verb": "Sleep", "reason": ""})
    return rows


def test_corpus_drops_initial_step():
    c = corpus_from_records(_records(), "blue_agent_0")
    assert len(c) == 10 and all(r.step > 0 for r in c.records)
    assert len(corpus_from_records(_records(), "blue_agent_0", episode=1)) == 5
    assert len(corpus_from_records(_records(), "blue_agent_1")) == 0


def _corpus(verbs_reasons):
    return ReasonCorpus([ReasonRecord(0, i + 1, v, r) for i, (v, r) in enumerate(verbs_reasons)])


def test_report_sizes_verbs_and_representatives():
    corpus = _corpus([("DeployDecoy", "decoy a")] * 3 + [("Remove", "remove b"), ("Analyse", "analyse b")])
    pts = np.array([[0.0], [0.1], [0.2], [5.0], [5.2]])
    model = kmeans(pts, 2, seed=0)
    rep = cluster_report(model, corpus, pts)
    by_size = sorted(rep, key=lambda c: -c.size)
    assert [c.size for c in by_size] == [3, 2]
    assert by_size[0].top_verbs[0] == ("DeployDecoy", 3)
    assert by_size[0].representatives == ["decoy a"]
    assert all(c.summary is None for c in rep)


def test_report_summaries_and_failure():
    corpus = _corpus([("Analyse", "x")] * 2 + [("Remove", "y")] * 2)
    pts = np.array([[0.0], [0.0], [3.0], [3.0]])
    model = kmeans(pts, 2, seed=0)
    prompts = []

    def ok(messages):
        prompts.append(messages[0]["content"])
        return " theme "

    rep = cluster_report(model, corpus, pts, ok)
    assert [c.summary for c in rep] == ["theme", "theme"]
    assert prompts[0].startswith(SUMMARY_INSTRUCTION)

    def boom(messages):
        raise httpx.ConnectError("down")

    assert all(c.summary is None for c in cluster_report(model, corpus, pts, boom))


def test_analyze_corpus_outputs(tmp_path):
    themes = {
        "DeployDecoy": "no suspicious activity so deploy a decoy to lure attackers early",
        "Analyse": "repeated info level connections need analysis of the host",
        "Remove": "user level compromise found so remove malicious processes",
        "BlockTrafficZone": "peer reports admin compromise so block zone traffic",
    }
    rows = [(v, f"{t} variant {i}") for i in range(15) for v, t in themes.items()]
    diag = analyze_corpus(_corpus(rows), tmp_path, embedder=HashEmbedder(256), k_range=range(2, 8))
    assert diag["k"] == 4 and sum(diag["cluster_sizes"]) == 60
    with open(tmp_path / "clusters.csv") as fh:
        clusters = list(csv.DictReader(fh))
    assert sorted(int(c["size"]) for c in clusters) == [15] * 4
    assert all(c["summary"] == "" for c in clusters)
    assert {c["top_verbs"].split(":")[0] for c in clusters} == set(themes)
    with open(tmp_path / "scatter3d.csv") as fh:
        scatter = list(csv.DictReader(fh))
    assert len(scatter) == 60 and set(scatter[0]) >= {"pc1", "pc2", "pc3", "cluster"}
    saved = json.loads((tmp_path / "diagnostics.json").read_text())
    assert saved["k"] == 4 and saved["space"] == "pca3"


def test_analyze_small_and_empty(tmp_path):
    assert analyze_corpus(ReasonCorpus([]), tmp_path / "e")["k"] == 0
    with pytest.warns(ZeroVarianceWarning):
        one = analyze_corpus(_corpus([("Sleep", "only one")]), tmp_path / "o")
    assert one["k"] == 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        same = analyze_corpus(_corpus([("Sleep", "same")] * 6), tmp_path / "s", raw_space=True)
    assert same["k"] == 1 and same["degenerate"]
