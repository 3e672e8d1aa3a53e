"""Command line: local execution by default, thin HTTP client with --server."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from .config import ConfigError, load_config

log = logging.getLogger("acd_arena")


def _client(server: str):
    import httpx

    return httpx.Client(base_url=server.rstrip("/"), timeout=60.0)


def _emit(data) -> None:
    json.dump(data, sys.stdout, indent=2, default=str)
    sys.stdout.write("\n")


def _remote(server: str, method: str, path: str, body: Optional[dict] = None) -> dict:
    with _client(server) as client:
        resp = client.request(method, path, json=body)
    if resp.status_code >= 400:
        raise RuntimeError(f"{method} {path} -> {resp.status_code}: {resp.text}")
    return resp.json()


def cmd_run(args) -> int:
    config = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("red_variant", args.red), ("episodes", args.episodes),
                                   ("steps", args.steps)) if v is not None}
    if args.server:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        raw.update({k: v for k, v in overrides.items() if k in ("episodes", "steps")})
        job = _remote(args.server, "POST", "/runs", {
            "config": raw, "seed": args.seed, "red_variant": args.red,
            "out_dir": args.out, "live_llm": args.live_llm,
        })
        while job["status"] in ("queued", "running"):
            time.sleep(args.poll)
            job = _remote(args.server, "GET", f"/runs/{job['id']}")
        _emit(job)
        return 0 if job["status"] == "done" else 1

    from .config import parse_config
    from .runner import run_scenario

    config = parse_config({**config.model_dump(), **overrides})
    out = Path(args.out or config.output_dir)
    summary = run_scenario(config, out, live_llm=args.live_llm)
    _emit(summary.to_dict())
    if summary.invalid_actions:
        print(f"warning: {summary.invalid_actions} invalid actions fell back to Sleep", file=sys.stderr)
    log.info("artifacts written to %s", out)
    return 0


def _summary_path(path: str) -> Path:
    # a run directory stands for the summary it contains
    p = Path(path)
    return p / "summary.json" if p.is_dir() else p


def cmd_compare(args) -> int:
    summaries = [json.loads(_summary_path(p).read_text(encoding="utf-8")) for p in args.inputs]
    if args.server:
        rows = _remote(args.server, "POST", "/compare", {"summaries": summaries, "out_dir": args.out})["rows"]
    else:
        from .runner import compare_runs

        rows = compare_runs(summaries, args.out)
    _emit(rows)
    return 0


def cmd_analyze(args) -> int:
    if args.server:
        body = {"log": args.log, "agent": args.agent, "episode": args.episode, "k_range": args.k_range,
                "embed_endpoint": args.embed_endpoint, "embed_width": args.embed_width,
                "summarize_endpoint": args.summarize_endpoint, "raw_space": args.raw_space,
                "cache_dir": args.cache_dir, "out_dir": args.out, "seed": args.seed}
        _emit(_remote(args.server, "POST", "/analyze", body))
        return 0

    from .analysis import EmbeddingCache, HashEmbedder, HttpEmbedder, analyze_corpus, load_corpus, make_summarizer
    from .analysis import parse_k_range

    corpus = load_corpus(args.log, args.agent, args.episode)
    embedder = HttpEmbedder(args.embed_endpoint, width=args.embed_width) if args.embed_endpoint \
        else HashEmbedder(args.embed_width)
    diagnostics = analyze_corpus(
        corpus, args.out, embedder=embedder,
        cache=EmbeddingCache(args.cache_dir) if args.cache_dir else None,
        k_range=parse_k_range(args.k_range), seed=args.seed, raw_space=args.raw_space,
        summarize=make_summarizer(args.summarize_endpoint) if args.summarize_endpoint else None,
    )
    _emit(diagnostics)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(embed_width=args.embed_width), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acd-arena", description="Multi-agent cyber-defence arena")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--red", choices=["default", "aggressive", "stealthy", "impact", "degrade"])
    r.add_argument("--episodes", type=int)
    r.add_argument("--steps", type=int)
    r.add_argument("--out")
    r.add_argument("--live-llm", action="store_true", help="send llm-bound agents to the configured endpoint")
    r.add_argument("--server", help="submit to a running service instead of running locally")
    r.add_argument("--poll", type=float, default=0.5, help=argparse.SUPPRESS)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare run summaries")
    c.add_argument("--inputs", nargs="+", required=True, help="summary.json files or run directories")
    c.add_argument("--out", required=True)
    c.add_argument("--server")
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("analyze", help="cluster an agent's action reasons")
    a.add_argument("--log", required=True)
    a.add_argument("--agent", required=True)
    a.add_argument("--episode", type=int)
    a.add_argument("--k-range", default="2..10")
    emb = a.add_mutually_exclusive_group()
    emb.add_argument("--embed-endpoint")
    emb.add_argument("--mock-embed", action="store_true", help="hash-based embeddings (default)")
    a.add_argument("--embed-width", type=int, default=3072)
    a.add_argument("--summarize-endpoint")
    a.add_argument("--raw-space", action="store_true", help="cluster raw embeddings instead of 3 PCA components")
    a.add_argument("--cache-dir")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    a.add_argument("--server")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("serve", help="start the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--embed-width", type=int, default=3072)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
