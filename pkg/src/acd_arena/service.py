"""HTTP front end: background scenario runs, comparison, analysis and mock model endpoints."""
from __future__ import annotations

import threading
import time
import uuid
from pathlib import Path
from typing import Literal, Optional, Union

from fastapi import BackgroundTasks, FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import comm
from .analysis import EmbeddingCache, HashEmbedder, analyze_corpus, load_corpus, make_summarizer, parse_k_range
from .analysis.embed import HttpEmbedder
from .config import ConfigError, parse_config
from .llm.mock import MockLLM
from .runner import compare_runs, run_scenario


class RunRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    seed: Optional[int] = None
    red_variant: Optional[str] = None
    out_dir: Optional[str] = None
    live_llm: bool = False


class RunStatus(BaseModel):
    id: str
    status: Literal["queued", "running", "done", "failed"]
    out_dir: Optional[str] = None
    summary: Optional[dict] = None
    error: Optional[str] = None


class CompareRequest(BaseModel):
    summaries: list[dict]
    out_dir: Optional[str] = None


class CompareResponse(BaseModel):
    rows: list[dict]


class AnalyzeRequest(BaseModel):
    log: str
    agent: str
    out_dir: str
    episode: Optional[int] = None
    k_range: str = "2..10"
    embed_endpoint: Optional[str] = None
    embed_width: int = 3072
    summarize_endpoint: Optional[str] = None
    raw_space: bool = False
    cache_dir: Optional[str] = None
    seed: int = 0


class EncodeRequest(BaseModel):
    self_index: int = Field(ge=0, le=4)
    detections: list[int] = Field(default_factory=list)
    level: str = "none"
    busy: bool = False


class VectorModel(BaseModel):
    vector: str


class ReportModel(BaseModel):
    detections: list[int]
    level: str
    busy: bool


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatRequest(BaseModel):
    model: str = "mock"
    messages: list[ChatMessage]
    temperature: float = 1.0


class EmbeddingRequest(BaseModel):
    model: str = "hash"
    input: Union[str, list[str]]


def create_app(mock: Optional[MockLLM] = None, embed_width: int = 3072) -> FastAPI:
    app = FastAPI(title="acd-arena")
    jobs: dict[str, RunStatus] = {}
    lock = threading.Lock()
    llm = mock or MockLLM()
    embedder = HashEmbedder(embed_width)

    def _run(job_id: str, req: RunRequest) -> None:
        with lock:
            jobs[job_id].status = "running"
        try:
            data = dict(req.config)
            if req.seed is not None:
                data["seed"] = req.seed
            if req.red_variant is not None:
                data["red_variant"] = req.red_variant
            cfg = parse_config(data)
            out = req.out_dir or str(Path(cfg.output_dir) / job_id)
            summary = run_scenario(cfg, out, live_llm=req.live_llm)
            with lock:
                jobs[job_id] = RunStatus(id=job_id, status="done", out_dir=out, summary=summary.to_dict())
        except Exception as err:  # surfaced through GET /runs/{id}
            with lock:
                jobs[job_id] = RunStatus(id=job_id, status="failed", error=str(err))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/runs", response_model=RunStatus, status_code=202)
    def start_run(req: RunRequest, background: BackgroundTasks) -> RunStatus:
        try:
            parse_config({**req.config, **({"red_variant": req.red_variant} if req.red_variant else {})})
        except ConfigError as err:
            raise HTTPException(422, str(err)) from err
        job_id = uuid.uuid4().hex[:12]
        status = RunStatus(id=job_id, status="queued")
        with lock:
            jobs[job_id] = status
        background.add_task(_run, job_id, req)
        return status

    @app.get("/runs/{job_id}", response_model=RunStatus)
    def get_run(job_id: str) -> RunStatus:
        with lock:
            if job_id not in jobs:
                raise HTTPException(404, f"no run '{job_id}'")
            return jobs[job_id]

    @app.post("/compare", response_model=CompareResponse)
    def compare(req: CompareRequest) -> CompareResponse:
        try:
            return CompareResponse(rows=compare_runs(req.summaries, req.out_dir))
        except (ValueError, TypeError, KeyError) as err:
            raise HTTPException(422, str(err)) from err

    @app.post("/analyze")
    def analyze(req: AnalyzeRequest) -> dict:
        try:
            corpus = load_corpus(req.log, req.agent, req.episode)
            emb = HttpEmbedder(req.embed_endpoint, width=req.embed_width) if req.embed_endpoint \
                else HashEmbedder(req.embed_width)
            return analyze_corpus(
                corpus, req.out_dir, embedder=emb,
                cache=EmbeddingCache(req.cache_dir) if req.cache_dir else None,
                k_range=parse_k_range(req.k_range), seed=req.seed, raw_space=req.raw_space,
                summarize=make_summarizer(req.summarize_endpoint) if req.summarize_endpoint else None,
            )
        except (OSError, ValueError) as err:
            raise HTTPException(422, str(err)) from err

    @app.post("/comm/encode", response_model=VectorModel)
    def encode(req: EncodeRequest) -> VectorModel:
        try:
            report = comm.CommReport(frozenset(req.detections), req.level, req.busy)
            return VectorModel(vector=str(comm.encode(report, req.self_index)))
        except comm.ProtocolError as err:
            raise HTTPException(422, str(err)) from err

    @app.post("/comm/decode", response_model=ReportModel)
    def decode(req: VectorModel) -> ReportModel:
        try:
            report = comm.decode(comm.CommVector.parse(req.vector))
        except comm.ProtocolError as err:
            raise HTTPException(422, str(err)) from err
        return ReportModel(detections=sorted(report.detections), level=report.level, busy=report.busy)

    @app.post("/v1/chat/completions")
    def chat(req: ChatRequest) -> dict:
        msgs = [m.model_dump() for m in req.messages]
        try:
            text = llm.complete(msgs, model=req.model, temperature=req.temperature)
        except TimeoutError as err:
            raise HTTPException(504, str(err)) from err
        return {
            "id": f"chatcmpl-{uuid.uuid4().hex[:12]}",
            "object": "chat.completion",
            "created": int(time.time()),
            "model": req.model,
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
        }

    @app.post("/v1/embeddings")
    def embeddings(req: EmbeddingRequest) -> dict:
        texts = [req.input] if isinstance(req.input, str) else req.input
        vectors = embedder.embed_batch(texts)
        return {
            "object": "list",
            "model": req.model,
            "data": [{"object": "embedding", "index": i, "embedding": v.tolist()} for i, v in enumerate(vectors)],
        }

    return app
