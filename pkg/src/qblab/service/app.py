"""FastAPI wrapper around the pipeline operations.

One endpoint per operation.  Library errors map onto a small, typed
error body: usage and data problems come back as 400 with a ``kind``
discriminator the CLI turns into its exit code, numeric blowups as 500.
Request validation failures keep FastAPI's standard 422 shape.
"""

from __future__ import annotations

import math

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..errors import QblabError
from . import schemas

_KINDS = {1: "usage", 2: "data", 3: "numeric"}


def create_app() -> FastAPI:
    app = FastAPI(title="qblab", version=__version__)

    @app.exception_handler(QblabError)
    async def _qblab_error(request, exc: QblabError):
        kind = _KINDS.get(exc.exit_code, "numeric")
        status = 500 if kind == "numeric" else 400
        return JSONResponse(status_code=status, content={"kind": kind, "detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        return pipeline.op_simulate(
            input_path=req.input_path,
            out_path=req.out_path,
            pattern=req.pattern,
            noise_db=req.noise_db,
            read_sigma=req.read_sigma,
            shot_scale=req.shot_scale,
            seed=req.seed,
        )

    @app.post("/remosaic", response_model=schemas.RemosaicResponse)
    def remosaic(req: schemas.RemosaicRequest):
        return pipeline.op_remosaic(
            input_path=req.input_path,
            out_path=req.out_path,
            method=req.method,
            checkpoint=req.checkpoint,
        )

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        return pipeline.op_train(
            corpus_dir=req.corpus_dir,
            out_path=req.out_path,
            steps=req.steps,
            config=req.config,
            hard_manifest=req.hard_manifest,
            seed=req.seed,
        )

    @app.post("/mine", response_model=schemas.MineResponse)
    def mine(req: schemas.MineRequest):
        return pipeline.op_mine(
            pairs_dir=req.pairs_dir,
            out_path=req.out_path,
            k=req.k,
            patch=req.patch,
        )

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest):
        body = pipeline.op_evaluate(
            pred_dir=req.pred_dir,
            gt_dir=req.gt_dir,
            out_path=req.out_path,
            domain=req.domain,
        )
        # JSON cannot carry inf; None stands for an exact match here and
        # the CSV report keeps the literal 'inf'
        if not math.isfinite(body["mean_psnr"]):
            body["mean_psnr"] = None
        return body

    @app.post("/analyze-fsm", response_model=schemas.FsmResponse)
    def analyze_fsm(req: schemas.FsmRequest):
        return pipeline.op_analyze_fsm(pattern=req.pattern, triple=req.triple)

    return app
