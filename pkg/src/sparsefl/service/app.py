"""FastAPI wrapper exposing the codec, optimizer, and experiment runner."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__, budget, codec, experiments, quantizer
from ..config import config_from_dict
from ..errors import ConfigError, DecodeError
from . import schemas


def create_app() -> FastAPI:
    app = FastAPI(title="sparsefl", version=__version__)

    @app.exception_handler(ConfigError)
    async def config_error_handler(request: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"detail": exc.errors})

    @app.exception_handler(DecodeError)
    async def decode_error_handler(request: Request, exc: DecodeError):
        return JSONResponse(
            status_code=422, content={"detail": str(exc), "field": exc.field}
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/codebooks", response_model=schemas.CodebooksResponse)
    def codebooks():
        levels = [
            schemas.CodebookSummaryEntry(
                q_level=q,
                gamma=quantizer.get_quantizer(q).gamma,
                psi=quantizer.get_quantizer(q).psi,
                distortion=quantizer.get_quantizer(q).distortion,
            )
            for q in range(2, quantizer.Q_MAX + 1)
        ]
        return schemas.CodebooksResponse(levels=levels)

    @app.get("/codebooks.csv", response_class=PlainTextResponse)
    def codebooks_csv():
        return quantizer.codebook_csv()

    @app.get("/codebooks/{q_level}", response_model=schemas.CodebookResponse)
    def codebook(q_level: int):
        quant = quantizer.get_quantizer(q_level)
        entries = [
            schemas.CodebookEntry(
                index=i,
                level=float(quant.levels[i]),
                upper_threshold=(
                    float(quant.thresholds[i + 1])
                    if math.isfinite(quant.thresholds[i + 1])
                    else None
                ),
            )
            for i in range(q_level)
        ]
        return schemas.CodebookResponse(
            q_level=q_level,
            gamma=quant.gamma,
            psi=quant.psi,
            distortion=quant.distortion,
            entries=entries,
        )

    @app.post("/codec/compress", response_model=schemas.CompressResponse)
    def compress(req: schemas.CompressRequest):
        params = req.params.to_core()
        update = codec.compress(np.asarray(req.values), params)
        return schemas.CompressResponse(
            payload_hex=update.payload.hex(),
            bit_length=update.bit_length,
            params=schemas.CodecParamsModel.from_core(params),
        )

    @app.post("/codec/reconstruct", response_model=schemas.ReconstructResponse)
    def reconstruct(req: schemas.ReconstructRequest):
        update = _to_update(req)
        return schemas.ReconstructResponse(values=codec.reconstruct(update).tolist())

    @app.post("/codec/inspect", response_model=schemas.InspectResponse)
    def inspect(req: schemas.ReconstructRequest):
        return schemas.InspectResponse(**codec.inspect_payload(_to_update(req)))

    @app.post("/optimizer/choose", response_model=schemas.ChooseResponse)
    def choose(req: schemas.ChooseRequest):
        g = np.asarray(req.values)
        q_set = tuple(req.q_set) if req.q_set else budget.DEFAULT_Q_SET
        if req.exhaustive:
            choice = budget.exhaustive_choose(g, req.capacity_bits, q_set)
        else:
            choice = budget.choose_parameters(g, req.capacity_bits, q_set)
        return schemas.ChooseResponse(**dataclasses.asdict(choice))

    @app.get("/presets", response_model=schemas.PresetsResponse)
    def presets():
        return schemas.PresetsResponse(presets=experiments.preset_names())

    @app.post("/experiments/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest):
        cfg = config_from_dict(req.config)
        result = experiments.run_from_config(cfg, round_limit=req.round_limit)
        return schemas.RunResponse(
            summary=dataclasses.asdict(result.run.summary),
            records_csv=result.records_csv,
            summary_csv=result.summary_csv,
        )

    @app.post("/experiments/ablate", response_model=schemas.AblateResponse)
    def ablate(req: schemas.AblateRequest):
        cfg = config_from_dict(req.config)
        result = experiments.ablate_from_config(
            cfg, req.q_levels, req.kappas, round_limit=req.round_limit
        )
        return schemas.AblateResponse(
            variants=[name for name, _ in result.variants],
            summaries={
                name: dataclasses.asdict(res.run.summary)
                for name, res in result.variants
            },
            combined_csv=result.combined_csv,
        )

    return app


def _to_update(req: schemas.ReconstructRequest) -> codec.CompressedUpdate:
    params = req.params.to_core()
    try:
        payload = bytes.fromhex(req.payload_hex)
    except ValueError as exc:
        raise DecodeError("payload", f"invalid hex: {exc}") from exc
    return codec.CompressedUpdate(
        params=params, payload=payload, bit_length=req.bit_length
    )


app = create_app()
