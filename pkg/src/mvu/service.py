"""Stateless JSON-over-HTTP facade over the optimizer, factors and simulator.

Every response is an envelope carrying a request id and exactly one of
``payload`` or ``error``; the error object names the offending field path
when there is one.  Handlers share the CLI's parsing and computation code, so
the two surfaces return identical numbers for identical inputs.
"""
from __future__ import annotations

import argparse
import json
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import ConfigError, experiment_config, optimize_document, parse_run_config
from .core import NotPositiveDefiniteError
from .factors import a_factor_curve
from .simulator import run_experiment

STEP_CAP = 200_000


def _request_id(request: Request) -> str:
    return request.headers.get("x-request-id") or uuid.uuid4().hex


def _ok(request: Request, payload) -> JSONResponse:
    return JSONResponse({"request_id": _request_id(request), "payload": payload})


def _error(request: Request, status: int, code: str, message: str,
           path: str | None = None) -> JSONResponse:
    return JSONResponse(
        {
            "request_id": _request_id(request),
            "error": {"code": code, "message": message, "path": path},
        },
        status_code=status,
    )


async def _json_body(request: Request) -> dict:
    raw = await request.body()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"request body is not valid JSON: {exc}") from None


def create_app(allow_cors: bool = False) -> FastAPI:
    app = FastAPI(title="mvu service", docs_url=None, redoc_url=None)
    if allow_cors:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/v1/health")
    async def health():
        return {"status": "ok"}

    @app.post("/v1/optimize")
    async def optimize(request: Request):
        try:
            rc = parse_run_config(await _json_body(request))
            payload = optimize_document(rc)
        except ConfigError as exc:
            return _error(request, 400, "invalid_config", str(exc), exc.path or None)
        except NotPositiveDefiniteError as exc:
            return _error(request, 422, "not_positive_definite", str(exc))
        return _ok(request, payload)

    @app.get("/v1/curves/a-factor")
    async def curves_a_factor(request: Request):
        params = request.query_params

        def number(key: str, default: str | None = None) -> float:
            raw = params.get(key, default)
            if raw is None:
                raise ConfigError(key, "missing required query parameter")
            try:
                return float(raw)
            except ValueError:
                raise ConfigError(key, f"expected a number, got {raw!r}") from None

        try:
            lo = number("min", "0.0")
            hi = number("max")
            points = number("points", "100")
            if points != int(points) or int(points) < 2:
                raise ConfigError("points", "must be an integer of at least 2")
            rows = a_factor_curve(lo, hi, int(points))
        except ConfigError as exc:
            return _error(request, 400, "invalid_range", str(exc), exc.path or None)
        except ValueError as exc:
            return _error(request, 400, "invalid_range", str(exc))
        return _ok(request, [{"sigma": s, "a": a} for s, a in rows])

    @app.post("/v1/experiment")
    async def experiment(request: Request):
        try:
            rc = parse_run_config(await _json_body(request))
            cfg = experiment_config(rc)
        except ConfigError as exc:
            return _error(request, 400, "invalid_config", str(exc), exc.path or None)
        if cfg.steps > STEP_CAP:
            return _error(
                request, 413, "too_many_steps",
                f"steps {cfg.steps} exceeds the synchronous cap of {STEP_CAP}",
                "experiment.steps",
            )
        try:
            report = run_experiment(cfg)
        except NotPositiveDefiniteError as exc:
            return _error(request, 422, "not_positive_definite", str(exc))
        return _ok(request, report.to_document())

    return app


def main(argv=None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(prog="mvu-service")
    parser.add_argument("--bind", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--allow-cors", action="store_true", dest="allow_cors")
    args = parser.parse_args(argv)
    uvicorn.run(create_app(allow_cors=args.allow_cors), host=args.bind, port=args.port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
