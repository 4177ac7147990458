from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.encoders import jsonable_encoder
from fastapi.middleware.cors import CORSMiddleware
from fastapi.exceptions import RequestValidationError, HTTPException as FastAPIHTTPException

import config
from routers import (
    align,
    dataset,
    ellipses,
    fit,
    iou,
    metrics,
)
from utils.errors import KnotdetError

config.configure_logging()

app = FastAPI(title="Knot Ellipse Detection Toolkit")

app.add_middleware(
    CORSMiddleware,
    allow_origins=config.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Exception handler for Pydantic validation errors
@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    return JSONResponse(
        status_code=422,
        content={
            "status": "error",
            "message": "Validation error",
            "errors": jsonable_errors(exc),
        },
    )

# Exception handler for HTTPException
@app.exception_handler(FastAPIHTTPException)
async def http_exception_handler(request: Request, exc: FastAPIHTTPException):
    if isinstance(exc.detail, dict):
        content = {"status": "error", **exc.detail}
    else:
        content = {"status": "error", "message": exc.detail}
    return JSONResponse(status_code=exc.status_code, content=content)

# Domain errors that escape a router
@app.exception_handler(KnotdetError)
async def domain_exception_handler(request: Request, exc: KnotdetError):
    return JSONResponse(
        status_code=exc.status_code,
        content={"status": "error", **exc.to_detail()},
    )


def jsonable_errors(exc: RequestValidationError) -> list:
    # "ctx" may hold the raw exception object
    return jsonable_encoder([
        {key: value for key, value in error.items() if key != "ctx"}
        for error in exc.errors()
    ])


app.include_router(
    ellipses.router,
    prefix="/api",
    tags=["ellipse"],
)

app.include_router(
    metrics.router,
    prefix="/api",
    tags=["metrics"],
)

app.include_router(
    iou.router,
    prefix="/api",
    tags=["iou"],
)

app.include_router(
    fit.router,
    prefix="/api",
    tags=["fit"],
)

app.include_router(
    align.router,
    prefix="/api",
    tags=["align"],
)

app.include_router(
    dataset.router,
    prefix="/api",
    tags=["dataset"],
)
