import logging

import sentry_sdk
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.routing import APIRoute

from mmsvm.api.main import api_router
from mmsvm.core.config import settings
from mmsvm.core.errors import MMSVMError

logging.basicConfig(level=settings.LOG_LEVEL)
logger = logging.getLogger(__name__)


def custom_generate_unique_id(route: APIRoute) -> str:
    return f"{route.tags[0]}-{route.name}"


def status_for(error: MMSVMError) -> int:
    return 400 if error.exit_code in (2, 3) else 422


if settings.sentry_enabled:
    sentry_sdk.init(dsn=str(settings.SENTRY_DSN), enable_tracing=True)

app = FastAPI(
    title=settings.PROJECT_NAME,
    openapi_url=f"{settings.API_V1_STR}/openapi.json",
    generate_unique_id_function=custom_generate_unique_id,
)


@app.exception_handler(MMSVMError)
async def mmsvm_error_handler(_: Request, exc: MMSVMError) -> JSONResponse:
    logger.warning(f"{type(exc).__name__}: {exc}")
    return JSONResponse(
        status_code=status_for(exc),
        content={"detail": str(exc), "error": type(exc).__name__},
    )


app.include_router(api_router, prefix=settings.API_V1_STR)
