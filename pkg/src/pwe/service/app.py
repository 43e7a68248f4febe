from __future__ import annotations

from fastapi import FastAPI

from .core import PdpService
from .models import Health, PdpRequest, PdpResponse


def create_app(service: PdpService) -> FastAPI:
    app = FastAPI(title="pwe-pdp", version="0.1.0")

    @app.get("/health", response_model=Health)
    def health() -> Health:
        return Health(tiles=len(service.graph.tiles), users=sorted(service.graph.users))

    @app.post("/pdp", response_model=PdpResponse, response_model_exclude_none=True)
    def pdp(req: PdpRequest) -> PdpResponse:
        return service.handle(req)

    return app
