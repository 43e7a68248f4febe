from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

Status = Literal["ok", "unknown_user", "invalid_config"]


class PdpRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tx_id: str
    rx_id: str
    overrides: dict[str, str] = Field(default_factory=dict)   # tile_id -> function descriptor or "off"
    rx_position: Optional[tuple[float, float, float]] = None
    request_id: Optional[str] = None


class PdpEntry(BaseModel):
    power_dbm: float
    delay_ns: float
    arrival: tuple[float, float, float]    # unit vector at the receiver, pointing back along the path
    trace: str


class PdpResponse(BaseModel):
    status: Status
    entries: list[PdpEntry] = Field(default_factory=list)
    error: Optional[str] = None
    request_id: Optional[str] = None


class Health(BaseModel):
    status: Literal["ok"] = "ok"
    tiles: int
    users: list[str]
