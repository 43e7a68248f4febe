"""Request handling shared by every transport; a pure function of snapshot and request."""

from __future__ import annotations

import json

from pydantic import ValidationError

from ..channel import ChannelParams, PDP_COLUMNS, compute_pdp, fmt
from ..csvio import table
from ..errors import InvalidConfiguration, PweError
from ..graph import Configuration, PweGraph, merged_from_descriptor
from .models import PdpEntry, PdpRequest, PdpResponse


class PdpService:
    """Immutable snapshot of a graph and its base configuration."""

    def __init__(self, graph: PweGraph, config: Configuration | None = None,
                 params: ChannelParams = ChannelParams()):
        self._graph = graph
        self._config = config or Configuration()
        self._params = params

    @property
    def graph(self) -> PweGraph:
        return self._graph

    def handle(self, req: PdpRequest) -> PdpResponse:
        g = self._graph
        rid = req.request_id
        missing = [u for u in (req.tx_id, req.rx_id) if u not in g.users]
        if missing:
            return PdpResponse(status="unknown_user", error=f"unknown user(s) {missing}", request_id=rid)
        if req.tx_id == req.rx_id:
            return PdpResponse(status="unknown_user", error="tx_id and rx_id must differ", request_id=rid)
        config = self._config
        if req.overrides:
            unknown = sorted(set(req.overrides) - set(g.tiles))
            if unknown:
                return PdpResponse(status="invalid_config", error=f"unknown tiles {unknown}", request_id=rid)
            try:
                updates = {t: merged_from_descriptor(g, t, d) for t, d in sorted(req.overrides.items())}
            except (InvalidConfiguration, PweError, ValueError) as exc:
                return PdpResponse(status="invalid_config", error=str(exc), request_id=rid)
            config = config.with_assignment(updates)
        if req.rx_position is not None:
            g = g.with_user_at(req.rx_id, req.rx_position)
        pdp = compute_pdp(g, config, req.tx_id, req.rx_id, self._params)
        entries = [PdpEntry(power_dbm=e.power_dbm, delay_ns=e.delay_s * 1e9, arrival=e.arrival_direction,
                            trace=";".join(e.trace)) for e in pdp.entries]
        return PdpResponse(status="ok", entries=entries, request_id=rid)

    def handle_line(self, line: str | bytes) -> str:
        """One NDJSON record in, one out; malformed input gets an error record instead of an exception."""
        try:
            req = PdpRequest.model_validate_json(line)
        except ValidationError as exc:
            first = exc.errors()[0]
            where = ".".join(str(p) for p in first["loc"])
            msg = f"malformed request: {where}: {first['msg']}" if where else f"malformed request: {first['msg']}"
            rid = _peek_id(line)
            return PdpResponse(status="invalid_config", error=msg, request_id=rid).model_dump_json(exclude_none=True)
        return self.handle(req).model_dump_json(exclude_none=True)


def _peek_id(line) -> str | None:
    try:
        obj = json.loads(line)
    except (ValueError, TypeError):
        return None
    rid = obj.get("request_id") if isinstance(obj, dict) else None
    return rid if isinstance(rid, str) else None


def response_csv(resp: PdpResponse) -> str:
    """The PDP CSV carried by a response, column for column what the library emits."""
    rows = [(str(i), fmt(e.power_dbm), fmt(e.delay_ns), *(fmt(a) for a in e.arrival), e.trace)
            for i, e in enumerate(resp.entries)]
    return table(PDP_COLUMNS, rows)
