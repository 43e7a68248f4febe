from .app import create_app
from .core import PdpService, response_csv
from .models import PdpEntry, PdpRequest, PdpResponse
from .stream import request_stream, serve_pipe, serve_stream, start_stream_server

__all__ = ["create_app", "PdpService", "response_csv", "PdpEntry", "PdpRequest", "PdpResponse",
           "request_stream", "serve_pipe", "serve_stream", "start_stream_server"]
