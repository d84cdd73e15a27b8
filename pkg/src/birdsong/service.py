"""Minimal HTTP inference endpoint.

POST /classify takes raw WAV bytes and returns the same report JSON the
batch classify command produces for those bytes. GET /healthz reports
the loaded model id and package version. The model is loaded once and
shared read-only across handler threads.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import birdsong
from birdsong import audio_io, nn, pipeline
from birdsong.pipeline import PipelineConfig

log = logging.getLogger("birdsong.service")


class ClassifierServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, net: nn.Network, config: PipelineConfig):
        super().__init__(address, _Handler)
        self.net = net
        self.config = config
        self.model_id = nn.model_fingerprint(net)


class _Handler(BaseHTTPRequestHandler):
    server: ClassifierServer

    def _send_json(self, status: int, body: str) -> None:
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self) -> None:
        if self.path == "/healthz":
            self._send_json(
                200,
                json.dumps(
                    {"model_id": self.server.model_id, "version": birdsong.__version__}
                ),
            )
        else:
            self._send_json(404, json.dumps({"error": "not-found"}))

    def do_POST(self) -> None:
        if self.path != "/classify":
            self._send_json(404, json.dumps({"error": "not-found"}))
            return
        length = int(self.headers.get("Content-Length", 0))
        data = self.rfile.read(length) if length > 0 else b""
        try:
            detections = pipeline.classify_recording(data, self.server.net, self.server.config)
            report = pipeline.summarize(
                detections,
                self.server.config,
                model_id=self.server.model_id,
                source=pipeline.source_id(data),
            )
        except audio_io.WavError:
            self._send_json(400, json.dumps({"error": "malformed-audio"}))
            return
        except Exception:
            log.exception("classification failed")
            self._send_json(500, json.dumps({"error": "internal"}))
            return
        self._send_json(200, pipeline.render_report_json(report))

    def log_message(self, format: str, *args) -> None:
        log.debug("%s - %s", self.address_string(), format % args)


def make_server(
    model_path, config: PipelineConfig, host: str = "127.0.0.1", port: int = 0
) -> ClassifierServer:
    """Load the model and bind the server; port 0 picks a free port.

    Raises on model load failure or an occupied port, so a broken setup
    never starts serving.
    """
    net = nn.load_model(model_path)
    if net.config.layer_sizes[0] != config.feature.n_mfcc:
        raise ValueError(
            f"model expects {net.config.layer_sizes[0]} inputs but the feature "
            f"config yields {config.feature.n_mfcc}"
        )
    return ClassifierServer((host, port), net, config)


def serve(model_path, config: PipelineConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Blocking entry point used by the CLI."""
    server = make_server(model_path, config, host, port)
    host_addr, bound_port = server.server_address[:2]
    print(f"serving model {server.model_id} on http://{host_addr}:{bound_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
