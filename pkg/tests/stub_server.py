"""A tiny in-process wire-protocol server used by provider tests."""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np


class StubBehavior:
    """Knobs for the stub: dimension, declared dim, and transient failures."""

    def __init__(self, dim=8, declared_dim=None, fail_first=0):
        self.dim = dim
        self.declared_dim = declared_dim if declared_dim is not None else dim
        self.fail_first = fail_first
        self.api_calls = 0
        self.lock = threading.Lock()

    def basis_vector(self, index: int) -> list[float]:
        vec = np.zeros(self.dim)
        vec[index % self.dim] = 1.0
        return vec.tolist()


class _Handler(BaseHTTPRequestHandler):
    behavior: StubBehavior

    def log_message(self, *args):  # keep test output quiet
        pass

    def _send(self, payload, status=200):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            self._send({"model": "stub-encoder", "dim": self.behavior.declared_dim})
        else:
            self._send({"error": "not_found", "message": self.path}, status=404)

    def do_POST(self):
        behavior = self.behavior
        with behavior.lock:
            behavior.api_calls += 1
            if behavior.api_calls <= behavior.fail_first:
                # Simulate a transport failure: drop the connection.
                self.connection.close()
                return
        length = int(self.headers.get("Content-Length", "0"))
        request = json.loads(self.rfile.read(length))
        op = request.get("op")
        items = request.get("items", [])
        if op in ("embed_text", "embed_frames"):
            vectors = [behavior.basis_vector(i) for i in range(len(items))]
            self._send({"dim": behavior.declared_dim, "vectors": vectors})
        elif op == "match":
            scores = []
            for item in items:
                frames = np.asarray(item["frames"], dtype=float)
                pooled = frames.mean(axis=0)
                norm = np.linalg.norm(pooled)
                scores.append(float(pooled[0] / norm) if norm else 0.0)
            self._send({"dim": behavior.declared_dim, "scores": scores})
        else:
            self._send({"error": "bad_op", "message": str(op)}, status=400)


def start_stub(behavior: StubBehavior):
    """Start the stub on an ephemeral port; returns (endpoint, server)."""
    handler = type("BoundHandler", (_Handler,), {"behavior": behavior})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    endpoint = f"http://127.0.0.1:{server.server_address[1]}"
    return endpoint, server
