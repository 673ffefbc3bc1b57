"""Scripted chat-completion server for contract tests and offline demos.

A script is a list of entries ``{status, body, delay_ms}`` with optional keys:

``match``   only answer prompts containing this substring
``repeat``  keep the entry after use (otherwise it is consumed once)
``echo``    prefix the reply with the prompt it received

Each request takes the first unconsumed entry that matches. A string ``body``
on a 200 entry is wrapped into a chat-completion document; any other body is
returned as JSON unchanged. With no matching entry the server answers 500.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional


def completion(text: str) -> dict:
    return {"choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]}


@dataclass
class StubEntry:
    status: int = 200
    body: object = ""
    delay_ms: int = 0
    match: Optional[str] = None
    repeat: bool = False
    echo: bool = False

    @classmethod
    def from_json(cls, obj: dict) -> "StubEntry":
        return cls(
            status=int(obj.get("status", 200)),
            body=obj.get("body", ""),
            delay_ms=int(obj.get("delay_ms", 0)),
            match=obj.get("match"),
            repeat=bool(obj.get("repeat", False)),
            echo=bool(obj.get("echo", False)),
        )


@dataclass
class StubLog:
    requests: list = field(default_factory=list)
    in_flight: int = 0
    max_in_flight: int = 0


class StubServer:
    """Threaded HTTP server following a script; use as a context manager."""

    def __init__(self, script, host: str = "127.0.0.1", port: int = 0):
        self.entries = [e if isinstance(e, StubEntry) else StubEntry.from_json(e) for e in script]
        self._used = [False] * len(self.entries)
        self._lock = threading.Lock()
        self.log = StubLog()
        self._httpd = ThreadingHTTPServer((host, port), self._handler())
        self._httpd.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def _pick(self, prompt: str) -> Optional[StubEntry]:
        with self._lock:
            for i, e in enumerate(self.entries):
                if self._used[i] or (e.match is not None and e.match not in prompt):
                    continue
                if not e.repeat:
                    self._used[i] = True
                return e
        return None

    def _handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                try:
                    payload = json.loads(raw)
                    prompt = payload["messages"][-1]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    payload, prompt = None, ""
                with server._lock:
                    server.log.requests.append({"payload": payload, "headers": dict(self.headers)})
                    server.log.in_flight += 1
                    server.log.max_in_flight = max(server.log.max_in_flight, server.log.in_flight)
                try:
                    entry = server._pick(prompt)
                    if entry is None:
                        status, body = 500, {"error": "stub script exhausted"}
                    else:
                        if entry.delay_ms:
                            time.sleep(entry.delay_ms / 1000.0)
                        status, body = entry.status, entry.body
                        if isinstance(body, str):
                            text = (prompt + "\n" + body) if entry.echo else body
                            body = completion(text) if status == 200 else {"error": text}
                    data = json.dumps(body).encode("utf-8")
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                finally:
                    with server._lock:
                        server.log.in_flight -= 1

        return Handler

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "StubServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def load_script(path) -> list:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return doc["script"] if isinstance(doc, dict) else doc


def main(argv=None) -> int:
    import argparse

    ap = argparse.ArgumentParser(description="serve a scripted chat-completion endpoint")
    ap.add_argument("script")
    ap.add_argument("--port", type=int, default=8089)
    args = ap.parse_args(argv)
    srv = StubServer(load_script(args.script), port=args.port).start()
    print(srv.url, flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        srv.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
