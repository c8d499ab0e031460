"""Local chat-completion endpoint driven by a script of canned replies."""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class MockChat:
    """Each script entry is ("ok", content) | ("status", code) | ("sleep", seconds, content)."""

    def __init__(self, script, key="secret"):
        self.script = list(script)
        self.key = key
        self.requests = []
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                mock.requests.append({"path": self.path, "auth": self.headers.get("Authorization"), "body": body})
                if mock.key and self.headers.get("Authorization") != f"Bearer {mock.key}":
                    return self._send(401, {"error": "bad key"})
                step = mock.script.pop(0) if mock.script else ("ok", "done")
                if step[0] == "status":
                    return self._send(step[1], {"error": "injected"})
                if step[0] == "sleep":
                    time.sleep(step[1])
                content = step[-1]
                self._send(200, {"choices": [{"message": {"role": "assistant", "content": content}}],
                                 "usage": {"prompt_tokens": 3, "completion_tokens": 5}})

            def _send(self, code, doc):
                data = json.dumps(doc).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                try:
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/v1"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
