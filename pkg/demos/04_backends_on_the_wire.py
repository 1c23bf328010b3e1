"""The cloud and local chat protocols against a throwaway local HTTP server.

Shows the exact request bodies, how replies are read, and the retry policy.
No real model is contacted.

Run: python3 demos/04_backends_on_the_wire.py
"""

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from trendscribe.gateway import BackendConfig, ProtocolError, complete

seen = []
status = {"code": 200}


class Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        seen.append((self.path, body))
        if self.path == "/v1/chat/completions":
            reply = {"choices": [{"message": {"role": "assistant", "content": "CCSE up in all regions."}}]}
        else:
            reply = {"message": {"role": "assistant", "content": "CCHD down in all regions."}, "done": True}
        payload = json.dumps(reply).encode()
        self.send_response(status["code"])
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
threading.Thread(target=server.serve_forever, daemon=True).start()
url = f"http://127.0.0.1:{server.server_address[1]}"
messages = [{"role": "system", "content": "You are a financial analyst."}, {"role": "user", "content": "Summarize."}]

os.environ.setdefault("DEMO_API_KEY", "sk-demo")  # credentials only ever come from the environment
cloud = BackendConfig(kind="cloud", endpoint=url, model="gpt-4o", credential_env="DEMO_API_KEY")
local = BackendConfig(kind="local", endpoint=url, model="llama3.1:8b")

for cfg in (cloud, local):
    result = complete(cfg, messages)
    path, body = seen[-1]
    print(f"{cfg.kind}: POST {path}\n  body   {body.decode()}\n  reply  {result.content!r}\n  digest {result.request_digest}\n")

status["code"] = 503
try:
    complete(BackendConfig(kind="local", endpoint=url, retries=2, backoff_base=0.01), messages)
except ProtocolError as exc:
    print(f"persistent 503: gave up after {exc.attempts} attempts ({exc})")
server.shutdown()
