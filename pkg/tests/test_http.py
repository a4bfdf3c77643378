import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from medikal.errors import ExtractorUnavailable, LlmTransportError, RetrieverError
from medikal.linking import HttpExtractor
from medikal.llm.client import HttpChatClient
from medikal.retrieval import EmbeddingRetriever, make_retriever
from medikal.types import EntityType


def letter_vector(text):
    v = [0.0] * 26
    for c in text.lower():
        if "a" <= c <= "z":
            v[ord(c) - 97] += 1
    return v


class Handler(BaseHTTPRequestHandler):
    state: dict = {}

    def log_message(self, *args):
        pass

    def _reply(self, code, body):
        data = body.encode() if isinstance(body, str) else json.dumps(body).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        payload = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        st = self.state
        st.setdefault("hits", []).append(self.path)
        if self.path == "/embed":
            self._reply(200, {"vectors": [letter_vector(t) for t in payload["texts"]]})
        elif self.path == "/embed-bad":
            self._reply(200, {"vectors": [[1.0]]})
        elif self.path == "/chat-flaky":
            if st.get("flaky", 0) < 1:
                st["flaky"] = st.get("flaky", 0) + 1
                self._reply(503, {"error": "busy"})
            else:
                self._reply(200, {"text": "echo:" + payload["user"]})
        elif self.path == "/chat-down":
            self._reply(500, {"error": "down"})
        elif self.path == "/chat-notext":
            self._reply(200, {"answer": "x"})
        elif self.path == "/chat-garbage":
            self._reply(200, "not json")
        elif self.path == "/ner":
            self._reply(200, {"entities": [
                {"surface": "fever", "type": "sym", "start": 0, "end": 5},
                {"surface": "aspirin", "type": "DRU"},
                {"surface": "thing", "type": "weird"},
                {"surface": " ", "type": "sym"},
            ]})
        else:
            self._reply(404, {})


@pytest.fixture()
def server():
    Handler.state = {}
    srv = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()
    srv.server_close()


def test_embedding_retriever_cosines(server):
    r = make_retriever("embedding", ["ab"], f"{server}/embed")
    assert isinstance(r, EmbeddingRetriever)
    names = ["ab", "ba", "cd", "abab"]
    s = r.score("ab", names)
    # letter bags: identical text scores 1, disjoint letters 0, anagrams are capped below 1
    assert s[0] == 1.0 and s[2] == 0.0
    assert 0.99 < s[1] < 1.0 and 0.99 < s[3] < 1.0
    r.prepare(names)
    assert np.array_equal(r.score("ab", names), s)


def test_embedding_errors(server):
    with pytest.raises(RetrieverError):
        EmbeddingRetriever(f"{server}/embed-bad").score("a", ["a", "b"])
    with pytest.raises(RetrieverError):
        EmbeddingRetriever(f"{server}/missing").score("a", ["a"])
    with pytest.raises(RetrieverError):
        make_retriever("embedding", ["a"])


def test_chat_retries_once(server):
    client = HttpChatClient(f"{server}/chat-flaky", timeout=5)
    assert client.complete("sys", "hello", key="k") == "echo:hello"
    assert Handler.state["hits"] == ["/chat-flaky", "/chat-flaky"]


def test_chat_gives_up_after_retry(server):
    with pytest.raises(LlmTransportError):
        HttpChatClient(f"{server}/chat-down", timeout=5).complete("s", "u")
    assert len(Handler.state["hits"]) == 2


@pytest.mark.parametrize("path", ["/chat-notext", "/chat-garbage"])
def test_chat_bad_reply(server, path):
    with pytest.raises(LlmTransportError):
        HttpChatClient(f"{server}{path}", timeout=5).complete("s", "u")


def test_chat_unreachable():
    with pytest.raises(LlmTransportError):
        HttpChatClient("http://127.0.0.1:9/none", timeout=1, retries=0).complete("s", "u")


def test_ner_client(server):
    ents = HttpExtractor(f"{server}/ner").extract("fever after aspirin")
    assert [(e.surface, e.etype, e.span) for e in ents] == [
        ("fever", EntityType.SYM, (0, 5)), ("aspirin", EntityType.DRU, None),
    ]
    with pytest.raises(ExtractorUnavailable):
        HttpExtractor(f"{server}/missing").extract("x")
