"""Language-model providers: a live chat-completion client and a fixture replayer."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Protocol

logger = logging.getLogger(__name__)

ROLES = ("generate", "judge")


class ProviderError(RuntimeError):
    """Transient failure of a completion request."""


class ProviderExhausted(RuntimeError):
    """No further responses can be produced (fixtures used up, quota gone)."""


class LlmProvider(Protocol):
    concurrent: bool

    def complete(self, prompt: str, *, role: str, temperature: float) -> str: ...

    def state(self) -> dict: ...

    def restore(self, state: dict) -> None: ...


class MockProvider:
    """Replays fixture files in name order, one sequence per role.

    Layout: <dir>/generate/*.txt and <dir>/judge/*.txt. A fixture named
    `*.error` raises ProviderError when consumed, to script failures."""

    concurrent = False

    def __init__(self, directory):
        self.directory = Path(directory)
        self.files = {}
        for role in ROLES:
            d = self.directory / role
            self.files[role] = sorted(p for p in d.iterdir() if p.suffix in (".txt", ".error")) if d.is_dir() else []
        self.cursor = {role: 0 for role in ROLES}
        self.prompts: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    def complete(self, prompt: str, *, role: str, temperature: float = 1.0) -> str:
        with self._lock:
            seq = self.files.get(role, [])
            i = self.cursor[role]
            if i >= len(seq):
                raise ProviderExhausted(f"no {role} fixtures left after {i}")
            self.cursor[role] = i + 1
            self.prompts.append((role, prompt))
            path = seq[i]
        if path.suffix == ".error":
            raise ProviderError(path.read_text().strip() or "scripted failure")
        return path.read_text()

    def state(self) -> dict:
        return dict(self.cursor)

    def restore(self, state: dict) -> None:
        for role in ROLES:
            self.cursor[role] = int(state.get(role, 0))


class ChatCompletionProvider:
    """OpenAI-compatible /chat/completions client.

    The key is read from the environment variable named by `api_key_env`.
    Every exchange is written to `transcript_dir` as a JSON file."""

    concurrent = True

    def __init__(self, base_url: str, model: str, api_key_env: str = "AILSKIT_API_KEY",
                 transcript_dir=None, timeout: float = 120.0, retries: int = 3):
        key = os.environ.get(api_key_env)
        if not key:
            raise RuntimeError(f"environment variable {api_key_env} is not set")
        import httpx

        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.retries = retries
        self.client = httpx.Client(timeout=timeout, headers={"Authorization": f"Bearer {key}"})
        self.transcripts = Path(transcript_dir) if transcript_dir else None
        if self.transcripts:
            self.transcripts.mkdir(parents=True, exist_ok=True)
        self.calls = {role: 0 for role in ROLES}
        self._lock = threading.Lock()

    def complete(self, prompt: str, *, role: str, temperature: float = 1.0) -> str:
        import httpx

        body = {"model": self.model, "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}]}
        with self._lock:
            self.calls[role] += 1
            idx = self.calls[role]
        last = None
        for attempt in range(self.retries):
            try:
                resp = self.client.post(self.url, json=body)
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise ProviderError(f"HTTP {resp.status_code}")
                if resp.status_code in (401, 402, 403):
                    raise ProviderExhausted(f"HTTP {resp.status_code}: {resp.text[:200]}")
                resp.raise_for_status()
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
                self._log(role, idx, body, data)
                return text
            except (httpx.HTTPError, ProviderError, KeyError, ValueError) as exc:
                last = exc
                logger.warning("%s request failed (attempt %d): %s", role, attempt + 1, exc)
                time.sleep(min(2.0 ** attempt, 30.0))
        raise ProviderError(str(last))

    def _log(self, role, idx, body, data):
        if not self.transcripts:
            return
        path = self.transcripts / f"{role}-{idx:05d}.json"
        path.write_text(json.dumps({"request": body, "response": data}, indent=1))

    def state(self) -> dict:
        return dict(self.calls)

    def restore(self, state: dict) -> None:
        for role in ROLES:
            self.calls[role] = int(state.get(role, 0))
