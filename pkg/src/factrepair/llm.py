"""Chat-completion client that uses an LLM as a subset-consistency judge.

The endpoint must speak the OpenAI-style ``/chat/completions`` protocol.  The
API key is read from an environment variable named in the config file; keys
are never accepted in the file itself.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import re
import time
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Collection, Sequence

import httpx

from .factlang import Fact, Verdict
from .oracle import _Counted

log = logging.getLogger(__name__)


class LLMError(RuntimeError):
    pass


class LLMConfigError(LLMError):
    pass


class LLMTransportError(LLMError):
    pass


class LLMParseError(LLMError):
    pass


def load_prompt(name: str) -> str:
    return resources.files("factrepair").joinpath("prompts", f"{name}.txt").read_text("utf-8")


@dataclass
class LLMConfig:
    endpoint: str
    model: str
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    api_key_env: str = "OPENAI_API_KEY"
    backoff: float = 1.0
    subset_template: str | None = None
    direct_template: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "LLMConfig":
        if "api_key" in d:
            raise LLMConfigError("put the API key in an environment variable, not the config file")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise LLMConfigError(f"unknown LLM config keys: {sorted(unknown)}")
        for key in ("endpoint", "model"):
            if key not in d:
                raise LLMConfigError(f"LLM config is missing {key!r}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "LLMConfig":
        try:
            data = json.loads(Path(path).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise LLMConfigError(f"cannot read LLM config {path}: {exc}") from exc
        return cls.from_dict(data)

    def template(self, which: str) -> str:
        path = self.subset_template if which == "subset_consistency" else self.direct_template
        return Path(path).read_text("utf-8") if path else load_prompt(which)


def facts_block(texts: Sequence[str]) -> str:
    return "\n".join(f"{i}. {t}" for i, t in enumerate(texts, 1))


def render_subset_prompt(template: str, facts: Sequence[Fact], background: Sequence[Fact] = ()) -> str:
    bg = ""
    if background:
        bg = "Background (assumed true):\n" + facts_block([f.text for f in background]) + "\n\n"
    block = facts_block([f.text for f in sorted(facts, key=lambda f: f.id)])
    return template.replace("{bg}", bg).replace("{facts_block}", block)


def parse_verdict(text: str) -> Verdict | None:
    """INCONSISTENT is checked first because it contains CONSISTENT."""
    upper = text.upper()
    if "INCONSISTENT" in upper:
        return Verdict.INCONS
    if "CONSISTENT" in upper:
        return Verdict.CONS
    return None


_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL | re.IGNORECASE)


def parse_answer_list(text: str) -> list[str] | None:
    m = _ANSWER_RE.search(text)
    if m is None:
        return None
    try:
        value = ast.literal_eval(m.group(1).strip())
    except (ValueError, SyntaxError):
        return None
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        return None
    return list(value)


class ChatClient:
    def __init__(self, config: LLMConfig, transport: httpx.BaseTransport | None = None):
        key = os.environ.get(config.api_key_env, "").strip()
        if not key:
            raise LLMConfigError(f"environment variable {config.api_key_env} is not set")
        self.config = config
        self._http = httpx.Client(
            transport=transport,
            timeout=config.timeout,
            headers={"Authorization": f"Bearer {key}"},
        )

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        resp = self._http.post(self.config.endpoint, json=body)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    def ask(self, prompt: str, parse):
        """Send ``prompt`` until ``parse`` accepts the reply or retries run out."""
        attempts = self.config.max_retries + 1
        last_transport: Exception | None = None
        last_reply = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.backoff * attempt)
            try:
                reply = self.complete(prompt)
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                log.warning("LLM request failed (attempt %d/%d): %s", attempt + 1, attempts, exc)
                last_transport = exc
                continue
            parsed = parse(reply)
            if parsed is not None:
                return parsed
            last_reply = reply
            last_transport = None
            log.warning("unparseable LLM reply (attempt %d/%d): %.80r", attempt + 1, attempts, reply)
        if last_transport is not None:
            raise LLMTransportError(f"request failed after {attempts} attempts: {last_transport}")
        raise LLMParseError(f"no parseable answer after {attempts} attempts; last reply {last_reply!r}")


class LLMOracle(_Counted):
    """Subset-consistency oracle backed by a chat model."""

    label = "llm"
    exact = False

    def __init__(self, config: LLMConfig, transport: httpx.BaseTransport | None = None,
                 background: Sequence[Fact] = ()):
        super().__init__()
        self.client = ChatClient(config, transport)
        self.template = config.template("subset_consistency")
        self.background = list(background)

    def query(self, facts: Collection[Fact]) -> Verdict:
        self._tick()
        prompt = render_subset_prompt(self.template, list(facts), self.background)
        return self.client.ask(prompt, parse_verdict)


class DirectLLMJudge:
    """Asks the model once for the largest mutually consistent subset."""

    def __init__(self, config: LLMConfig, transport: httpx.BaseTransport | None = None):
        self.client = ChatClient(config, transport)
        self.template = config.template("direct_zero_shot")

    def select(self, facts: Sequence[Fact]) -> list[str]:
        prompt = self.template.replace("{facts_block}", facts_block([f.text for f in facts]))
        return self.client.ask(prompt, parse_answer_list)
