import json

import httpx
import pytest

from conftest import distractors
from factrepair.evaluation import direct_llm_baseline
from factrepair.factlang import Verdict
from factrepair.llm import (
    ChatClient, DirectLLMJudge, LLMConfig, LLMConfigError, LLMOracle, LLMParseError,
    LLMTransportError, load_prompt, parse_answer_list, parse_verdict, render_subset_prompt,
)


@pytest.fixture
def config(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "sk-test")
    return LLMConfig(endpoint="http://llm.test/v1/chat/completions", model="m",
                     api_key_env="TEST_LLM_KEY", max_retries=2, backoff=0.0)


def replying(*contents, seen=None):
    replies = list(contents)

    def handler(request):
        if seen is not None:
            seen.append(request)
        text = replies.pop(0) if len(replies) > 1 else replies[0]
        return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})

    return httpx.MockTransport(handler)


def test_parse_verdict():
    assert parse_verdict("CONSISTENT") is Verdict.CONS
    assert parse_verdict("The answer is INCONSISTENT.") is Verdict.INCONS
    assert parse_verdict("maybe") is None


def test_oracle_verdicts(config):
    facts = distractors(3)
    assert LLMOracle(config, replying("CONSISTENT")).query(facts) is Verdict.CONS
    assert LLMOracle(config, replying("The answer is INCONSISTENT.")).query(facts) is Verdict.INCONS


def test_parse_error_after_retries(config):
    seen = []
    oracle = LLMOracle(config, replying("maybe", seen=seen))
    with pytest.raises(LLMParseError):
        oracle.query(distractors(2))
    assert len(seen) == config.max_retries + 1


def test_retry_then_success(config):
    oracle = LLMOracle(config, replying("hmm", "unsure", "CONSISTENT"))
    assert oracle.query(distractors(2)) is Verdict.CONS


def test_transport_error(config):
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("down", request=request)

    with pytest.raises(LLMTransportError):
        LLMOracle(config, httpx.MockTransport(handler)).query(distractors(2))
    assert len(calls) == config.max_retries + 1


def test_http_500_is_transport_error(config):
    transport = httpx.MockTransport(lambda r: httpx.Response(500, text="boom"))
    with pytest.raises(LLMTransportError):
        LLMOracle(config, transport).query(distractors(2))


def test_request_shape_and_auth(config):
    seen = []
    LLMOracle(config, replying("CONSISTENT", seen=seen)).query(distractors(2))
    req = seen[0]
    assert req.headers["Authorization"] == "Bearer sk-test"
    body = json.loads(req.content)
    assert body["model"] == "m" and body["temperature"] == 0.0
    prompt = body["messages"][0]["content"]
    assert "1. Ann works for Acme." in prompt and "2. " in prompt


def test_missing_key(monkeypatch):
    monkeypatch.delenv("NO_SUCH_KEY_VAR", raising=False)
    cfg = LLMConfig(endpoint="http://x", model="m", api_key_env="NO_SUCH_KEY_VAR")
    with pytest.raises(LLMConfigError):
        ChatClient(cfg)


def test_config_rejects_inline_key(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"endpoint": "http://x", "model": "m", "api_key": "secret"}))
    with pytest.raises(LLMConfigError):
        LLMConfig.load(path)
    path.write_text(json.dumps({"endpoint": "http://x", "model": "m", "colour": 1}))
    with pytest.raises(LLMConfigError):
        LLMConfig.load(path)
    path.write_text(json.dumps({"endpoint": "http://x", "model": "m"}))
    assert LLMConfig.load(path).max_retries == 3


def test_prompt_templates():
    subset = load_prompt("subset_consistency")
    assert "{facts_block}" in subset and "{bg}" in subset
    assert "{facts_block}" in load_prompt("direct_zero_shot")
    text = render_subset_prompt(subset, distractors(2))
    assert "{" not in text.replace("{{", "")


def test_parse_answer_list():
    assert parse_answer_list("<answer>['a', 'b']</answer>") == ["a", "b"]
    assert parse_answer_list("no tag") is None
    assert parse_answer_list("<answer>[1, 2]</answer>") is None


def test_direct_baseline(config):
    facts = distractors(4)
    texts = [f.text for f in facts]
    judge = DirectLLMJudge(config, replying(f"<answer>{texts!r}</answer>"))
    assert direct_llm_baseline(judge, facts).surviving == {f.id for f in facts}

    answer = [texts[0].upper(), "Made up fact."]
    judge = DirectLLMJudge(config, replying(f"<answer>{answer!r}</answer>"))
    res = direct_llm_baseline(judge, facts)
    assert res.surviving == {facts[0].id}
    assert res.unmatched == ["Made up fact."]

    judge = DirectLLMJudge(config, replying("<answer>[oops</answer>"))
    with pytest.raises(LLMParseError):
        direct_llm_baseline(judge, facts)
