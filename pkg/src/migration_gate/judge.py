"""LLM-as-judge gateway: prompt rendering, reply parsing and a retrying HTTP client.

Two judge prompts are supported:

``llm_correctness``
    lists the ground truth sentence by sentence in ``<ground-truth id="N">`` tags
    and asks for the ids contradicted by the answer in ``<contradictions>``.
    An empty list is a pass; any id is a fail.
``new_correctness``
    shows the retrieved contexts, the question, the answer and the reference
    answer, and asks for ``<assessment>correct|incorrect</assessment>``.

Replies that do not fit the expected vocabulary are parse failures. They are
reported, never written to the verdicts file, and never counted as fails.

The endpoint speaks the common chat-completion shape: POST
``{model, messages: [{role: "user", content}], temperature}`` and read
``choices[0].message.content``. The bearer token is read from the environment
variable named by :attr:`JudgeConfig.token_env` (``JUDGE_API_TOKEN`` by default).
"""

from __future__ import annotations

import logging
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import httpx

from .dataset import RunRecord, TestExample, VerdictRecord, index_examples
from .errors import ConfigurationError, JudgeAbortError, ParseFailure, RenderError, TransportError, ValidationError

log = logging.getLogger(__name__)

TEMPLATE_IDS = ("llm_correctness", "new_correctness")
RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
DEFAULT_TOKEN_ENV = "JUDGE_API_TOKEN"

# Prompt bodies are reproduced as the judges were originally instructed, typos
# included, so that verdicts stay comparable with the calibration data.
_LLM_CORRECTNESS = """\
Your job is to detect whether statements are contradictory.

You compare a single "answer" statement to number of "ground-truth" statements and report which of the ground-truths is contradicted by the answer.
The answer and ground-truths are answers to a question, which your user provides within the <question> XML tag.

The answer is contained within <answer> tag and ground-truths are contained within the <ground-truth> XML tags. Each ground-truth tag has a unique id attribute which you use to identify them in your response.
Your respond with a comma-separated list of the IDs of contradicting ground-truths in the <contradictions> XML tags.

If there are no contradictions, leave an empty response between the tags.

This is the question: <question>{question}</question>

This is the answer to the question: <answer>{answer}</answer>

These are the ground-truth statements:
{ground_truths}.

Which (if any) of the ground-truths contradict the answer?"""

_NEW_CORRECTNESS = """\
You are assisting AI developers by assessing the correctness of another LLM's answers to questions in given contexts.

An LLM was provided with some ground-truth context (given below in the
"context" XML tags) and a user's question (given below in the "question" XML tags).
It generated the answer given below in the "llm-answer" XML tags. You may also be
provided with an 'ideal' answer to the question, which is an example of how the
developers would like their LLM to respond. Do not overrely on this however -
trust the context as the absolute truth.

Your job is to assess the correctness of the generated answer, but you must do
it in the following specific way:
1. Assess the factual accuracy of the answer - does it contradict the context?
If it does, your assessment should be "incorrect".
2. Is the answer complete? If it gives some but not all of the information that
a user would need in order to understand and resolve their issue then is incomplete.
An incomplete answer can still be considered correct if it is not likely to cause
problems for the user, for example giving one option out of multiple alternatives
each of which will help the user. But for example if the response misses one of a
set of requirements all of which are needed then your response should be "incorrect". You need to
use careful judgement here to assess the seriousness of missing information and
its impact on the user.
3. If the answer off-topic - unrelated to the question or context - or does
not attempt an answer (e.g. "I don't know.") then it should be considered incorrect.

Output your reasoning first, taking particular care with incomplete answers.
Then, output your assessment within "assessment" XML tags. Use "correct" or
"incorrect" as the value, for example <assessment>incorrect</assessment>

Here is the data for you to assess:

<context>{context}</context>

<question>{question}</question>

<llm-answer>{llm_answer}</llm-answer>

<ideal-answer>{ideal_answer}</ideal-answer>"""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    placeholders: tuple

    def render(self, **values: str) -> str:
        missing = [p for p in self.placeholders if values.get(p) is None]
        if missing:
            raise RenderError(f"{self.template_id}: unfilled placeholders {missing}")
        return self.body.format(**{p: values[p] for p in self.placeholders})


TEMPLATES = {
    "llm_correctness": PromptTemplate("llm_correctness", _LLM_CORRECTNESS, ("question", "answer", "ground_truths")),
    "new_correctness": PromptTemplate(
        "new_correctness", _NEW_CORRECTNESS, ("context", "question", "llm_answer", "ideal_answer")
    ),
}

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def split_statements(text: str) -> list[str]:
    """Split reference text into sentence-level statements."""
    return [s.strip() for s in _SENTENCE_END.split(text.strip()) if s.strip()]


def _template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise ConfigurationError(f"unknown judge template {template_id!r}; expected one of {TEMPLATE_IDS}") from None


def render_prompt(template_id: str, example: TestExample, answer: RunRecord) -> str:
    template = _template(template_id)
    if template_id == "llm_correctness":
        statements = split_statements(example.ground_truth or "")
        if not statements:
            raise RenderError(f"example {example.id!r} has no ground truth to compare against")
        truths = "\n".join(f'<ground-truth id="{i}">{s}</ground-truth>' for i, s in enumerate(statements, start=1))
        return template.render(question=example.question, answer=answer.answer_text, ground_truths=truths)
    if not example.contexts:
        raise RenderError(f"example {example.id!r} has no contexts")
    return template.render(
        context="\n\n".join(example.contexts),
        question=example.question,
        llm_answer=answer.answer_text,
        ideal_answer=example.ground_truth or "",
    )


def _last_tag(raw: str, tag: str) -> Optional[str]:
    # the judge may quote the tag while reasoning; its final answer comes last
    matches = re.findall(rf"<{tag}\s*>(.*?)</{tag}\s*>|<{tag}\s*/>", raw, flags=re.DOTALL | re.IGNORECASE)
    if not matches:
        return None
    return matches[-1]


def parse_assessment(raw_response: str, template_id: str) -> str:
    """Return ``"pass"`` or ``"fail"``; raise :class:`ParseFailure` otherwise."""
    _template(template_id)
    if template_id == "new_correctness":
        content = _last_tag(raw_response, "assessment")
        if content is None:
            raise ParseFailure("no <assessment> tag in judge reply")
        value = content.strip().lower()
        if value == "correct":
            return "pass"
        if value == "incorrect":
            return "fail"
        raise ParseFailure(f"assessment {content.strip()!r} is neither correct nor incorrect")
    content = _last_tag(raw_response, "contradictions")
    if content is None:
        raise ParseFailure("no <contradictions> tag in judge reply")
    content = content.strip()
    if not content:
        return "pass"
    if re.fullmatch(r"\d+(\s*,\s*\d+)*\s*,?", content):
        return "fail"
    raise ParseFailure(f"contradictions {content!r} is not a list of ids")


# --- transport --------------------------------------------------------------


@dataclass(frozen=True)
class JudgeConfig:
    endpoint_url: str
    model_name: str
    max_parallel_requests: int = 4
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    temperature: float = 0.0
    jitter: float = 0.1
    token_env: str = DEFAULT_TOKEN_ENV
    max_parse_failure_rate: float = 0.10

    def __post_init__(self):
        if self.max_parallel_requests < 1:
            raise ValidationError("max_parallel_requests must be at least 1")
        if not self.timeout > 0:
            raise ValidationError("timeout must be positive")
        if self.max_retries < 0 or self.backoff_base < 0 or self.jitter < 0:
            raise ValidationError("max_retries, backoff_base and jitter must be non-negative")
        if not 0.0 <= self.max_parse_failure_rate <= 1.0:
            raise ValidationError("max_parse_failure_rate must lie in [0, 1]")

    def backoff(self, retry: int) -> float:
        """Delay before retry number ``retry`` (1-based), without jitter."""
        return self.backoff_base * 2 ** (retry - 1)


@dataclass(frozen=True)
class AttemptLog:
    attempt: int
    status: Optional[int]
    error: Optional[str]
    delay_before: float


@dataclass(frozen=True)
class SubmitResult:
    text: str
    attempts: tuple

    @property
    def n_attempts(self) -> int:
        return len(self.attempts)


class JudgeClient:
    """Chat-completion client with retry; safe to share between threads."""

    def __init__(
        self,
        config: JudgeConfig,
        http: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.config = config
        self._own_http = http is None
        self._http = http or httpx.Client(timeout=config.timeout)
        self._sleep = sleep
        self._rng = rng or random.Random()

    def close(self) -> None:
        if self._own_http:
            self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def submit(self, prompt: str) -> SubmitResult:
        cfg = self.config
        body = {"model": cfg.model_name, "messages": [{"role": "user", "content": prompt}], "temperature": cfg.temperature}
        log_: list[AttemptLog] = []
        delay = 0.0
        for attempt in range(1, cfg.max_retries + 2):
            if attempt > 1:
                delay = cfg.backoff(attempt - 1)
                delay += self._rng.uniform(0.0, cfg.jitter * delay)
                self._sleep(delay)
            try:
                resp = self._http.post(cfg.endpoint_url, json=body, headers=self._headers(), timeout=cfg.timeout)
            except httpx.TransportError as exc:
                log_.append(AttemptLog(attempt, None, f"{type(exc).__name__}: {exc}", delay))
                continue
            log_.append(AttemptLog(attempt, resp.status_code, None, delay))
            if resp.status_code == 200:
                try:
                    text = resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    raise TransportError("judge endpoint returned a malformed completion", log_) from None
                if not isinstance(text, str):
                    raise TransportError("judge completion content is not text", log_)
                return SubmitResult(text, tuple(log_))
            if resp.status_code not in RETRYABLE_STATUSES:
                raise TransportError(f"judge endpoint answered HTTP {resp.status_code}; not retrying", log_)
        last = log_[-1]
        reason = f"HTTP {last.status}" if last.status is not None else last.error
        raise TransportError(f"judge endpoint failed after {len(log_)} attempts (last: {reason})", log_)


def submit(config: JudgeConfig, prompt: str, **client_kwargs) -> SubmitResult:
    with JudgeClient(config, **client_kwargs) as client:
        return client.submit(prompt)


# --- batch ------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeOutcome:
    example_id: str
    model: str
    metric: str
    verdict: Optional[str]
    raw_response: str
    attempts: int
    parse_ok: bool
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "example_id": self.example_id,
            "model": self.model,
            "metric": self.metric,
            "verdict": self.verdict,
            "parse_ok": self.parse_ok,
            "attempts": self.attempts,
            "error": self.error,
            "raw_response": self.raw_response,
        }


@dataclass
class JudgeRunResult:
    outcomes: list
    verdicts: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [o for o in self.outcomes if not o.parse_ok]


def judge_run(
    examples: Sequence[TestExample],
    runs: Sequence[RunRecord],
    template_id: str,
    config: JudgeConfig,
    client: Optional[JudgeClient] = None,
    metric: Optional[str] = None,
) -> JudgeRunResult:
    """Judge every run; verdict records are sorted by (example_id, model).

    Raises :class:`JudgeAbortError` when more than
    ``config.max_parse_failure_rate`` of the replies cannot be parsed.
    """
    metric = metric or template_id
    _template(template_id)
    index = index_examples(examples)
    missing = sorted({r.example_id for r in runs if r.example_id not in index})
    if missing:
        raise ValidationError(f"runs reference unknown examples: {missing[:5]}")
    keys = [(r.example_id, r.model) for r in runs]
    if len(set(keys)) != len(keys):
        raise ValidationError("more than one run per (example_id, model); filter by prompt_id first")
    ordered = sorted(runs, key=lambda r: (r.example_id, r.model))
    prompts = [render_prompt(template_id, index[r.example_id], r) for r in ordered]

    own = client is None
    client = client or JudgeClient(config)
    try:
        with ThreadPoolExecutor(max_workers=config.max_parallel_requests) as pool:
            replies = list(pool.map(client.submit, prompts))
    finally:
        if own:
            client.close()

    outcomes = []
    for run, reply in zip(ordered, replies):
        try:
            verdict, ok, err = parse_assessment(reply.text, template_id), True, None
        except ParseFailure as exc:
            verdict, ok, err = None, False, str(exc)
        outcomes.append(JudgeOutcome(run.example_id, run.model, metric, verdict, reply.text, reply.n_attempts, ok, err))

    failed = [o for o in outcomes if not o.parse_ok]
    if failed:
        log.warning("%d of %d judge replies could not be parsed", len(failed), len(outcomes))
    if outcomes and len(failed) / len(outcomes) > config.max_parse_failure_rate:
        raise JudgeAbortError(
            f"{len(failed)} of {len(outcomes)} judge replies unparseable "
            f"(limit {config.max_parse_failure_rate:.0%}); refusing to write verdicts",
            outcomes,
        )
    verdicts = [VerdictRecord(o.example_id, o.model, o.metric, o.verdict) for o in outcomes if o.parse_ok]
    return JudgeRunResult(outcomes, verdicts)
