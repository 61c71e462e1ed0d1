"""Binary chunk-vs-activity classification through pluggable chat backends.

The question asked of every backend is "does this excerpt pertain to this
activity?"; the answer is parsed to a 0/1 verdict. The default prompt wording
is a reconstruction (no published template exists for this task), so templates
are versioned and the template id is recorded in every verdict for audit.
"""

from __future__ import annotations

import os
import random
import re
import string
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .exceptions import BackendError, EsgMapError, UnparseableVerdictError

DECISION_THRESHOLD = 0.5
DEFAULT_TEMPLATE_ID = "esg-activity-zero-shot-v1"

_PLACEHOLDER = re.compile(r"(\{TEXT\}|\{ACTIVITY\})")


@dataclass(frozen=True)
class ClassificationRequest:
    """One (c, i) question. The optional ids are audit metadata; they also let
    stub backends key verdicts without parsing prompts."""

    chunk_text: str
    activity_text: str
    prompt_template_id: str = DEFAULT_TEMPLATE_ID
    chunk_id: str | None = None
    activity_id: str | None = None

    def __post_init__(self):
        if not self.chunk_text or not self.activity_text:
            raise ValueError("chunk_text and activity_text must be non-empty")


@dataclass(frozen=True)
class PromptTemplate:
    """Chat prompt with a fixed system role and a user template carrying
    exactly one {TEXT} and one {ACTIVITY} placeholder."""

    template_id: str
    system_text: str
    user_template: str

    def __post_init__(self):
        for ph in ("{TEXT}", "{ACTIVITY}"):
            if self.user_template.count(ph) != 1:
                raise ValueError(f"template {self.template_id!r} must contain {ph} exactly once")

    def render(self, req: ClassificationRequest) -> str:
        # Single-pass substitution so placeholder-like strings inside the
        # inputs are never re-expanded.
        parts = _PLACEHOLDER.split(self.user_template)
        fills = {"{TEXT}": req.chunk_text, "{ACTIVITY}": req.activity_text}
        return "".join(fills.get(p, p) for p in parts)


DEFAULT_TEMPLATE = PromptTemplate(
    template_id=DEFAULT_TEMPLATE_ID,
    system_text=(
        "You assess whether a company disclosure excerpt pertains to a "
        "specific EU taxonomy activity."
    ),
    user_template=(
        "Activity description:\n{ACTIVITY}\n\n"
        "Excerpt:\n{TEXT}\n\n"
        "Answer with a single character: 1 if the excerpt pertains to the "
        "activity, 0 otherwise."
    ),
)

TEMPLATES: dict[str, PromptTemplate] = {
    DEFAULT_TEMPLATE_ID: DEFAULT_TEMPLATE,
}


def get_template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise ValueError(f"unknown prompt template {template_id!r}") from None


def render_prompt(tmpl: PromptTemplate, req: ClassificationRequest) -> str:
    return tmpl.render(req)


@dataclass(frozen=True)
class Verdict:
    label: int
    probability: float | None
    raw_output: str
    template_id: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.probability is not None:
            expected = 1 if self.probability >= DECISION_THRESHOLD else 0
            if self.label != expected:
                raise ValueError(
                    f"label {self.label} inconsistent with probability {self.probability} "
                    f"at threshold {DECISION_THRESHOLD}"
                )


def parse_verdict(raw: str) -> int | None:
    """Parse backend text to 0/1, or None when unparseable.

    Accepts a leading standalone token "1"/"0" after stripping surrounding
    whitespace and punctuation; "yes"/"no" (any case) map to 1/0. Ambiguous
    tokens like "01" are unparseable. Never raises.
    """
    if not isinstance(raw, str):
        return None
    tokens = raw.strip().split()
    if not tokens:
        return None
    head = tokens[0].strip(string.punctuation + "“”‘’").lower()
    return {"1": 1, "0": 0, "yes": 1, "no": 0}.get(head)


@dataclass(frozen=True)
class BackendReply:
    text: str
    probability: float | None = None


class InferenceBackend(Protocol):
    """Chat-completion contract: messages in, text (optionally a positive-class
    probability) out. Implementations must be safe to share across threads."""

    backend_id: str

    def complete(self, messages: Sequence[dict], meta: Mapping[str, str] | None = None) -> BackendReply: ...


class StubBackend:
    """Oracle backend for tests and offline runs.

    Verdicts are keyed by (chunk_id, activity_id) taken from the request
    metadata; anything not in the map gets `default`. Optional jitter sleeps
    a few milliseconds per call (seeded) so batch tests can exercise
    out-of-order completion.
    """

    backend_id = "stub"

    def __init__(self, labels: Mapping[tuple[str, str], int] | None = None,
                 default: int = 0, jitter_seed: int | None = None):
        self.labels = dict(labels or {})
        self.default = default
        self._rng = random.Random(jitter_seed) if jitter_seed is not None else None

    def complete(self, messages: Sequence[dict], meta: Mapping[str, str] | None = None) -> BackendReply:
        if self._rng is not None:
            time.sleep(self._rng.uniform(0.0, 0.005))
        meta = meta or {}
        key = (meta.get("chunk_id", ""), meta.get("activity_id", ""))
        return BackendReply(text=str(self.labels.get(key, self.default)))


class ScriptedBackend:
    """Replays a fixed sequence of raw outputs (then repeats the last one).
    Useful for exercising the parse-retry path."""

    backend_id = "scripted"

    def __init__(self, outputs: Sequence[str]):
        if not outputs:
            raise ValueError("outputs must be non-empty")
        self.outputs = list(outputs)
        self.calls = 0

    def complete(self, messages: Sequence[dict], meta: Mapping[str, str] | None = None) -> BackendReply:
        out = self.outputs[min(self.calls, len(self.outputs) - 1)]
        self.calls += 1
        return BackendReply(text=out)


class RemoteChatBackend:
    """Generic remote chat-completion backend.

    Sends {"model", "messages", "temperature"} and reads the reply text from
    either an OpenAI-style `choices[0].message.content` or a bare `text`
    field. Fine-tuned models use the same wire contract under a different
    model name. Temperature defaults to 0 for reproducibility.
    """

    def __init__(self, endpoint: str, model: str, api_key: str = "",
                 temperature: float = 0.0, max_attempts: int = 3, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.backend_id = f"remote:{model}"

    @classmethod
    def from_env(cls) -> "RemoteChatBackend":
        endpoint = os.environ.get("INFER_ENDPOINT", "")
        model = os.environ.get("INFER_MODEL", "")
        if not endpoint or not model:
            raise BackendError("INFER_ENDPOINT and INFER_MODEL must be set")
        return cls(endpoint, model, api_key=os.environ.get("INFER_API_KEY", ""))

    def complete(self, messages: Sequence[dict], meta: Mapping[str, str] | None = None) -> BackendReply:
        import httpx

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "messages": list(messages), "temperature": self.temperature}
        last_err = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = httpx.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                data = resp.json()
                if "choices" in data:
                    text = data["choices"][0]["message"]["content"]
                else:
                    text = data["text"]
                prob = data.get("probability")
                return BackendReply(text=str(text), probability=None if prob is None else float(prob))
            except Exception as exc:
                last_err = exc
                if attempt < self.max_attempts:
                    time.sleep(0.2 * attempt)
        raise BackendError(f"inference request failed: {last_err}", attempts=self.max_attempts)


def build_messages(tmpl: PromptTemplate, req: ClassificationRequest) -> list[dict]:
    return [
        {"role": "system", "content": tmpl.system_text},
        {"role": "user", "content": tmpl.render(req)},
    ]


def classify(req: ClassificationRequest, backend: InferenceBackend,
             max_parse_retries: int = 2) -> Verdict:
    """Obtain a 0/1 verdict for one request.

    Unparseable outputs are retried up to `max_parse_retries` additional
    times before raising. When the backend reports a probability the label
    is derived from it at the 0.5 threshold.
    """
    tmpl = get_template(req.prompt_template_id)
    messages = build_messages(tmpl, req)
    raw = ""
    for attempt in range(max_parse_retries + 1):
        meta = {
            "chunk_id": req.chunk_id or "",
            "activity_id": req.activity_id or "",
            "attempt": str(attempt),
        }
        reply = backend.complete(messages, meta)
        raw = reply.text
        if reply.probability is not None:
            label = 1 if reply.probability >= DECISION_THRESHOLD else 0
            return Verdict(label=label, probability=reply.probability,
                           raw_output=raw, template_id=tmpl.template_id)
        label = parse_verdict(raw)
        if label is not None:
            return Verdict(label=label, probability=None,
                           raw_output=raw, template_id=tmpl.template_id)
    raise UnparseableVerdictError(
        f"backend output not parseable as 0/1 after {max_parse_retries + 1} attempts",
        raw_output=raw,
    )


def classify_batch(reqs: Sequence[ClassificationRequest], backend: InferenceBackend,
                   parallelism: int = 4) -> list[Verdict | EsgMapError]:
    """Classify a batch, preserving input order regardless of completion order.

    Failures are isolated: a failed item contributes its exception object in
    place of a Verdict and the rest of the batch proceeds.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    results: list[Verdict | EsgMapError] = [None] * len(reqs)  # type: ignore[list-item]

    def run_one(i: int) -> None:
        try:
            results[i] = classify(reqs[i], backend)
        except EsgMapError as exc:
            results[i] = exc

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        list(pool.map(run_one, range(len(reqs))))
    return results
