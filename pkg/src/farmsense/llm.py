"""Uniform interface to text-generation and translation backends: a
remote JSON-over-HTTP backend for real models and a deterministic mock
driven by a rule-table fixture for every test. Also owns the prompt
templates, the advisor persona, and output-script validation.

The whole pipeline reasons in English: inbound text is normalized to
English before any stage runs and only the final outbound message is
translated to the farmer's language. The mock's pseudo-translation is a
reversible letter mapping into the Arabic block (tagged ⟪dst⟫...), so
round-trip tests are exact and script validation behaves as it would on
real output.
"""

from __future__ import annotations

import json
import re
import string
import threading
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol

import httpx
import yaml

STAGES = ("intent", "synthesis", "alert_assess", "judge", "translate", "summary")

SUPPORTED_LANGUAGES = ("en", "ur", "pa", "sd")
ARABIC_SCRIPT_LANGUAGES = ("ur", "pa", "sd")

#: Fixed system text prepended to every synthesis request.
PERSONA_PROMPT = (
    "You are a practical agronomy advisor for smallholder farmers. "
    "Be concise and action-oriented. Ground every claim in the sensor "
    "readings, forecasts, and reference passages provided, and cite them. "
    "If a needed input is missing, say so plainly instead of guessing. "
    "Your reply is delivered in the farmer's preferred language."
)

_STAGE_SYSTEM = {
    "intent": "You turn a farmer's message into a strict JSON data requirement.",
    "synthesis": PERSONA_PROMPT,
    "alert_assess": PERSONA_PROMPT,
    "judge": "You are a strict evaluator of agronomy advice.",
    "translate": "You are a precise translator for agricultural advisories.",
    "summary": PERSONA_PROMPT,
}

NO_REFERENCES_LINE = "No reference passages available."


class UnsupportedLanguage(ValueError):
    pass


class TemplateError(ValueError):
    def __init__(self, stage: str, placeholder: str):
        self.stage = stage
        self.placeholder = placeholder
        super().__init__(f"template {stage!r} is missing variable {placeholder!r}")


class BackendError(RuntimeError):
    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class BackendTimeout(BackendError):
    def __init__(self, message: str):
        super().__init__(message, status=None)


@dataclass(frozen=True)
class ModelRequest:
    stage: str
    system_prompt: str
    user_payload: str
    max_tokens: int = 512
    temperature: float = 0.0
    # Render-time variables, canonicalized to strings. The mock backend
    # fills its response templates from these; remote backends ignore them.
    variables: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")


# -- prompt templates ------------------------------------------------------


def _template_text(stage: str) -> str:
    return resources.files("farmsense").joinpath(f"fixtures/templates/{stage}.txt").read_text()


def format_passages_block(passages: list[tuple[str, str]]) -> str:
    """Render retrieved (citation, text) pairs for prompt injection."""
    if not passages:
        return NO_REFERENCES_LINE
    return "\n".join(f"[{citation}] {text}" for citation, text in passages)


def render_prompt(stage: str, variables: dict) -> ModelRequest:
    """Fill the stage template; every placeholder must be provided.

    The `passages` variable (list of (citation, text) pairs) is folded
    into `passages_block`, rendering the no-references branch when empty.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    variables = dict(variables)
    if "passages_block" not in variables:
        variables["passages_block"] = format_passages_block(variables.pop("passages", []) or [])
    else:
        variables.pop("passages", None)
    template = _template_text(stage)
    rendered_vars = {k: _stringify(v) for k, v in variables.items()}
    for _, placeholder, _, _ in string.Formatter().parse(template):
        if placeholder and placeholder not in rendered_vars:
            raise TemplateError(stage, placeholder)
    payload = template.format(**rendered_vars)
    return ModelRequest(
        stage=stage,
        system_prompt=_STAGE_SYSTEM[stage],
        user_payload=payload,
        variables=rendered_vars,
    )


def _stringify(value) -> str:
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


# -- script validation ------------------------------------------------------

_BLOCKS = (
    ("Arabic", ((0x0600, 0x06FF), (0x0750, 0x077F), (0x08A0, 0x08FF), (0xFB50, 0xFDFF), (0xFE70, 0xFEFF))),
    ("Gurmukhi", ((0x0A00, 0x0A7F),)),
    ("Latin", ((0x0041, 0x024F),)),
    ("Devanagari", ((0x0900, 0x097F),)),
)


def _block_of(ch: str) -> str:
    cp = ord(ch)
    for name, ranges in _BLOCKS:
        if any(lo <= cp <= hi for lo, hi in ranges):
            return name
    return "Other"


@dataclass(frozen=True)
class ScriptIssue:
    detected_block: str
    arabic_ratio: float
    gurmukhi_ratio: float


def validate_script(text: str, lang: str) -> ScriptIssue | None:
    """Check that outbound ur/pa/sd text is written in Arabic script
    (Shahmukhi for Punjabi). Returns None when valid.

    Valid iff at least 90% of letter codepoints fall in the Arabic script
    blocks; any Gurmukhi presence above 10% is flagged as WrongScript
    regardless.
    """
    if lang not in ARABIC_SCRIPT_LANGUAGES:
        raise UnsupportedLanguage(f"script validation applies to {ARABIC_SCRIPT_LANGUAGES}")
    letters = [ch for ch in text if unicodedata.category(ch).startswith("L")]
    if not letters:
        return None
    counts: dict[str, int] = {}
    for ch in letters:
        block = _block_of(ch)
        counts[block] = counts.get(block, 0) + 1
    total = len(letters)
    arabic_ratio = counts.get("Arabic", 0) / total
    gurmukhi_ratio = counts.get("Gurmukhi", 0) / total
    if gurmukhi_ratio > 0.10:
        return ScriptIssue("Gurmukhi", arabic_ratio, gurmukhi_ratio)
    if arabic_ratio < 0.90:
        dominant = max(
            (block for block in counts if block != "Arabic"),
            key=lambda b: counts[b],
        )
        return ScriptIssue(dominant, arabic_ratio, gurmukhi_ratio)
    return None


# -- mock pseudo-translation --------------------------------------------------

# Reversible Latin -> Arabic-block letter mapping; a-z to U+0621..U+063A,
# A-Z to U+0641..U+064A and U+0679..U+0688 (all Unicode letters), so the
# mock's "translations" pass script validation and invert exactly.
_LOWER_TARGETS = [chr(cp) for cp in range(0x0621, 0x063B)]
_UPPER_TARGETS = [chr(cp) for cp in range(0x0641, 0x064B)] + [
    chr(cp) for cp in range(0x0679, 0x0689)
]
_TO_ARABIC = {**dict(zip(string.ascii_lowercase, _LOWER_TARGETS)),
              **dict(zip(string.ascii_uppercase, _UPPER_TARGETS))}
_FROM_ARABIC = {v: k for k, v in _TO_ARABIC.items()}
_TAG_RE = re.compile(r"^⟪(en|ur|pa|sd)⟫")


def _check_language(code: str) -> None:
    if code not in SUPPORTED_LANGUAGES:
        raise UnsupportedLanguage(code)


def mock_translate(text: str, src: str, dst: str) -> str:
    _check_language(src)
    _check_language(dst)
    if src == dst:
        return text
    if dst == "en":
        stripped = _TAG_RE.sub("", text)
        return "".join(_FROM_ARABIC.get(ch, ch) for ch in stripped)
    body = "".join(_TO_ARABIC.get(ch, ch) for ch in _TAG_RE.sub("", text))
    return f"⟪{dst}⟫{body}"


# -- backends -----------------------------------------------------------------


class Backend(Protocol):
    def complete(self, request: ModelRequest) -> str: ...

    def translate(self, text: str, src: str, dst: str) -> str: ...


def _canonicalize(payload: str) -> str:
    return " ".join(payload.lower().split())


_VAR_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


def _fill(template: str, variables: dict[str, str]) -> str:
    return _VAR_RE.sub(lambda m: str(variables.get(m.group(1), "")), template)


class MockBackend:
    """Deterministic rule-table backend: output is a pure function of
    (stage, canonicalized payload, request variables). Rules match by
    lowercase substring, first match wins; otherwise the per-stage
    default applies. A rule with `match_on: <variable>` matches against that
    request variable rather than the whole payload, so template
    boilerplate cannot trigger it."""

    def __init__(self, rules_path: str | Path | None = None):
        if rules_path is None:
            text = resources.files("farmsense").joinpath("fixtures/mock_rules.yaml").read_text()
        else:
            text = Path(rules_path).read_text()
        doc = yaml.safe_load(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported rule table version {doc.get('version')!r}")
        self.rules: list[dict] = doc.get("rules", [])
        self.defaults: dict[str, str] = doc.get("defaults", {})
        for rule in self.rules:
            if rule["stage"] not in STAGES:
                raise ValueError(f"rule references unknown stage {rule['stage']!r}")

    def complete(self, request: ModelRequest) -> str:
        if request.stage == "translate":
            return mock_translate(
                request.variables.get("text", request.user_payload),
                request.variables.get("src", "en"),
                request.variables.get("dst", "en"),
            )
        canon = _canonicalize(request.user_payload)
        for rule in self.rules:
            if rule["stage"] != request.stage:
                continue
            target = rule.get("match_on")
            if target is None:
                haystack = canon
            elif target in request.variables:
                haystack = _canonicalize(request.variables[target])
            else:
                continue
            if rule["match"].lower() in haystack:
                return _fill(rule["response"], request.variables)
        default = self.defaults.get(request.stage)
        if default is None:
            raise BackendError(f"no mock rule or default for stage {request.stage!r}")
        return _fill(default, request.variables)

    def translate(self, text: str, src: str, dst: str) -> str:
        return mock_translate(text, src, dst)


class RemoteBackend:
    """Single chat-completions-shaped JSON call per request; the number of
    in-flight calls is bounded so a burst cannot swamp the provider."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout_s: float = 30.0,
        max_inflight: int = 8,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self._headers = {"authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout_s)
        self._slots = threading.Semaphore(max_inflight)

    def complete(self, request: ModelRequest) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_payload},
            ],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        with self._slots:
            try:
                response = self._client.post(self.endpoint, json=body, headers=self._headers)
            except httpx.TimeoutException as exc:
                raise BackendTimeout(f"backend timed out: {exc}") from exc
            except httpx.HTTPError as exc:
                raise BackendError(f"backend unreachable: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(f"backend returned {response.status_code}", status=response.status_code)
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc

    def translate(self, text: str, src: str, dst: str) -> str:
        _check_language(src)
        _check_language(dst)
        if src == dst:
            return text
        request = render_prompt("translate", {"text": text, "src": src, "dst": dst})
        return self.complete(request)


@dataclass
class BackendConfig:
    kind: str = "mock"  # mock | remote
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    timeout_s: float = 30.0
    max_inflight: int = 8
    rules_path: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "BackendConfig":
        return cls(**{k: v for k, v in doc.items() if k in cls.__dataclass_fields__})


def make_backend(config: BackendConfig) -> Backend:
    if config.kind == "mock":
        return MockBackend(rules_path=config.rules_path)
    if config.kind == "remote":
        if not config.endpoint or not config.model:
            raise ValueError("remote backend requires endpoint and model")
        import os

        api_key = os.environ.get(config.api_key_env) if config.api_key_env else None
        return RemoteBackend(
            endpoint=config.endpoint,
            model=config.model,
            api_key=api_key,
            timeout_s=config.timeout_s,
            max_inflight=config.max_inflight,
        )
    raise ValueError(f"unknown backend kind {config.kind!r}")
