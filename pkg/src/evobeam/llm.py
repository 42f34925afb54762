"""Optional delegation of supervisor routing to a chat-completions endpoint.

The endpoint is asked, once per transition, which stage should run next.
Its answer is accepted only when it parses to exactly one role name and
agrees with the deterministic route; every other outcome (parse failure,
transport error, timeout, disagreement) falls back to the deterministic
supervisor, so episodes never depend on network availability and always
follow a legal transition.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field

import requests

from .errors import ConfigurationError, ValidationError
from .lifecycle import IDLE, ROLE_NAMES, AgentRole
from .scenario import LlmSettings

log = logging.getLogger(__name__)

MAX_PROMPT_BYTES = 8192
_MESSAGE_CLIP = 500

_IDLE_NAME = "Idle"
_NAME_LOOKUP = {name.lower(): AgentRole(name) for name in ROLE_NAMES}
_NAME_LOOKUP[_IDLE_NAME.lower()] = IDLE


@dataclass(frozen=True)
class EndpointConfig:
    """How to reach the routing endpoint.

    api_key is kept out of repr and must never appear in logs or
    serialized output; load it from the environment via from_settings.
    """

    base_url: str
    model_name: str
    api_key: str = field(repr=False, default="")
    timeout_s: float = 30.0
    max_retries: int = 2

    def __post_init__(self):
        if not self.base_url:
            raise ConfigurationError("base_url must be a nonempty string")
        if not self.model_name:
            raise ConfigurationError("model_name must be a nonempty string")
        if not self.timeout_s > 0:
            raise ConfigurationError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")

    @classmethod
    def from_settings(cls, settings: LlmSettings) -> "EndpointConfig":
        """Resolve the API key from the configured environment variable."""
        key = os.environ.get(settings.api_key_env, "")
        if not key:
            raise ConfigurationError(
                f"environment variable {settings.api_key_env} is not set; "
                "it must hold the endpoint API key"
            )
        return cls(
            base_url=settings.base_url,
            model_name=settings.model_name,
            api_key=key,
            timeout_s=settings.timeout_s,
            max_retries=settings.max_retries,
        )


@dataclass(frozen=True)
class RoutingPrompt:
    """One routing question plus the deterministic answer to fall back on."""

    text: str
    fallback_role: object

    def __post_init__(self):
        if len(self.text.encode("utf-8")) > MAX_PROMPT_BYTES:
            raise ValidationError(f"prompt exceeds {MAX_PROMPT_BYTES} bytes")
        for name in ROLE_NAMES:
            if name not in self.text:
                raise ValidationError(f"prompt must list every role; {name} is absent")


@dataclass(frozen=True)
class RoutingDecision:
    """The stage to run next and where the answer came from."""

    role: object
    source: str  # "llm" or "fallback"
    raw_response: str = ""


def build_routing_prompt(blackboard, report, fallback_role) -> RoutingPrompt:
    """Summarize the blackboard into a single routing question."""
    status = "ok" if report.ok else f"fail ({report.reason})"
    decision = blackboard.trigger_decision
    if decision is None:
        trigger_line = "Trigger state: none."
    elif decision.trigger:
        trigger_line = (
            f"Trigger state: fired, reason {decision.reason.value}, "
            f"deployed {_fmt(decision.deployed_gain_db)} dB "
            f"vs baseline {_fmt(decision.baseline_gain_db)} dB."
        )
    else:
        trigger_line = (
            f"Trigger state: quiet, deployed {_fmt(decision.deployed_gain_db)} dB "
            f"vs baseline {_fmt(decision.baseline_gain_db)} dB."
        )
    message = report.message[:_MESSAGE_CLIP]
    text = "\n".join(
        [
            "You route stages of a self-maintaining beamforming loop.",
            f"Step index: {blackboard.step_index}.",
            f"Finished stage: {report.role.value}, status {status}: {message}",
            trigger_line,
            f"Last deployed gain: {_fmt(blackboard.last_deployed_gain_db)} dB.",
            "The stages are: " + ", ".join(ROLE_NAMES) + f", {_IDLE_NAME}.",
            "Answer with exactly one stage name and nothing else.",
        ]
    )
    return RoutingPrompt(text=text, fallback_role=fallback_role)


def _fmt(value):
    return "unknown" if value is None else f"{value:.4f}"


def parse_role_name(raw) -> object | None:
    """Map a model response onto a role or Idle; None when unparseable."""
    if not isinstance(raw, str):
        return None
    cleaned = re.sub(r"^[^A-Za-z]+|[^A-Za-z]+$", "", raw)
    return _NAME_LOOKUP.get(cleaned.lower())


def decide_next_agent(prompt: RoutingPrompt, config: EndpointConfig) -> RoutingDecision:
    """Ask the endpoint for the next stage, falling back deterministically.

    The fallback role in the prompt is the deterministic supervisor result
    and therefore the only legal transition; an answer is used as-is only
    when it matches it. No failure mode escapes as an exception.
    """
    raw = _post_chat(prompt.text, config)
    if raw is None:
        return RoutingDecision(role=prompt.fallback_role, source="fallback")
    parsed = parse_role_name(raw)
    if parsed is None:
        log.warning("unparseable routing response %r; using fallback", raw[:80])
        return RoutingDecision(role=prompt.fallback_role, source="fallback", raw_response=raw)
    if parsed is not prompt.fallback_role:
        log.warning(
            "routing response %r is not a legal transition here; using fallback", raw[:80]
        )
        return RoutingDecision(role=prompt.fallback_role, source="fallback", raw_response=raw)
    return RoutingDecision(role=parsed, source="llm", raw_response=raw)


def _post_chat(prompt_text, config):
    """One chat-completions request with retries; None on any failure."""
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {
        "Authorization": f"Bearer {config.api_key}",
        "Content-Type": "application/json",
    }
    body = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt_text}],
        "temperature": 0,
    }
    for _ in range(config.max_retries + 1):
        try:
            response = requests.post(url, json=body, headers=headers, timeout=config.timeout_s)
            if response.status_code != 200:
                continue
            data = response.json()
            return str(data["choices"][0]["message"]["content"])
        except (requests.RequestException, ValueError, KeyError, IndexError, TypeError):
            continue
    return None


def make_router(config: EndpointConfig, decision_log=None):
    """Build a run_episode router that consults the endpoint per transition.

    Args:
        config: endpoint to query.
        decision_log: optional list collecting every RoutingDecision.
    """

    def router(blackboard, report, fallback_role):
        prompt = build_routing_prompt(blackboard, report, fallback_role)
        decision = decide_next_agent(prompt, config)
        if decision_log is not None:
            decision_log.append(decision)
        return decision.role

    return router
