"""Agent bindings: role-prompted completion backends and tool selection.

A task runs by sending its role prompt (system message) and a built user
prompt to a CompletionBackend.  The ScriptedBackend is the deterministic
test double; HttpChatBackend talks to any OpenAI-compatible chat
completions endpoint.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import requests

from .pm_tools import Tool


class AgentError(Exception):
    pass


class BackendTimeout(AgentError):
    pass


class BackendEmptyResponse(AgentError):
    pass


class TransportError(AgentError):
    pass


class MalformedResponse(AgentError):
    pass


class ToolSelectionFailed(AgentError):
    """Raised after two unparsable selection replies; keeps the raw output."""

    def __init__(self, message: str, raw_output: str):
        super().__init__(message)
        self.raw_output = raw_output


@dataclass(frozen=True)
class AgentProfile:
    """An LLM role: system prompt plus backend-specific model name."""

    id: str
    role_prompt: str
    model_ref: str = ""
    temperature: float = 0.0

    def __post_init__(self):
        if not self.id:
            raise ValueError("agent id must be non-empty")
        if not self.role_prompt:
            raise ValueError(f"agent {self.id!r}: role_prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"agent {self.id!r}: temperature must be >= 0")


class CompletionBackend:
    """Completion contract.

    complete() must return within the timeout budget or raise
    BackendTimeout, and must never return empty text silently (empty
    output surfaces as BackendEmptyResponse through complete() below).
    ``retries`` is the number of re-attempts complete() makes on
    transient transport failures.
    """

    timeout: float = 60.0
    retries: int = 2

    def complete(self, role_prompt: str, user_prompt: str, *,
                 model: str = "", temperature: float = 0.0) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ScriptedRule:
    """First matching rule wins; each match consumes the next response.

    ``match`` is a plain substring over the user prompt, or a regular
    expression (re.search) when ``regex`` is true.  When the responses
    run out the last one repeats.
    """

    match: str
    responses: tuple[str, ...]
    regex: bool = False

    def matches(self, user_prompt: str) -> bool:
        if self.regex:
            return re.search(self.match, user_prompt) is not None
        return self.match in user_prompt


def rule(match: str, *responses: str, regex: bool = False) -> ScriptedRule:
    return ScriptedRule(match=match, responses=tuple(responses), regex=regex)


class ScriptedBackend(CompletionBackend):
    """Deterministic backend answering from an ordered rule table."""

    def __init__(self, rules: Iterable[ScriptedRule], fallback: str = ""):
        self.rules = list(rules)
        self.fallback = fallback
        self.timeout = 60.0
        self.retries = 0
        self._uses = [0] * len(self.rules)

    def reset(self) -> None:
        """Forget consumed responses; the next run replays from the top."""
        self._uses = [0] * len(self.rules)

    def complete(self, role_prompt: str, user_prompt: str, *,
                 model: str = "", temperature: float = 0.0) -> str:
        for i, scripted in enumerate(self.rules):
            if scripted.matches(user_prompt):
                index = min(self._uses[i], len(scripted.responses) - 1)
                self._uses[i] += 1
                return scripted.responses[index]
        return self.fallback


@dataclass(frozen=True)
class HttpDefaults:
    model: str = ""
    temperature: float = 0.0
    timeout: float = 60.0
    retries: int = 2


class HttpChatBackend(CompletionBackend):
    """OpenAI-compatible chat completions over HTTP with bearer auth."""

    def __init__(self, endpoint_url: str, api_key: str = "",
                 defaults: HttpDefaults | None = None):
        defaults = defaults or HttpDefaults()
        self.endpoint_url = endpoint_url
        self.api_key = api_key
        self.default_model = defaults.model
        self.default_temperature = defaults.temperature
        self.timeout = defaults.timeout
        self.retries = defaults.retries

    def complete(self, role_prompt: str, user_prompt: str, *,
                 model: str = "", temperature: float | None = None) -> str:
        body = {
            "model": model or self.default_model,
            "messages": [
                {"role": "system", "content": role_prompt},
                {"role": "user", "content": user_prompt},
            ],
            "temperature": self.default_temperature if temperature is None else temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = requests.post(
                self.endpoint_url, json=body, headers=headers, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise BackendTimeout(
                f"no response from {self.endpoint_url} within {self.timeout}s"
            ) from exc
        except requests.RequestException as exc:
            raise TransportError(f"request to {self.endpoint_url} failed: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise TransportError(
                f"HTTP {response.status_code} from {self.endpoint_url}"
            )
        try:
            payload = response.json()
        except ValueError as exc:
            raise MalformedResponse("response body is not JSON") from exc
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(
                "response has no choices[0].message.content field"
            ) from exc
        if not isinstance(content, str):
            raise MalformedResponse("message content is not text")
        return content


def http_chat_backend(endpoint_url: str, api_key: str = "",
                      defaults: HttpDefaults | None = None) -> CompletionBackend:
    return HttpChatBackend(endpoint_url, api_key, defaults)


# ---------------------------------------------------------------------------
# Completion and selection
# ---------------------------------------------------------------------------

def complete(profile: AgentProfile, backend: CompletionBackend, user_prompt: str) -> str:
    """Run one completion for the profile's role.

    Retries transient transport failures up to backend.retries times;
    timeouts and empty responses surface immediately.
    """
    if not user_prompt:
        raise ValueError("user_prompt must be non-empty")
    attempts = 1 + max(0, getattr(backend, "retries", 0))
    last_error: TransportError | None = None
    for _ in range(attempts):
        try:
            text = backend.complete(
                profile.role_prompt,
                user_prompt,
                model=profile.model_ref,
                temperature=profile.temperature,
            )
        except TransportError as exc:
            last_error = exc
            continue
        if not text.strip():
            raise BackendEmptyResponse(f"agent {profile.id!r} returned empty text")
        return text
    assert last_error is not None
    raise last_error


def _last_nonempty_line(text: str) -> str:
    for line in reversed(text.splitlines()):
        if line.strip():
            return line.strip()
    return ""


def selection_prompt(state: str, tools: Sequence[Tool]) -> str:
    lines = ["Choose exactly one tool to apply to the current state.", "Available tools:"]
    for tool in tools:
        lines.append(f"- {tool.name}: {tool.documentation}")
    lines.append("Current state:")
    lines.append(state)
    lines.append(
        "Reply with your reasoning if you want, but the last line of your reply "
        "must be exactly the name of the chosen tool."
    )
    return "\n".join(lines)


def select_tool(profile: AgentProfile, backend: CompletionBackend,
                state: str, candidates: Iterable[Tool]) -> Tool:
    """Pick one tool from the candidates for the current state.

    A single candidate is returned without consulting the backend.
    Otherwise the model is shown each tool's name and documentation and
    must answer with a tool name on the last line (case-sensitive exact
    match); one re-ask is allowed before ToolSelectionFailed.
    """
    tools = sorted(candidates, key=lambda t: t.name)
    if not tools:
        raise ValueError("candidates must be non-empty")
    if len(tools) == 1:
        return tools[0]
    by_name = {tool.name: tool for tool in tools}
    prompt = selection_prompt(state, tools)
    answer = _last_nonempty_line(complete(profile, backend, prompt))
    if answer in by_name:
        return by_name[answer]
    retry_prompt = (
        prompt
        + "\nYour previous reply was not a valid tool name. "
        + f"Answer with exactly one of: {', '.join(sorted(by_name))}."
    )
    raw = complete(profile, backend, retry_prompt)
    answer = _last_nonempty_line(raw)
    if answer in by_name:
        return by_name[answer]
    raise ToolSelectionFailed(
        f"agent {profile.id!r} named no valid tool twice; last reply: {raw!r}",
        raw_output=raw,
    )
