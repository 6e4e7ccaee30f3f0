"""Service configuration.

The config file is JSON with camelCase keys; everything has a sensible
offline default (hash embedder, mock completion provider, scripted ASR,
echo executor) so a desk-scale deployment needs no external services at
all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .conversation import DEFAULT_TOKEN_BUDGET
from .errors import ConfigError
from .pipeline import DEFAULT_HOMEWORK_THRESHOLD
from .retrieval import SearchParams

_KNOWN_KEYS = {
    "port", "storePath", "providers", "retrieval", "homeworkThreshold",
    "tokenBudget", "autonomousMode", "contextBudgetChars", "auth",
    "analyticsSalt", "webhook", "executorAllowlist",
}


@dataclass
class AuthConfig:
    student_tokens: list[str] = field(default_factory=lambda: ["student-token"])
    instructor_tokens: list[str] = field(default_factory=lambda: ["instructor-token"])
    open_mode: bool = False  # no tokens configured: every caller is an instructor

    def role_of(self, token: str | None) -> str | None:
        if self.open_mode:
            return "instructor"
        if token in self.instructor_tokens:
            return "instructor"
        if token in self.student_tokens:
            return "student"
        return None


@dataclass
class WebhookConfig:
    attempts: int = 3
    backoff_base_s: float = 0.5
    timeout_s: float = 5.0


@dataclass
class AppConfig:
    port: int = 8080
    store_path: str = "./store"
    embedding: dict = field(default_factory=lambda: {"provider": "hash-test", "dim": 1536})
    llm: dict = field(default_factory=lambda: {"provider": "mock"})
    asr: dict = field(default_factory=lambda: {"provider": "scripted"})
    executor: dict = field(default_factory=lambda: {"provider": "echo"})
    retrieval: SearchParams = field(default_factory=SearchParams)
    homework_threshold: float = DEFAULT_HOMEWORK_THRESHOLD
    token_budget: int = DEFAULT_TOKEN_BUDGET
    autonomous_mode: bool = False
    context_budget_chars: int = 4000
    auth: AuthConfig = field(default_factory=AuthConfig)
    analytics_salt: str = "tutorkit-analytics"
    webhook: WebhookConfig = field(default_factory=WebhookConfig)
    executor_allowlist: frozenset[str] = frozenset({"python", "javascript"})


def load_config(path: str | Path) -> AppConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    return config_from_dict(data)


def config_from_dict(data: dict) -> AppConfig:
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")

    config = AppConfig()
    config.port = int(data.get("port", config.port))
    config.store_path = data.get("storePath", config.store_path)

    providers = data.get("providers", {})
    bad_provider_keys = set(providers) - {"embedding", "llm", "asr", "executor"}
    if bad_provider_keys:
        raise ConfigError(f"unknown provider key(s): {sorted(bad_provider_keys)}")
    config.embedding = {**config.embedding, **providers.get("embedding", {})}
    config.llm = {**config.llm, **providers.get("llm", {})}
    config.asr = {**config.asr, **providers.get("asr", {})}
    config.executor = {**config.executor, **providers.get("executor", {})}

    retrieval = data.get("retrieval", {})
    config.retrieval = SearchParams(
        top_k=int(retrieval.get("topK", 10)),
        threshold=float(retrieval.get("threshold", 0.75)),
        tie_epsilon=float(retrieval.get("tieEpsilon", 0.005)),
    )
    config.homework_threshold = float(
        data.get("homeworkThreshold", config.homework_threshold)
    )
    config.token_budget = int(data.get("tokenBudget", config.token_budget))
    config.autonomous_mode = bool(data.get("autonomousMode", config.autonomous_mode))
    config.context_budget_chars = int(
        data.get("contextBudgetChars", config.context_budget_chars)
    )

    auth = data.get("auth")
    if auth is not None:
        config.auth = AuthConfig(
            student_tokens=list(auth.get("studentTokens", [])),
            instructor_tokens=list(auth.get("instructorTokens", [])),
            open_mode=bool(auth.get("openMode", False)),
        )
    webhook = data.get("webhook", {})
    config.webhook = WebhookConfig(
        attempts=int(webhook.get("attempts", 3)),
        backoff_base_s=float(webhook.get("backoffBaseS", 0.5)),
        timeout_s=float(webhook.get("timeoutS", 5.0)),
    )
    config.analytics_salt = data.get("analyticsSalt", config.analytics_salt)
    if "executorAllowlist" in data:
        config.executor_allowlist = frozenset(data["executorAllowlist"])
    return config
