"""Engine agent backed by a chat-completion model.

Beliefs and actions travel as text. Alignment comes from the agent's own
self-evaluation of its teammates' actions, never from vector similarity.
"""

from __future__ import annotations

from typing import Any, Callable, Iterable, Mapping

from ..engine import AgentFailure
from ..types import ActionVector, Belief, InteractionLog
from .client import ChatError, ChatRequest, ChatResponse, EndpointConfig, chat_call
from .parsing import ParseError, parse_alignment_response, parse_tom_response
from .prompts import RoleContext, render_alignment_prompt, render_tom_prompt

ChatFn = Callable[[ChatRequest], ChatResponse]


def history_digest(log: InteractionLog, agent_id: int, names: Mapping[int, str]) -> str:
    lines = []
    for r, actions in log.view(agent_id).archive:
        for j in sorted(actions):
            text = actions[j].text or "(no text)"
            lines.append(f"Round {r} {names.get(j, str(j))}: {text}")
    return "\n".join(lines)


class LLMAgent:
    def __init__(
        self,
        agent_id: int,
        chat: ChatFn,
        model: str,
        role: RoleContext,
        tom_level: int,
        names: Mapping[int, str],
        dimension: int = 0,
        subject: str = "Engineer",
    ):
        self.agent_id = agent_id
        self.chat = chat
        self.model = model
        self.role = role
        self.tom_level = tom_level
        self.names = dict(names)
        self.dimension = dimension
        self.subject = subject

    def _ask(self, prompt: str) -> str:
        try:
            return self.chat(ChatRequest(self.model, (("user", prompt),))).content
        except ChatError as exc:
            raise AgentFailure(f"agent {self.agent_id}: {exc}") from exc

    def believe(self, log: InteractionLog, team: Iterable[int]) -> Belief:
        prompt = render_tom_prompt(self.role, self.tom_level, history_digest(log, self.agent_id, self.names))
        try:
            return parse_tom_response(self._ask(prompt), owner=self.agent_id)
        except ParseError as exc:
            raise AgentFailure(f"agent {self.agent_id}: {exc}") from exc

    def act(self, log: InteractionLog, round_index: int, seed: int, belief: Belief | None = None) -> ActionVector:
        if belief is None:
            belief = self.believe(log, ())
        return ActionVector((0.0,) * self.dimension, text=belief.action_text)

    def score(self, belief: Belief, actions: Mapping[int, ActionVector]) -> dict[int, float]:
        by_name = {self.names[j]: j for j in sorted(actions)}
        prompt = render_alignment_prompt(
            belief.text or "no belief",
            {name: actions[j].text or "" for name, j in by_name.items()},
            subject=self.subject,
        )
        try:
            parsed = parse_alignment_response(self._ask(prompt), expected=list(by_name))
        except ParseError as exc:
            raise AgentFailure(f"agent {self.agent_id}: {exc}") from exc
        return {by_name[name]: parsed[name] for name in by_name}


def build_llm_agents(scenario, specs, chat: ChatFn | None = None) -> dict[int, LLMAgent]:
    """LLM agents for the ``kind: llm`` entries of a scenario.

    The adapter block supplies env-var names for the endpoint (``url_env``,
    ``key_env``, ``model_env``), an optional ``model``, ``role`` and
    ``topic`` defaults, and client settings.
    """
    adapter: Mapping[str, Any] = scenario.adapter or {}
    if chat is None:
        config = EndpointConfig.from_env(
            adapter.get("url_env", "TOMTEAM_LLM_URL"),
            adapter.get("key_env", "TOMTEAM_LLM_KEY"),
            adapter.get("model_env", "TOMTEAM_LLM_MODEL"),
            **{k: adapter[k] for k in ("timeout", "max_retries", "backoff", "max_requests_per_second") if k in adapter},
        )
        if "model" in adapter:
            config = EndpointConfig(**{**config.__dict__, "model": adapter["model"]})

        def chat(request: ChatRequest, _config=config) -> ChatResponse:
            return chat_call(request, _config)

        model = config.model
    else:
        model = adapter.get("model", "default")
    names = {a.agent_id: a.label for a in scenario.agents}
    agents = {}
    for spec in specs:
        role = RoleContext(
            role=spec.role or adapter.get("role", "project_manager"),
            action=adapter.get("action", "none"),
            topic=adapter.get("topic"),
        )
        agents[spec.agent_id] = LLMAgent(
            spec.agent_id,
            chat,
            model,
            role,
            spec.tom_level,
            names,
            scenario.dimension,
            subject=adapter.get("subject", "Engineer"),
        )
    return agents
