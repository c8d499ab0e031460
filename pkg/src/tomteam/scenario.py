"""Scenario config documents: agent declarations plus an optional LLM adapter block.

A scenario is a JSON object::

    {
      "name": "defector",
      "dimension": 3,
      "agents": [
        {"latent": [1.0, 0.8, 0.6], "rho": 0.2, "noise_sd": 0.0,
         "tom_level": 1, "defector": false, "alpha": 0.5},
        ...
      ],
      "adapter": {...}          # only needed for "kind": "llm" agents
    }

Agent ids are list positions. Validation errors name the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .sim_agents import MAX_TOM_LEVEL, SimAgent, SimAgentModel
from .types import ActionVector


class ScenarioError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class AgentSpec:
    agent_id: int
    latent: tuple[float, ...]
    rho: float = 0.0
    noise_sd: float = 0.0
    tom_level: int = 1
    defector: bool = False
    alpha: float | None = None
    kind: str = "sim"
    name: str | None = None
    role: str | None = None

    @property
    def label(self) -> str:
        return self.name or f"Agent{self.agent_id + 1}"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "latent": list(self.latent),
            "rho": self.rho,
            "noise_sd": self.noise_sd,
            "tom_level": self.tom_level,
            "defector": self.defector,
            "kind": self.kind,
        }
        for key in ("alpha", "name", "role"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out


@dataclass(frozen=True)
class Scenario:
    name: str
    dimension: int
    agents: tuple[AgentSpec, ...]
    adapter: Mapping[str, Any] | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def alpha(self) -> dict[int, float] | None:
        if all(a.alpha is None for a in self.agents):
            return None
        return {a.agent_id: a.alpha for a in self.agents if a.alpha is not None}

    def models(self) -> list[SimAgentModel]:
        return [
            SimAgentModel(
                agent_id=a.agent_id,
                latent=ActionVector(a.latent),
                rho=a.rho,
                noise_sd=a.noise_sd,
                tom_level=a.tom_level,
                defector=a.defector,
            )
            for a in self.agents
            if a.kind == "sim"
        ]

    def build_agents(self, chat=None) -> dict[int, Any]:
        """Engine agents keyed by id. LLM agents need the adapter block (or ``chat``)."""
        rho = {a.agent_id: a.rho for a in self.agents}
        agents: dict[int, Any] = {m.agent_id: SimAgent(m, rho) for m in self.models()}
        llm_specs = [a for a in self.agents if a.kind == "llm"]
        if llm_specs:
            from .llm.agent import build_llm_agents  # adapter is optional

            agents.update(build_llm_agents(self, llm_specs, chat=chat))
        return dict(sorted(agents.items()))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "dimension": self.dimension,
            "agents": [a.to_dict() for a in self.agents],
        }
        if self.adapter is not None:
            out["adapter"] = dict(self.adapter)
        out.update(self.extra)
        return out


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(where, f"expected a finite number, got {value!r}")
    return float(value)


def parse_scenario(data: Mapping[str, Any]) -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    name = str(data.get("name", "scenario"))
    if "dimension" not in data:
        raise ScenarioError("dimension", "missing")
    dim = data["dimension"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 0:
        raise ScenarioError("dimension", f"expected a non-negative integer, got {dim!r}")
    raw_agents = data.get("agents")
    if not isinstance(raw_agents, list) or len(raw_agents) < 2:
        raise ScenarioError("agents", "expected a list of at least two agents")

    agents = []
    for idx, raw in enumerate(raw_agents):
        where = f"agents[{idx}]"
        if not isinstance(raw, Mapping):
            raise ScenarioError(where, "expected an object")
        kind = raw.get("kind", "sim")
        if kind not in ("sim", "llm"):
            raise ScenarioError(f"{where}.kind", f"expected 'sim' or 'llm', got {kind!r}")
        latent_raw = raw.get("latent", [0.0] * dim if kind == "llm" else None)
        if not isinstance(latent_raw, list):
            raise ScenarioError(f"{where}.latent", "expected a list of numbers")
        latent = tuple(_number(v, f"{where}.latent[{k}]") for k, v in enumerate(latent_raw))
        if len(latent) != dim:
            raise ScenarioError(f"{where}.latent", f"expected dimension {dim}, got {len(latent)}")
        rho = _number(raw.get("rho", 0.0), f"{where}.rho")
        if not 0.0 <= rho < 1.0:
            raise ScenarioError(f"{where}.rho", f"must lie in [0, 1), got {rho}")
        noise = _number(raw.get("noise_sd", 0.0), f"{where}.noise_sd")
        if noise < 0:
            raise ScenarioError(f"{where}.noise_sd", f"must be >= 0, got {noise}")
        level = raw.get("tom_level", 1)
        if isinstance(level, bool) or not isinstance(level, int) or not 0 <= level <= MAX_TOM_LEVEL:
            raise ScenarioError(f"{where}.tom_level", f"expected 0, 1 or 2, got {level!r}")
        defector = raw.get("defector", False)
        if not isinstance(defector, bool):
            raise ScenarioError(f"{where}.defector", f"expected true or false, got {defector!r}")
        alpha = raw.get("alpha")
        if alpha is not None:
            alpha = _number(alpha, f"{where}.alpha")
            if not 0.0 <= alpha <= 1.0:
                raise ScenarioError(f"{where}.alpha", f"must lie in [0, 1], got {alpha}")
        if kind == "sim" and dim == 0:
            raise ScenarioError("dimension", "simulated agents need dimension >= 1")
        if kind == "sim" and all(v == 0.0 for v in latent):
            raise ScenarioError(f"{where}.latent", "a simulated agent needs a non-zero latent vector")
        agents.append(
            AgentSpec(idx, latent, rho, noise, level, defector, alpha, kind, raw.get("name"), raw.get("role"))
        )
    if any(a.alpha is not None for a in agents) and any(a.alpha is None for a in agents):
        missing = next(a.agent_id for a in agents if a.alpha is None)
        raise ScenarioError(f"agents[{missing}].alpha", "alpha must be given for every agent or none")

    adapter = data.get("adapter")
    if any(a.kind == "llm" for a in agents) and adapter is None:
        raise ScenarioError("adapter", "LLM agents need an adapter block")
    if adapter is not None and not isinstance(adapter, Mapping):
        raise ScenarioError("adapter", "expected an object")
    extra = {k: v for k, v in data.items() if k not in ("name", "dimension", "agents", "adapter")}
    return Scenario(name, dim, tuple(agents), adapter, extra)


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(str(p), f"cannot read scenario file ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(p), f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(data)
