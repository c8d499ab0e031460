"""Prompt templates for text-based agents.

Two role families are supported, ``project_manager`` and ``debater``, each
with a level 0, 1 and 2 response schema. Rendering is pure string work so
every prompt can be checked against fixtures offline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

MAX_LEVEL = 2

_PM_SCHEMAS = {
    0: """{
  'ToM_level0': {
    'belief': 'no belief',
    'action': '{x_0 The instruction for engineers. Begin with "The Engineer should ..."}'
  }
}""",
    1: """{
  'ToM_level1': {
    'belief': '{y_1 inferred actions for engineers}',
    'explanation': '{Concise explanation of inferring actions y_1 and choosing x_1 based on this belief}',
    'action': '{x_1 The instruction for engineers. Begin with "The Engineer should ..."}'
  }
}""",
    2: """{
  "ToM_level1": {
    "belief": "{y_1 inferred actions for engineers}",
    "explanation": "{Concise explanation of inferring actions y_1 and choosing x_1 based on this belief}",
    "action": "{x_1 The instruction for engineers. Begin with 'The Engineer should ...'}"
  },
  "ToM_level2": {
    "belief": "{y_2 inferred actions for engineers based on your action x_1}",
    "explanation": "{Concise explanation of inferring actions y_2 and choosing x_2 based on this belief}",
    "action": "{x_2 The instruction for engineers. Begin with 'The Engineer should ...'}"
  }
}""",
}

_DEBATER_SCHEMAS = {
    0: """{
  "ToM_level0": {
    "belief": "No belief",
    "action": "{x_0: your arguments}"
  }
}""",
    1: """{
  "ToM_level1": {
    "belief": "{y_1: inferred actions for teammate debaters, such as the angle of argument}",
    "explanation": "{Concise explanation of inferring actions y_1 and choosing x_1 based on this belief}",
    "action": "{x_1: your arguments}"
  }
}""",
    2: """{
  "ToM_level1": {
    "belief": "{y_1: inferred actions for teammate debaters, such as the angle of argument}",
    "explanation": "{Concise explanation of inferring actions y_1 and choosing x_1 based on this belief}",
    "action": "{x_1: your arguments}"
  },
  "ToM_level2": {
    "belief": "{y_2: inferred actions for teammate debaters based on your arguments x_1}",
    "explanation": "{Concise explanation of inferring actions y_2 and choosing x_2 based on this belief}",
    "action": "{x_2: your arguments}"
  }
}""",
}

_INTROS = {
    "project_manager": "There are engineers in the team. Your current action is {action}.",
    "debater": "You are a member of the debating team. The debate topic is {topic}, and your current action is {action}.",
}

_BODY = (
    "You have the ability of {k} Level Theory of Mind. "
    "You can **recursively** infer the mental states of other agents in the team.\n"
    "Then, you will provide outline {{x_i}} based on this belief\n"
)

_INSTRUCTION = (
    "## Please explain your thought process for inferring others' actions `{y_i}' and choosing `{x_i}' "
    "at each level. Remember MUST Respond in the following JSON format, including each key:"
)

SCHEMAS = {"project_manager": _PM_SCHEMAS, "debater": _DEBATER_SCHEMAS}


@dataclass(frozen=True)
class RoleContext:
    role: str = "project_manager"
    action: str = "none"
    topic: str | None = None

    def __post_init__(self):
        if self.role not in SCHEMAS:
            raise ValueError(f"unknown role {self.role!r}; expected one of {sorted(SCHEMAS)}")
        if self.role == "debater" and not self.topic:
            raise ValueError("the debater role needs a topic")


def tom_schema(role: str, k: int) -> str:
    if k not in range(MAX_LEVEL + 1):
        raise ValueError(f"ToM level must be 0, 1 or 2, got {k}")
    return SCHEMAS[role][k]


def render_tom_prompt(role_context: RoleContext | Mapping[str, str], k: int, history_digest: str = "") -> str:
    """Level-k belief/action prompt for one agent."""
    ctx = role_context if isinstance(role_context, RoleContext) else RoleContext(**role_context)
    schema = tom_schema(ctx.role, k)
    parts = [_INTROS[ctx.role].format(action=ctx.action, topic=ctx.topic), _BODY.format(k=k)]
    if history_digest:
        parts.append("# Interaction history:\n" + history_digest.rstrip() + "\n")
    parts += [_INSTRUCTION, "", schema, ""]
    return "\n".join(parts)


def alignment_schema(names: list[str], subject: str = "Engineer") -> str:
    blocks = []
    for name in names:
        blocks.append(
            f'    "{name}": {{\n'
            f'        "score": float (-1 to 1). Belief alignment score for {name},\n'
            f'        "explanation": Brief explanation of {name}\'s alignment score in 10 words or less,\n'
            f'        "justification": Detailed justification of {name}\'s alignment score, considering their '
            f"implementation and your belief model, in 30-50 words\n"
            f"    }}"
        )
    return "{\n" + ",\n".join(blocks) + "\n}"


def render_alignment_prompt(belief_text: str, actions: Mapping[str, str], subject: str = "Engineer") -> str:
    """Self-evaluation prompt asking for one score in [-1, 1] per named peer."""
    if not actions:
        raise ValueError("the alignment prompt needs at least one action")
    names = list(actions)
    return "\n".join(
        [
            f"You will provide your belief alignment scores for each {subject}'s implementation "
            "based on your belief model.",
            f"{subject}'s actions: " + json.dumps(dict(actions), indent=4, ensure_ascii=False),
            "# Your belief model:",
            "",
            belief_text.strip(),
            "",
            "# Instruction:",
            "",
            f"For each {subject}, provide a belief alignment score between -1 and 1.",
            "Respond in the following JSON format:",
            alignment_schema(names, subject),
            "",
        ]
    )
