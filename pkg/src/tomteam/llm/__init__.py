"""Optional bridge to chat-completion models. Nothing in the simulated pipeline imports it."""

from .client import (
    ChatAuthError,
    ChatError,
    ChatRateLimitError,
    ChatRequest,
    ChatResponse,
    ChatServerError,
    ChatTimeoutError,
    EndpointConfig,
    chat_call,
)
from .parsing import AlignmentParseError, ParseError, extract_json, parse_alignment_response, parse_tom_response
from .prompts import RoleContext, render_alignment_prompt, render_tom_prompt

__all__ = [
    "AlignmentParseError",
    "ChatAuthError",
    "ChatError",
    "ChatRateLimitError",
    "ChatRequest",
    "ChatResponse",
    "ChatServerError",
    "ChatTimeoutError",
    "EndpointConfig",
    "ParseError",
    "RoleContext",
    "chat_call",
    "extract_json",
    "parse_alignment_response",
    "parse_tom_response",
    "render_alignment_prompt",
    "render_tom_prompt",
]
