from .agent import LlmDecision, LlmPolicy, comm_report_from_decision
from .client import HttpChatBackend, LlmError, QueryResult, backend_from_config, query
from .mock import MockLLM
from .observation import FormattedObservation, format_observation, parse_observation
from .parse import extract_json_object, parse_decision
from .prompts import PromptMessages, PromptStrategy, build_messages, describe_network, system_message

__all__ = [
    "FormattedObservation",
    "HttpChatBackend",
    "LlmDecision",
    "LlmError",
    "LlmPolicy",
    "MockLLM",
    "PromptMessages",
    "PromptStrategy",
    "QueryResult",
    "backend_from_config",
    "build_messages",
    "comm_report_from_decision",
    "describe_network",
    "extract_json_object",
    "format_observation",
    "parse_decision",
    "parse_observation",
    "query",
    "system_message",
]
