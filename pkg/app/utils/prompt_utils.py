"""
Utility functions for managing and formatting prompts.
"""

from typing import Any, Dict

from app.llm.interface import PromptBundle, PromptPurpose


def _section(title: str, body: str) -> str:
    return f"{title}\n{body}\n\n" if body else ""


def get_prompt(template_name: str, params: Dict[str, Any]) -> str:
    """
    Get a prompt template by name with parameters.

    Args:
        template_name: Name of the template to retrieve (e.g., "SELECT")
        params: Dictionary of parameters to substitute in the template

    Returns:
        Formatted prompt string
    """
    from app.prompts import repair

    if template_name == "EVIDENCE":
        return repair.FAILURE_EVIDENCE_TEMPLATE.format(
            test=params.get("test", ""),
            message=params.get("message", ""),
            assertion_file=params.get("assertion_file", ""),
            assertion_line=params.get("assertion_line", 0),
            assertion_stmt=params.get("assertion_stmt", "") or "(unavailable)",
            stack_trace=params.get("stack_trace", "") or "(none)",
        )

    if template_name == "SELECT":
        return repair.SELECT_USER_PROMPT_TEMPLATE.format(
            evidence=params.get("evidence", ""),
            guidance_section=_section("Previous attempts with other contexts failed:", params.get("guidance", "")),
            parent=params.get("parent", ""),
            k=params.get("k", 1),
            candidates=params.get("candidates", ""),
        )

    if template_name == "FILTER":
        return repair.FILTER_USER_PROMPT_TEMPLATE.format(
            evidence=params.get("evidence", ""),
            guidance_section=_section("Previous attempts with other contexts failed:", params.get("guidance", "")),
            candidates=params.get("candidates", ""),
            F=params.get("F", 0),
        )

    if template_name == "THOUGHT":
        from app.prompts.taxonomy import render_taxonomy

        return repair.THOUGHT_USER_PROMPT_TEMPLATE.format(
            evidence=params.get("evidence", ""),
            test_file=params.get("test_file", ""),
            test_code=params.get("test_code", ""),
            context=params.get("context", "") or "(no production code was collected)",
            taxonomy=render_taxonomy(),
            history_section=_section(
                "These earlier root-cause analyses led to fixes that did not work; propose a different one:",
                params.get("history", ""),
            ),
        )

    if template_name == "FIX":
        return repair.FIX_USER_PROMPT_TEMPLATE.format(
            evidence=params.get("evidence", ""),
            test_file=params.get("test_file", ""),
            test_code=params.get("test_code", ""),
            context=params.get("context", "") or "(no production code was collected)",
            category=params.get("category", ""),
            explanation=params.get("explanation", ""),
            plan=params.get("plan", ""),
            attempts_section=_section("Earlier fixes for this analysis failed:", params.get("attempts", "")),
            func=params.get("func", ""),
        )

    if template_name == "REPAIR":
        return repair.REPAIR_USER_PROMPT_TEMPLATE.format(
            original=params.get("original", ""),
            modified=params.get("modified", ""),
            diagnostics=params.get("diagnostics", ""),
            func=params.get("func", ""),
        )

    if template_name == "EXTRACT":
        return repair.EXTRACT_USER_PROMPT_TEMPLATE.format(raw_output=params.get("raw_output", ""))

    raise ValueError(f"Unknown template name: {template_name}")


def get_system_prompt(prompt_name: str) -> str:
    """
    Get a system prompt by name.

    Args:
        prompt_name: Name of the system prompt to retrieve

    Returns:
        System prompt string
    """
    from app.prompts import repair

    if prompt_name in ("SELECT", "FILTER"):
        return repair.SELECTION_SYSTEM_PROMPT
    if prompt_name in ("THOUGHT", "FIX", "REPAIR"):
        return repair.REPAIR_SYSTEM_PROMPT
    if prompt_name == "EXTRACT":
        return repair.EXTRACT_SYSTEM_PROMPT
    raise ValueError(f"Unknown system prompt name: {prompt_name}")


def build_prompt(template_name: str, params: Dict[str, Any]) -> PromptBundle:
    return PromptBundle(
        system=get_system_prompt(template_name),
        user=get_prompt(template_name, params),
        purpose=PromptPurpose(template_name.lower()),
    )
