"""Prompt templates: external text assets with named placeholders."""

from __future__ import annotations

import hashlib
from pathlib import Path

PROMPT_DIR = Path(__file__).parent / "prompts"

TEMPLATE_IDS = (
    "ir_component",
    "ir_file",
    "knowledge_gaps",
    "write_ur",
    "verify_ur",
    "judge",
    "ur_match",
)


def template_text(template_id: str) -> str:
    path = PROMPT_DIR / f"{template_id}.txt"
    if not path.exists():
        raise KeyError(f"unknown prompt template: {template_id}")
    return path.read_text(encoding="utf-8")


def template_hash(template_id: str) -> str:
    return hashlib.sha256(template_text(template_id).encode("utf-8")).hexdigest()[:12]


def render(template_id: str, **values: str) -> str:
    """Fill ``{{name}}`` placeholders; placeholder substitution is literal.

    Plain string replacement (not str.format) so braces inside source
    code never need escaping.
    """
    text = template_text(template_id)
    for name, value in values.items():
        text = text.replace("{{" + name + "}}", value)
    return text


def prompt_hash(rendered: str) -> str:
    return hashlib.sha256(rendered.encode("utf-8")).hexdigest()
