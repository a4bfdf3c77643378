"""Prompt templates stored as text files with ``${placeholder}`` slots."""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template
from typing import Optional

PROMPT_NAMES = ("summary", "exam", "diagnose", "assess")


@dataclass(frozen=True)
class PromptTemplate:
    system: Template
    user: Template

    @classmethod
    def parse(cls, text: str) -> "PromptTemplate":
        """Split a ``[system]`` / ``[user]`` sectioned file."""
        if "[system]" not in text or "[user]" not in text:
            raise ValueError("prompt file needs [system] and [user] sections")
        head, user = text.split("[user]", 1)
        system = head.split("[system]", 1)[1]
        return cls(Template(system.strip()), Template(user.strip()))

    def render(self, **values: object) -> tuple[str, str]:
        values = {k: str(v) for k, v in values.items()}
        return self.system.substitute(values), self.user.substitute(values)


class PromptSet:
    def __init__(self, templates: dict[str, PromptTemplate]):
        self.templates = templates

    @classmethod
    def load(cls, directory: Optional[str | os.PathLike] = None) -> "PromptSet":
        """Load the four templates, from ``directory`` if given, else the bundled ones."""
        templates = {}
        for name in PROMPT_NAMES:
            if directory is not None:
                text = (Path(directory) / f"{name}.txt").read_text(encoding="utf-8")
            else:
                text = resources.files(__package__).joinpath("templates", f"{name}.txt").read_text(
                    encoding="utf-8")
            templates[name] = PromptTemplate.parse(text)
        return cls(templates)

    def render(self, name: str, **values: object) -> tuple[str, str]:
        return self.templates[name].render(**values)
