"""Prompt templates shipped as package data, with strict slot filling."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

SLOT = re.compile(r"\{([a-z_][a-z0-9_]*)\}")

TEMPLATE_NAMES = (
    "next_step", "missing_information", "define_tool_calls", "insert_queries", "fix_query",
    "retrieve_query", "retrieve_script", "regenerate_query", "regenerate_script", "fix_code",
    "forced_retrieve", "direct_retrieve", "needs_math", "math_solution", "parse_final",
)


class TemplateError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0])


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(SLOT.findall(self.body))

    def render(self, **values: str) -> str:
        missing = sorted(self.slots - set(values))
        extra = sorted(set(values) - self.slots)
        if missing:
            raise TemplateError(f"template {self.name!r} has unfilled slot(s): {', '.join(missing)}")
        if extra:
            raise TemplateError(f"template {self.name!r} has no slot(s): {', '.join(extra)}")
        # one pass, so slot-like text inside the values is left alone
        return SLOT.sub(lambda m: str(values[m.group(1)]), self.body)


def _read(name: str) -> str:
    return resources.files("kgagent.prompts").joinpath(name).read_text(encoding="utf-8")


class PromptLibrary:
    def __init__(self) -> None:
        self.templates = {name: PromptTemplate(name, _read(f"{name}.xml")) for name in TEMPLATE_NAMES}
        self.system_graph = _read("system_graph.txt").strip()
        self.kgql_reference = _read("kgql_reference.txt").strip()
        self.script_reference = _read("script_reference.txt").strip()

    def __getitem__(self, name: str) -> PromptTemplate:
        return self.templates[name]

    def render(self, name: str, **values: str) -> str:
        return self.templates[name].render(**values)
