from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from medikal import toy_paths  # noqa: E402
from medikal.evaluation import IcdTerminology  # noqa: E402
from medikal.kg import load_graph  # noqa: E402
from medikal.linking import ExtractedEntity, LinkedEntity, QuerySet  # noqa: E402
from medikal.types import AspectCategory, EntityType  # noqa: E402


@pytest.fixture(scope="session")
def toy():
    return toy_paths()


@pytest.fixture(scope="session")
def toy_graph(toy):
    return load_graph(toy["nodes"], toy["edges"])


@pytest.fixture(scope="session")
def toy_icd(toy):
    return IcdTerminology.load(toy["icd"])


@pytest.fixture(scope="session")
def toy_mock(toy):
    return json.loads(toy["mock_responses"].read_text(encoding="utf-8"))


def make_query(graph, items, aspect=AspectCategory.MAIN_SYMPTOMS) -> QuerySet:
    """QuerySet from ``(node_id, tag)`` pairs, or bare node ids (tag taken from the graph)."""
    out = []
    for item in items:
        node, tag = item if isinstance(item, tuple) else (item, None)
        etype = EntityType(tag) if tag else graph.etype(node)
        out.append(LinkedEntity(ExtractedEntity(graph.name(node), etype, aspect), node, 1.0))
    return QuerySet(tuple(out))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
