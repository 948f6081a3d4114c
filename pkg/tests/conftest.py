from __future__ import annotations

import random
from pathlib import Path

import pytest

from schemajoin.kb import Concept, KnowledgeGraph, ingest_file
from schemajoin.pipeline import KnowledgeBase

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def pie_graph() -> KnowledgeGraph:
    return ingest_file(FIXTURES / "pies.tsv").graph


@pytest.fixture(scope="session")
def pie_kb(pie_graph) -> KnowledgeBase:
    return KnowledgeBase.build(pie_graph, (1, 2, 4))


def graph_from_edges(edges) -> KnowledgeGraph:
    g = KnowledgeGraph()
    for a, b in edges:
        g.add_edge(Concept(f"/x/{a}", str(a), "t"), Concept(f"/x/{b}", str(b), "t"))
    return g


def random_edges(rng: random.Random, n: int, m: int) -> list[tuple[str, str]]:
    edges = set()
    while len(edges) < m:
        a, b = rng.randrange(n), rng.randrange(n)
        if a != b:
            edges.add((f"c{a}", f"c{b}"))
    return sorted(edges)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
