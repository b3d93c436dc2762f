"""Shared fixtures: deterministic sample vectors and refactored pairs."""

from __future__ import annotations

import pytest

from idiobench.catalog import IdiomKind, enumerate_matrix
from idiobench.refactor import refactor_pair
from idiobench.synth import CodePair, synthesize


def stratified(items: list, limit: int, seed: int = 0) -> list:
    """Deterministic systematic sample with a seeded offset."""
    if limit >= len(items):
        return list(items)
    import random

    total = len(items)
    offset = random.Random(seed).randrange(total)
    picks = sorted((offset + (i * total) // limit) % total for i in range(limit))
    return [items[i] for i in picks]


def sample_vectors(idiom: IdiomKind, limit: int, seed: int = 0) -> list:
    return stratified(enumerate_matrix(idiom), limit, seed)


@pytest.fixture(scope="session")
def pair_per_idiom() -> dict[IdiomKind, CodePair]:
    """One refactored, compilable pair for every idiom (size 100 where sized)."""
    out: dict[IdiomKind, CodePair] = {}
    for idiom in IdiomKind:
        vectors = enumerate_matrix(idiom)
        sized = [v for v in vectors if v.size == 100]
        chosen = sized[0] if sized else vectors[len(vectors) // 2]
        out[idiom] = refactor_pair(synthesize(chosen))
    return out
