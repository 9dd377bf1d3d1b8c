"""Shared generators for tests."""

import random

from btdiversity.treebank import DUMMY_TERMINAL, ParseTree


def random_tree(rng: random.Random, max_nodes: int = 8, labels: str = "ABC") -> ParseTree:
    """Random masked tree with 1..max_nodes nodes (pre-terminals count as nodes)."""
    budget = [rng.randint(1, max_nodes)]

    def grow():
        budget[0] -= 1
        label = rng.choice(labels)
        if budget[0] <= 0 or rng.random() < 0.35:
            return ParseTree(label, terminal=DUMMY_TERMINAL)
        kids = []
        for _ in range(rng.randint(1, 3)):
            if budget[0] <= 0:
                break
            kids.append(grow())
        return ParseTree(label, tuple(kids))

    return grow()


def random_distribution(rng: random.Random, size: int):
    weights = [rng.random() ** 3 for _ in range(size)]
    if rng.random() < 0.3:  # exact ties
        weights = [round(w, 1) + 0.05 for w in weights]
    total = sum(weights)
    return [w / total for w in weights]
