import numpy as np
import pytest

from brcnet import DagStructure, ParameterSet, Variable

ACCEPTANCE_LINES = []


def binary(*names):
    return tuple(Variable(n, 2) for n in names)


def naive_bayes(n_inputs, class_card=2, input_card=2):
    variables = (Variable("Y", class_card),) + tuple(Variable(f"X{i}", input_card) for i in range(1, n_inputs + 1))
    return DagStructure(variables, ((),) + ((0,),) * n_inputs, 0)


def random_params(structure, rng, low=0.05):
    """Interior CPTs: every entry at least ``low`` before renormalization."""
    tables = []
    for i in range(structure.n):
        q, r = structure.table_shape(i)
        t = rng.dirichlet(np.ones(r), size=q) + low
        tables.append(t / t.sum(axis=1, keepdims=True))
    return ParameterSet(tuple(tables))


def random_dag(rng, n, class_card=2, max_card=2, sink_class=False):
    cards = [int(rng.integers(2, max_card + 1)) for _ in range(n)]
    cards[0] = class_card if class_card else cards[0]
    variables = tuple(Variable(f"V{i}", c) for i, c in enumerate(cards))
    order = list(rng.permutation(n))
    parents = [[] for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.5:
                parents[order[b]].append(order[a])
    class_index = int(rng.integers(n))
    if sink_class:
        # drop the class's outgoing edges, then give it the remaining nodes as optional parents
        for j in range(n):
            if class_index in parents[j]:
                parents[j].remove(class_index)
        parents[class_index] = [j for j in range(n) if j != class_index and rng.random() < 0.6]
    return DagStructure(variables, tuple(tuple(p) for p in parents), class_index)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def yx():
    """Two-node network Y -> X with binary variables."""
    return DagStructure(binary("Y", "X"), ((), (0,)), 0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
