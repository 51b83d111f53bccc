import random

import pytest

from allowseq.engine import FlipStep
from allowseq.seqcore import CentredSequence, Flip, identity_sequence


def five_element_steps():
    """The classic 4-step allowable sequence on [1, 5]."""
    return [
        FlipStep([Flip(1, 2), Flip(4, 5)]),
        FlipStep([Flip(2, 4)]),
        FlipStep([Flip(1, 2), Flip(4, 5)]),
        FlipStep([Flip(2, 4)]),
    ]


def random_trace_material(rng: random.Random, max_n: int = 7):
    """A random initial sequence plus a mix of valid and junk steps."""
    n = rng.randint(2, max_n)
    lo = rng.randint(-3, 3)
    vals = rng.sample(range(-20, 40), n)
    initial = CentredSequence(lo, vals)
    state = list(vals)
    steps = []
    for _ in range(rng.randint(1, 12)):
        if rng.random() < 0.75:
            # a genuinely valid flip on the current state, when one exists
            runs = [(c, d)
                    for c in range(n) for d in range(c + 1, n)
                    if all(state[i] < state[i + 1] for i in range(c, d))]
            if not runs:
                continue
            c, d = rng.choice(runs)
        else:
            c = rng.randrange(n - 1)
            d = rng.randrange(c + 1, n)
        steps.append(FlipStep([Flip(lo + c, lo + d)]))
        state[c : d + 1] = state[c : d + 1][::-1]
    return initial, steps


@pytest.fixture
def rng():
    return random.Random(1234)
