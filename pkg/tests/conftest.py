"""Shared fixtures: the deterministic reference set, accepted random sets,
and random-input helpers used across the suite."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from cantormax import build_deterministic, construct, custom, fixed_dimension
from cantormax.stepfn import StepFunction

# Deterministic two-level reference family: K=2, N=(4,4),
# level-1 selection {(2),(4)}, level-2 {(2,1),(2,3),(4,2),(4,4)}.
FIXTURE_A_SELECTIONS = [
    {(2,), (4,)},
    {(2, 1), (2, 3), (4, 2), (4, 4)},
]


@pytest.fixture(scope="session")
def fixture_a_params():
    return custom([4, 4], [Fraction(1, 4), Fraction(1, 4)])


@pytest.fixture(scope="session")
def fixture_a(fixture_a_params):
    return build_deterministic(FIXTURE_A_SELECTIONS, fixture_a_params)


@pytest.fixture(scope="session")
def toy88_set():
    """Small accepted set on a custom N=(8,8,8) schedule; full grids stay tiny."""
    params = custom(
        [8, 8, 8],
        [Fraction(1, 4), Fraction(1, 4), Fraction(1, 4)],
        seed=23,
        max_retries=50,
    )
    cset, _ = construct(params, gate_c_budget=4)
    return cset


@pytest.fixture(scope="session")
def z8_set():
    """Accepted fixed-dimension set, N=8, eps=1/4, K=3."""
    cset, _ = construct(
        fixed_dimension(8, Fraction(1, 4), 3, seed=11, max_retries=50), gate_c_budget=4
    )
    return cset


@pytest.fixture(scope="session")
def z4_deep_set():
    """Accepted fixed-dimension set, N=4, eps=3/10, K=4 (demo depth)."""
    cset, _ = construct(
        fixed_dimension(4, Fraction(3, 10), 4, seed=5, max_retries=50), gate_c_budget=4
    )
    return cset


@pytest.fixture(scope="session")
def z16_set():
    """Accepted fixed-dimension set at the production size N=16, K=3."""
    cset, _ = construct(
        fixed_dimension(16, Fraction(1, 4), 3, seed=1, max_retries=50), gate_c_budget=6
    )
    return cset


def random_step(rnd: random.Random, max_cells: int = 6, span: int = 40) -> StepFunction:
    """Random compactly supported step function with small rational data."""
    m = rnd.randint(1, max_cells)
    pts = sorted(rnd.sample(range(-span, span), m + 1))
    den = rnd.choice([1, 2, 3, 4, 8])
    bps = sorted({Fraction(p, den) for p in pts})
    while len(bps) < 2:
        bps.append(bps[-1] + 1)
    vals = [Fraction(rnd.randint(-5, 5), rnd.choice([1, 2, 3])) for _ in range(len(bps) - 1)]
    return StepFunction.from_breakpoints(bps, vals)


def random_fraction(rnd: random.Random, lo: Fraction, hi: Fraction, den: int = 64) -> Fraction:
    lo, hi = Fraction(lo), Fraction(hi)
    t = Fraction(rnd.randint(0, den), den)
    return lo + (hi - lo) * t
