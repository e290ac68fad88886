"""Averaging, maximal, and adjoint operators, plus the two experiments.

Everything that feeds a comparison is exact: averages reduce to a product
integral of the test function against an affine image of the level
indicator, so maximal values are exact maxima of exact rationals over the
query grid.  The sup over continuous dilations is replaced by a grid max;
refinement of the grid never decreases any value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import CantorSet
from .correlation import c0_constant
from .errors import (
    DegenerateMeasureError,
    DomainError,
    EmptySampleError,
    GridError,
)
from .stepfn import (
    StepFunction,
    linear_combination,
    power_integral,
    product_integral,
)

# ---------------------------------------------------------------------------
# averaging / maximal operators
# ---------------------------------------------------------------------------


def average(f: StepFunction, cset: CantorSet, k: int, r, x) -> Fraction:
    """A_r[k] f(x) = integral of f(x + r y) phi_k(y) dy, exact."""
    r, x = Fraction(r), Fraction(x)
    if r <= 0:
        raise DomainError("dilation r must be positive")
    lv = cset.level(k)
    if lv.P == 0:
        raise DegenerateMeasureError(f"level {k} is empty")
    if f.is_zero:
        return Fraction(0)
    hit = product_integral([(f, 0, 1), (cset.indicator(k), x, r)])
    return hit / (r * lv.measure)


def sigma_average(f: StepFunction, cset: CantorSet, k: int, r, x) -> Fraction:
    """integral of f(x + r y) sigma_k(y) dy, exact."""
    r, x = Fraction(r), Fraction(x)
    if r <= 0:
        raise DomainError("dilation r must be positive")
    sig = cset.sigma(k)
    return product_integral([(f, 0, 1), (sig, x, r)]) / r


def mk_operator(f: StepFunction, cset: CantorSet, k: int, x, r_grid) -> Fraction:
    """Discretized single-scale operator: max over the r grid of
    |integral f(x + r y) sigma_k(y) dy|."""
    if not r_grid:
        raise DomainError("r_grid must be nonempty")
    return max(abs(sigma_average(f, cset, k, r, x)) for r in r_grid)


@dataclass(frozen=True)
class MaximalQuery:
    points: tuple[Fraction, ...]
    r_grid: tuple[Fraction, ...]
    p: Fraction = Fraction(2)
    q: Fraction = Fraction(2)
    m_min: int = 0
    m_max: int = 0
    k_max: int | None = None

    def __post_init__(self):
        pts = tuple(Fraction(v) for v in self.points)
        grid = tuple(sorted(Fraction(v) for v in self.r_grid))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "r_grid", grid)
        object.__setattr__(self, "p", Fraction(self.p))
        object.__setattr__(self, "q", Fraction(self.q))
        if not grid:
            raise DomainError("r_grid must be nonempty")
        if any(not (1 < r < 2) for r in grid):
            raise DomainError("r_grid values must lie in (1, 2)")
        if not (1 < self.p <= self.q):
            raise DomainError("need 1 < p <= q < infinity")
        if self.m_min > self.m_max:
            raise DomainError("need m_min <= m_max")

    @property
    def a(self) -> Fraction:
        return 1 / self.p - 1 / self.q


def dyadic_r_grid(size: int) -> tuple[Fraction, ...]:
    """size equispaced interior points of (1, 2).

    Passing 2*size + 1 refines the grid in place (the old points persist),
    which is what the discretization-sensitivity checks rely on.
    """
    if size < 1:
        raise DomainError("need size >= 1")
    denom = size + 1
    return tuple(1 + Fraction(j, denom) for j in range(1, denom))


def restricted_maximal(
    f: StepFunction, cset: CantorSet, query: MaximalQuery
) -> list[tuple[Fraction, Fraction]]:
    """M f at each query point: max over the r grid and levels of averages of |f|."""
    k_top = min(query.k_max or cset.depth, cset.depth)
    fabs = f.abs()
    out = []
    for x in query.points:
        best = Fraction(0)
        for k in range(1, k_top + 1):
            for r in query.r_grid:
                best = max(best, average(fabs, cset, k, r, x))
        out.append((x, best))
    return out


def unrestricted_maximal(
    f: StepFunction, cset: CantorSet, query: MaximalQuery
) -> list[tuple[Fraction, float]]:
    """Windowed multi-scale maximal values r^a * A_r[k]|f|(x).

    The scale window m in [m_min, m_max] is part of the query and reported
    with it; each average is exact, the r^a factor is the only float.
    """
    k_top = min(query.k_max or cset.depth, cset.depth)
    a = query.a
    fabs = f.abs()
    out = []
    for x in query.points:
        best = 0.0
        for m in range(query.m_min, query.m_max + 1):
            scale = Fraction(1, 2**m) if m >= 0 else Fraction(2 ** (-m))
            for k in range(1, k_top + 1):
                for r0 in query.r_grid:
                    r = r0 * scale
                    val = average(fabs, cset, k, r, x)
                    if val == 0:
                        continue
                    weighted = float(val) * float(r) ** float(a)
                    best = max(best, weighted)
        out.append((x, best))
    return out


# ---------------------------------------------------------------------------
# the discretized adjoint
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdjointAssignment:
    """Piecewise-constant translation/dilation maps on a partition of [0, 1].

    Cells must be unions of delta_{k+1}^L grid cells; values live on the
    discretization grids.
    """

    cells: tuple[tuple[Fraction, Fraction, Fraction, Fraction], ...]  # (lo, hi, c, r)
    k: int
    spacing: Fraction

    def __post_init__(self):
        prev = Fraction(0)
        for lo, hi, c, r in self.cells:
            if lo != prev:
                raise GridError(f"assignment cells must tile [0,1]; gap at {lo}")
            if (lo / self.spacing).denominator != 1 or (hi / self.spacing).denominator != 1:
                raise GridError("assignment cell not aligned with the discretization grid")
            prev = hi
        if prev != 1:
            raise GridError("assignment cells must end at 1")

    @property
    def n_cells(self) -> int:
        return len(self.cells)


def uniform_assignment(
    cset: CantorSet, k: int, n_cells: int, pair_source: Callable[[int], tuple]
) -> AdjointAssignment:
    """Partition [0,1] into n_cells equal cells; (c, r) per cell from pair_source."""
    params = cset.params
    fine = params.M(k + 1) ** params.L
    if fine % n_cells:
        raise GridError(f"{n_cells} cells do not align with the {fine}-cell fine grid")
    spacing = Fraction(1, fine)
    cells = []
    for i in range(n_cells):
        c, r = pair_source(i)
        cells.append((Fraction(i, n_cells), Fraction(i + 1, n_cells), Fraction(c), Fraction(r)))
    return AdjointAssignment(tuple(cells), k, spacing)


def _omega_cells(omega: Sequence[int], assign: AdjointAssignment):
    cells = []
    for i in omega:
        if not (0 <= i < assign.n_cells):
            raise GridError(f"omega cell {i} outside the assignment partition")
        cells.append(assign.cells[i])
    return cells


def phi_star(
    omega: Sequence[int], cset: CantorSet, k: int, assign: AdjointAssignment
) -> StepFunction:
    """Adjoint applied to an indicator: sum over omega cells of
    |cell| * sigma_k((z - c)/r), exact."""
    sig = cset.sigma(k)
    terms = [(hi - lo, sig, c, r) for lo, hi, c, r in _omega_cells(omega, assign)]
    return linear_combination(terms)


def phi_star_apply(
    g: StepFunction, cset: CantorSet, k: int, assign: AdjointAssignment
) -> StepFunction:
    """Adjoint applied to any step function g supported in [0, 1]."""
    sig = cset.sigma(k)
    terms = []
    for lo, hi, c, r in assign.cells:
        w = g.mass_between(lo, hi)
        if w:
            terms.append((w, sig, c, r))
    return linear_combination(terms)


def phi_forward(
    f: StepFunction, cset: CantorSet, k: int, assign: AdjointAssignment
) -> StepFunction:
    """Linearized operator: x -> integral f(z) sigma_k((z - c(x))/r(x)) dz,
    constant on assignment cells."""
    sig = cset.sigma(k)
    cells = []
    for lo, hi, c, r in assign.cells:
        v = product_integral([(f, 0, 1), (sig, c, r)])
        if v:
            cells.append((lo, hi, v))
    return StepFunction.from_cells(cells) if cells else StepFunction.zero()


def phi_star_norm_power(
    omega: Sequence[int], cset: CantorSet, k: int, assign: AdjointAssignment, n: int
) -> Fraction:
    """Exact integral of |Phi_k* 1_omega|^n without materializing the sum."""
    sig = cset.sigma(k)
    terms = [(hi - lo, sig, c, r) for lo, hi, c, r in _omega_cells(omega, assign)]
    return power_integral(terms, n)


@dataclass(frozen=True)
class RatioSample:
    omega_measure: Fraction
    ratio: float
    constant_assignment: bool


@dataclass(frozen=True)
class RatioResult:
    max_ratio: float
    rhs_theoretical: float  # restricted strong-type target with C treated as 1
    n: int
    k: int
    samples: tuple[RatioSample, ...]


def restricted_type_ratio(
    cset: CantorSet,
    k: int,
    n: int,
    budget: int,
    rng: np.random.Generator,
    n_cells: int = 32,
    densities: Sequence[Fraction] = (Fraction(1, 8), Fraction(1, 4), Fraction(1, 2)),
) -> RatioResult:
    """Max over sampled (omega, assignment) of ||Phi_k* 1_omega||_n / |omega|^((n-1)/n).

    Omegas are random unions of grid cells at density 1/8, 1/4 or 1/2;
    assignments alternate between constant and cellwise-random, spanning the
    tangency-rich and transverse-rich extremes.  The reported target is the
    restricted strong-type right side with its unquantified absolute
    constant treated as 1 (labeled as such in reports).
    """
    if budget < 1:
        raise EmptySampleError("restricted_type_ratio needs budget >= 1")
    from .grids import DiscretizationGrid

    grid = DiscretizationGrid.for_level(cset.params, k)
    samples = []
    best = 0.0
    for s in range(budget):
        constant = s % 2 == 0
        if constant:
            ci = grid._rand_index(rng, grid.n_c)
            ri = grid._rand_index(rng, grid.n_r)
            pair_source = lambda i, cv=grid.c_value(ci), rv=grid.r_value(ri): (cv, rv)
        else:
            def pair_source(i):
                return (
                    grid.c_value(grid._rand_index(rng, grid.n_c)),
                    grid.r_value(grid._rand_index(rng, grid.n_r)),
                )

        assign = uniform_assignment(cset, k, n_cells, pair_source)
        density = densities[int(rng.integers(0, len(densities)))]
        count = max(1, int(n_cells * density))
        omega = sorted(int(i) for i in rng.choice(n_cells, size=count, replace=False))
        power = phi_star_norm_power(omega, cset, k, assign, n)
        measure = Fraction(count, n_cells)
        ratio = float(power) ** (1.0 / n) / float(measure) ** ((n - 1) / n)
        best = max(best, ratio)
        samples.append(RatioSample(measure, ratio, constant))
    rhs = restricted_type_target(cset, n, k)
    return RatioResult(best, rhs, n, k, tuple(samples))


def restricted_type_target(cset: CantorSet, n: int, k: int) -> float:
    """Restricted strong-type target [max(2^n n^4 P_k^(eps0-1) /
    (P_{k+1} delta_{k+1})^(n-1), C0)]^(1/n), absolute constant taken as 1."""
    params = cset.params
    eps0 = float(params.epsilon0)
    P = cset.P(k)
    meas = float(cset.level(k + 1).measure)
    first = 2.0**n * n**4 * P ** (eps0 - 1.0) / meas ** (n - 1)
    c0 = c0_constant(params, n, k)
    return max(first, c0) ** (1.0 / n)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def lp_norm(f: StepFunction, p) -> float:
    """(integral |f|^p)^(1/p); the inner integral is exact for integer p."""
    return f.lp_norm(p)


def lp_power(f: StepFunction, p: int) -> Fraction:
    return f.lp_power(p)


# ---------------------------------------------------------------------------
# differentiation experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffRow:
    x: Fraction
    r: Fraction
    sup_error: Fraction
    per_level: tuple[Fraction, ...]


def average_via_mass(f, cset: CantorSet, k: int, r, x) -> Fraction:
    """A_r[k] f(x) for any function exposing exact interval masses.

    Sums f-mass over the affine image of the level runs; agrees with
    ``average`` on step functions and extends to piecewise-linear ones.
    """
    r, x = Fraction(r), Fraction(x)
    if r <= 0:
        raise DomainError("dilation r must be positive")
    lv = cset.level(k)
    if lv.P == 0:
        raise DegenerateMeasureError(f"level {k} is empty")
    M = lv.M_k
    total = Fraction(0)
    for s, e in lv.runs():
        lo = x + r * (1 + Fraction(int(s), M))
        hi = x + r * (1 + Fraction(int(e), M))
        total += f.mass_between(lo, hi)
    return total / (r * lv.measure)


def differentiation_experiment(
    f,
    cset: CantorSet,
    points: Sequence,
    r_sequence: Sequence,
) -> list[DiffRow]:
    """For each x and shrinking r: sup over k of |A_r[k] f(x) - f(x)|, exact.

    f may be a StepFunction or a PiecewiseLinear; it is evaluated by its
    right limit at breakpoints.  Rows are recorded, not judged (divergence
    at a jump point is data, not an error).
    """
    rs = [Fraction(r) for r in r_sequence]
    if any(r2 >= r1 for r1, r2 in zip(rs, rs[1:])) or any(r <= 0 for r in rs):
        raise DomainError("r_sequence must decrease strictly to 0")
    rows = []
    for x in points:
        x = Fraction(x)
        fx = f.value_at(x, side="+")
        for r in rs:
            errs = tuple(
                abs(average_via_mass(f, cset, k, r, x) - fx)
                for k in range(1, cset.depth + 1)
            )
            rows.append(DiffRow(x, r, max(errs), errs))
    return rows


def write_diff_csv(path, rows: Sequence[DiffRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "r", "x", "value"])
        for row in rows:
            for k, err in enumerate(row.per_level, start=1):
                w.writerow([k, float(row.r), float(row.x), float(err)])
            w.writerow(["sup", float(row.r), float(row.x), float(row.sup_error)])


# ---------------------------------------------------------------------------
# L^1 failure demonstration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DemoResult:
    x0: Fraction
    r: Fraction
    rho0: Fraction
    rows: tuple[tuple[int, float], ...]  # (k, integral of the singular profile)
    growth_factor: float
    ball_masses: dict  # radius -> per-level masses
    eta_estimates: dict  # radius -> mass/(2 rho) at the deepest level


def densest_point(cset: CantorSet, window: int = 8) -> Fraction:
    """Center of a deepest-level cell with the most selected neighbors."""
    lv = cset.level(cset.depth)
    if lv.P == 0:
        raise EmptySampleError("no selected intervals at the deepest level")
    arr = np.asarray(lv.offsets, dtype=np.int64)
    hi = np.searchsorted(arr, arr + window, side="right")
    lo = np.searchsorted(arr, arr - window, side="left")
    best = int(np.argmax(hi - lo))
    o = int(arr[best])
    return 1 + Fraction(2 * o + 1, 2 * lv.M_k)


def _profile_integral(cset, k, x0: Fraction, r: Fraction, rho0: Fraction) -> float:
    """integral of h(r(y - x0)) phi_k(y) dy with h(u) = |u|^(-1/2) on |u| < rho0.

    Per-run closed form: the antiderivative of |u|^(-1/2) is 2 sign(u) |u|^(1/2).
    """
    lv = cset.level(k)
    if lv.P == 0:
        raise DegenerateMeasureError(f"level {k} is empty")
    runs = lv.runs()
    M = lv.M_k
    lo = 1 + runs[:, 0].astype(np.float64) / M
    hi = 1 + runs[:, 1].astype(np.float64) / M
    x0f, rf, rho = float(x0), float(r), float(rho0)
    cut = rho / rf  # |y - x0| < rho0/r
    a = np.maximum(lo, x0f - cut)
    b = np.minimum(hi, x0f + cut)
    mask = b > a
    a, b = a[mask] - x0f, b[mask] - x0f

    def anti(u):
        return 2.0 * np.sign(u) * np.sqrt(np.abs(u))

    total = float(np.sum(anti(b) - anti(a))) / math.sqrt(rf)
    return total / float(lv.measure)


def l1_divergence_demo(
    cset: CantorSet,
    depth: int,
    rho0,
    r=Fraction(1, 2),
    x0=None,
    radii: Sequence | None = None,
) -> DemoResult:
    """Tabulate the averaged singular profile h(x - x_j + r y) against mu_k.

    The profile is h(u) = |u|^(-1/2) truncated at rho0 (the inverse of the
    integrable g(t) = t^(-2) tail); x_j is placed so the average is centered
    on a densest point x0 of the deepest level.  Divergence is evidenced, not
    proven: the table reports its growth across k plus the empirical ball
    masses behind it.
    """
    if depth < 1 or depth > cset.depth:
        raise DomainError(f"depth must lie in 1..{cset.depth}")
    rho0, r = Fraction(rho0), Fraction(r)
    if rho0 <= 0 or r <= 0:
        raise DomainError("rho0 and r must be positive")
    x0 = Fraction(x0) if x0 is not None else densest_point(cset)
    rows = []
    for k in range(1, depth + 1):
        rows.append((k, _profile_integral(cset, k, x0, r, rho0)))
    first, last = rows[0][1], rows[-1][1]
    growth = last / first if first > 0 else math.inf
    if radii is None:
        radii = [cset.params.delta(j) for j in range(1, depth + 1)]
    ball_masses = {}
    eta = {}
    for rho in radii:
        rho = Fraction(rho)
        lo = max(Fraction(1), x0 - rho)
        hi = min(Fraction(2), x0 + rho)
        masses = []
        for k in range(1, depth + 1):
            if cset.P(k):
                masses.append(float(cset.density(k).mass_between(lo, hi)))
            else:
                masses.append(float("nan"))
        key = f"{rho.numerator}/{rho.denominator}"
        ball_masses[key] = masses
        eta[key] = masses[-1] / (2.0 * float(rho))
    return DemoResult(x0, r, rho0, tuple(rows), growth, ball_masses, eta)
