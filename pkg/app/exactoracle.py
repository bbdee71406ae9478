#!/usr/bin/env python3
"""Exact rational ground truth for small controllability instances"""

import itertools
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from pathlib import Path

import networkx as nx
import numpy as np

from ctrlcore import TolerancePolicy, controllable_subspace_dim, max_ctrl_index_gamma, min_leaders_ND, numerical_rank
from graphgen import LeaderPolicy, RngStream, WeightedDigraph, choose_partition
from netmodel import Representation, build_system

logger = logging.getLogger(__name__)

# Brute-force leader search bounds
BRUTE_MAX_N = 4
BRUTE_MAX_M = 3
BRUTE_MAX_GRID = 2

# Oracle suite sizes
EXAMPLE1_GRID = 2                 # parameters range over -2..2
JORDAN_SUITE_SPECS = 100
JORDAN_SUITE_MAX_N = 6
RANK_SUITE_MATRICES = 500
RANK_SUITE_ENTRY_BOUND = 9
LEADER_SUITE_MAX_N = 4
LEADER_SUITE_LAPLACIANS = 50
SUITE_SEED = 2024

SUITES = ("example1", "jordan", "rank", "leaders")


class NoControllableInputError(ValueError):
    """No input matrix within the search bounds makes the pencil controllable"""


class RationalMatrix:
    """Immutable matrix of Fractions"""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries):
        rows = tuple(tuple(Fraction(x) for x in row) for row in entries)
        widths = {len(row) for row in rows}
        if len(widths) > 1:
            raise ValueError("ragged rows")
        object.__setattr__(self, "entries", rows)
        object.__setattr__(self, "rows", len(rows))
        object.__setattr__(self, "cols", widths.pop() if widths else 0)

    def __setattr__(self, name, value):
        raise AttributeError("RationalMatrix is immutable")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RationalMatrix":
        return cls([[0] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def from_numpy(cls, array) -> "RationalMatrix":
        """Exact conversion of a float or integer array (binary floats stay exact)"""
        array = np.atleast_2d(np.asarray(array))
        return cls([[Fraction(x.item()) for x in row] for row in array])

    @classmethod
    def column(cls, values) -> "RationalMatrix":
        return cls([[v] for v in values])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, index: tuple[int, int]) -> Fraction:
        i, j = index
        return self.entries[i][j]

    def __eq__(self, other) -> bool:
        return isinstance(other, RationalMatrix) and self.entries == other.entries and self.shape == other.shape

    def __hash__(self) -> int:
        return hash((self.shape, self.entries))

    def __repr__(self) -> str:
        return f"RationalMatrix({[[str(x) for x in row] for row in self.entries]})"

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.cols != other.rows:
            raise ValueError(f"dimension mismatch {self.shape} @ {other.shape}")
        other_cols = list(zip(*other.entries)) if other.rows else [()] * other.cols
        return RationalMatrix([
            [sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in other_cols]
            for row in self.entries
        ])

    def hstack(self, *others: "RationalMatrix") -> "RationalMatrix":
        blocks = (self,) + others
        if len({b.rows for b in blocks}) > 1:
            raise ValueError("hstack needs equal row counts")
        return RationalMatrix([sum((b.entries[i] for b in blocks), ()) for i in range(self.rows)])

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries], dtype=float).reshape(self.shape)

    def to_text(self) -> str:
        """`rows cols` header, then one line of num/den tokens per row"""
        lines = [f"{self.rows} {self.cols}"]
        lines += [" ".join(f"{x.numerator}/{x.denominator}" for x in row) for row in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RationalMatrix":
        tokens = text.split()
        if len(tokens) < 2:
            raise ValueError("missing `rows cols` header")
        rows, cols = int(tokens[0]), int(tokens[1])
        values = tokens[2:]
        if len(values) != rows * cols:
            raise ValueError(f"expected {rows * cols} entries, got {len(values)}")
        return cls([[Fraction(values[i * cols + j]) for j in range(cols)] for i in range(rows)])

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_text(), encoding='utf-8')
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RationalMatrix":
        return cls.from_text(Path(path).read_text(encoding='utf-8'))


@dataclass(frozen=True)
class JordanSpec:
    """Jordan blocks as (eigenvalue, size) pairs, in matrix order"""

    blocks: tuple[tuple[Fraction, int], ...]

    def __post_init__(self):
        blocks = tuple((Fraction(value), int(size)) for value, size in self.blocks)
        if any(size < 1 for _, size in blocks):
            raise ValueError("Jordan block sizes must be >= 1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return sum(size for _, size in self.blocks)

    def _sizes_by_eigenvalue(self) -> dict[Fraction, list[int]]:
        sizes: dict[Fraction, list[int]] = {}
        for value, size in self.blocks:
            sizes.setdefault(value, []).append(size)
        return sizes

    def minpoly_degree(self) -> int:
        """Sum over eigenvalues of the largest block size"""
        return sum(max(sizes) for sizes in self._sizes_by_eigenvalue().values())

    def max_geometric_multiplicity(self) -> int:
        """Largest number of blocks sharing one eigenvalue"""
        return max((len(sizes) for sizes in self._sizes_by_eigenvalue().values()), default=0)


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    mismatches: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.mismatches


def _integer_rows(M: RationalMatrix) -> list[list[int]]:
    """Scale each row by the lcm of its denominators (rank preserving)"""
    rows = []
    for row in M.entries:
        scale = lcm(*(x.denominator for x in row)) if row else 1
        rows.append([int(x * scale) for x in row])
    return rows


def exact_rank(M: RationalMatrix) -> int:
    """Rank over the rationals by fraction-free (Bareiss) elimination"""
    a = _integer_rows(M)
    n_rows, n_cols = M.rows, M.cols
    rank, previous = 0, 1
    for col in range(n_cols):
        if rank == n_rows:
            break
        pivot = next((r for r in range(rank, n_rows) if a[r][col] != 0), None)
        if pivot is None:
            continue
        a[rank], a[pivot] = a[pivot], a[rank]
        p = a[rank][col]
        for r in range(rank + 1, n_rows):
            factor = a[r][col]
            for c in range(col + 1, n_cols):
                # exact division: every entry is a minor of the original rows
                a[r][c] = (p * a[r][c] - factor * a[rank][c]) // previous
            a[r][col] = 0
        previous = p
        rank += 1
    return rank


def _krylov_blocks(F: RationalMatrix, G: RationalMatrix) -> list[RationalMatrix]:
    if F.rows != F.cols:
        raise ValueError(f"F must be square, got {F.shape}")
    if G.rows != F.rows:
        raise ValueError(f"G must have {F.rows} rows, got {G.shape}")
    blocks = [G]
    for _ in range(1, F.rows):
        blocks.append(F @ blocks[-1])
    return blocks


def exact_ctrb_rank(F: RationalMatrix, G: RationalMatrix) -> int:
    """Exact rank of [G, FG, ..., F^(n-1) G]"""
    blocks = _krylov_blocks(F, G)
    return exact_rank(blocks[0].hstack(*blocks[1:]))


def example1_pencil(a11, a12, a21, a22, a13, a23) -> tuple[RationalMatrix, RationalMatrix]:
    """Two followers and one leader with free weights"""
    F = RationalMatrix([[a11, a12], [a21, a22]])
    G = RationalMatrix.column([a13, a23])
    return F, G


def example1_polynomial(a11, a12, a21, a22, a13, a23) -> Fraction:
    """Determinant of [g, F g] for the two-follower pencil"""
    a11, a12, a21, a22, a13, a23 = (Fraction(x) for x in (a11, a12, a21, a22, a13, a23))
    return a21 * a13**2 + a22 * a13 * a23 - a11 * a13 * a23 - a12 * a23**2


def example1_on_manifold(a11, a12, a21, a22, a13, a23) -> bool:
    """True iff the parameters lie on the uncontrollability manifold"""
    return example1_polynomial(a11, a12, a21, a22, a13, a23) == 0


def exact_minpoly_degree(M: RationalMatrix) -> int:
    """Smallest d with I, M, ..., M^d linearly dependent"""
    if M.rows != M.cols:
        raise ValueError(f"matrix must be square, got {M.shape}")
    n = M.rows
    if n == 0:
        return 0

    power = RationalMatrix.identity(n)
    flattened = []
    for degree in range(n + 1):
        flattened.append([x for row in power.entries for x in row])
        if exact_rank(RationalMatrix(flattened)) < len(flattened):
            return degree
        power = power @ M
    return n


def _grid_directions(n: int, grid: int) -> list[tuple[int, ...]]:
    """Nonzero integer vectors in [-grid, grid]^n, one per +/- pair"""
    directions = []
    for v in itertools.product(range(-grid, grid + 1), repeat=n):
        first = next((x for x in v if x != 0), 0)
        if first > 0:
            directions.append(v)
    return directions


def brute_force_ND(F: RationalMatrix, max_m: int = BRUTE_MAX_M, grid: int = 1) -> int:
    """Smallest input width m making (F, B) controllable for some integer B

    Only distinct columns up to sign are tried; repeated, negated or zero columns
    never enlarge the controllable subspace.

    Args:
        F: Square follower matrix, n <= 4
        max_m: Largest width to try (<= 3)
        grid: Entries of B range over -grid..grid (<= 2)

    Returns:
        The minimal number of leaders found

    Raises:
        ValueError: If the bounds are exceeded
        NoControllableInputError: If no B within the bounds works
    """
    n = F.rows
    if F.rows != F.cols:
        raise ValueError(f"F must be square, got {F.shape}")
    if n > BRUTE_MAX_N or not 1 <= max_m <= BRUTE_MAX_M or not 1 <= grid <= BRUTE_MAX_GRID:
        raise ValueError(f"search bounds exceeded (n={n}, max_m={max_m}, grid={grid})")

    # Krylov rows of each candidate column, computed once
    krylov = []
    for v in _grid_directions(n, grid):
        blocks = _krylov_blocks(F, RationalMatrix.column(v))
        krylov.append([list(row) for row in blocks[0].hstack(*blocks[1:]).entries])

    for m in range(1, max_m + 1):
        for combo in itertools.combinations(range(len(krylov)), m):
            rows = [sum((krylov[c][i] for c in combo), []) for i in range(n)]
            if exact_rank(RationalMatrix(rows)) == n:
                return m

    raise NoControllableInputError(f"no controllable input with width <= {max_m} on grid {grid}")


def build_jordan(spec: JordanSpec) -> RationalMatrix:
    """Block-diagonal matrix of upper Jordan blocks in the order given"""
    n = spec.n
    entries = [[Fraction(0)] * n for _ in range(n)]
    offset = 0
    for value, size in spec.blocks:
        for i in range(size):
            entries[offset + i][offset + i] = value
            if i + 1 < size:
                entries[offset + i][offset + i + 1] = Fraction(1)
        offset += size
    return RationalMatrix(entries)


def _integer_partitions(n: int, largest: int | None = None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _integer_partitions(n - first, first):
            yield (first,) + rest


def jordan_structures(n: int):
    """Every Jordan structure of size n, distinct eigenvalues labelled 0, 1, 2, ..."""
    for group_sizes in _integer_partitions(n):
        choices = [list(_integer_partitions(size)) for size in group_sizes]
        for blocks_per_eigenvalue in itertools.product(*choices):
            blocks = [
                (eigenvalue, size)
                for eigenvalue, sizes in enumerate(blocks_per_eigenvalue)
                for size in sizes
            ]
            yield JordanSpec(tuple(blocks))


def random_jordan_spec(generator: np.random.Generator, max_n: int = JORDAN_SUITE_MAX_N) -> JordanSpec:
    """Random Jordan structure with small integer eigenvalues (repeats likely)"""
    n = int(generator.integers(1, max_n + 1))
    blocks = []
    remaining = n
    while remaining:
        size = int(generator.integers(1, remaining + 1))
        value = int(generator.integers(-2, 3))
        blocks.append((value, size))
        remaining -= size
    return JordanSpec(tuple(blocks))


def _example1_suite(result: SuiteResult) -> None:
    values = range(-EXAMPLE1_GRID, EXAMPLE1_GRID + 1)
    for point in itertools.product(values, repeat=6):
        on_manifold = example1_on_manifold(*point)
        uncontrollable = exact_ctrb_rank(*example1_pencil(*point)) < 2
        result.checked += 1
        if on_manifold != uncontrollable:
            result.mismatches.append(f"example1 {point}: manifold={on_manifold} rank<2={uncontrollable}")


def _jordan_suite(result: SuiteResult) -> None:
    generator = RngStream(SUITE_SEED, 1).generator()
    tol = TolerancePolicy()
    for _ in range(JORDAN_SUITE_SPECS):
        spec = random_jordan_spec(generator)
        M = build_jordan(spec)
        expected = spec.minpoly_degree()
        exact = exact_minpoly_degree(M)
        gamma = max_ctrl_index_gamma(M.to_numpy(), tol)
        result.checked += 1
        if not exact == gamma == expected:
            result.mismatches.append(f"jordan {spec.blocks}: expected {expected}, exact {exact}, float {gamma}")


def _rank_suite(result: SuiteResult) -> None:
    generator = RngStream(SUITE_SEED, 2).generator()
    bound = RANK_SUITE_ENTRY_BOUND
    for index in range(RANK_SUITE_MATRICES):
        M = generator.integers(-bound, bound + 1, size=(5, 5))
        if index % 2:
            # make every other matrix rank deficient
            r = int(generator.integers(0, 5))
            M[r] = generator.integers(-1, 2) * M[(r + 1) % 5] + generator.integers(-1, 2) * M[(r + 2) % 5]
        exact = exact_rank(RationalMatrix.from_numpy(M))
        approx = numerical_rank(M.astype(float))
        result.checked += 1
        if exact != approx:
            result.mismatches.append(f"rank {M.tolist()}: exact {exact}, float {approx}")


def random_grounded_laplacian(generator: np.random.Generator, n_followers: int) -> np.ndarray:
    """Grounded Laplacian L_ff of a random connected graph with one leader

    The graph has n_followers + 1 vertices, integer weights 1..3 and the leader
    is the last vertex.
    """
    n = n_followers + 1
    while True:
        graph = nx.gnp_random_graph(n, 0.6, seed=int(generator.integers(0, 2**32)))
        if nx.is_connected(graph):
            break
    w = np.zeros((n, n))
    for u, v in graph.edges():
        w[u, v] = w[v, u] = int(generator.integers(1, 4))
    g = WeightedDigraph(n, w)
    system = build_system(g, choose_partition(g, 1, LeaderPolicy.LAST_INDICES), Representation.LAPLACIAN)
    return system.F


def _check_leaders(result: SuiteResult, label: str, F: RationalMatrix, expected: int) -> None:
    try:
        found = brute_force_ND(F)
    except NoControllableInputError:
        found = None
    result.checked += 1
    if found != expected and not (found is None and expected > BRUTE_MAX_M):
        result.mismatches.append(f"leaders {label}: expected {expected}, brute force {found}")


def _check_grounded_laplacian(result: SuiteResult, F: np.ndarray) -> None:
    """Brute force against the float leader count; cases needing more than one leader are noted"""
    expected = min_leaders_ND(F)
    if expected != 1:
        # equal integer weights can give a symmetric graph a repeated eigenvalue
        result.notes.append(f"laplacian {F.tolist()}: needs {expected} leaders")
    _check_leaders(result, f"laplacian {F.tolist()}", RationalMatrix.from_numpy(F), expected)


def _leaders_suite(result: SuiteResult) -> None:
    for n in range(1, LEADER_SUITE_MAX_N + 1):
        for spec in jordan_structures(n):
            _check_leaders(result, str(spec.blocks), build_jordan(spec), spec.max_geometric_multiplicity())

    generator = RngStream(SUITE_SEED, 3).generator()
    for _ in range(LEADER_SUITE_LAPLACIANS):
        n_followers = int(generator.integers(1, LEADER_SUITE_MAX_N + 1))
        _check_grounded_laplacian(result, random_grounded_laplacian(generator, n_followers))


_SUITE_RUNNERS = {
    "example1": _example1_suite,
    "jordan": _jordan_suite,
    "rank": _rank_suite,
    "leaders": _leaders_suite,
}


def run_suite(name: str) -> SuiteResult:
    """Run one oracle agreement suite by name"""
    if name not in _SUITE_RUNNERS:
        raise ValueError(f"unknown suite {name!r}, expected one of {', '.join(SUITES)}")
    result = SuiteResult(name)
    start = time.perf_counter()
    _SUITE_RUNNERS[name](result)
    result.elapsed = time.perf_counter() - start
    logger.info(f"Suite {name}: {result.checked} checked, {len(result.mismatches)} mismatches, {len(result.notes)} notes in {result.elapsed:.1f}s")
    return result


def oracle_agrees(F, G) -> bool:
    """Exact Krylov rank equals the floating-point controllable subspace dimension"""
    exact = exact_ctrb_rank(RationalMatrix.from_numpy(F), RationalMatrix.from_numpy(np.asarray(G).reshape(len(F), -1)))
    return exact == controllable_subspace_dim(F, G)
