#!/usr/bin/env python3
"""Random weighted topologies, arc-weight noise and leader selection"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

# Default generator settings
DEFAULT_ER_P = 0.4
DEFAULT_WS_K = 2      # neighbours per side, ring-lattice degree 4
DEFAULT_WS_P = 0.5
DEFAULT_BA_T = 8
DEFAULT_BA_M = 3

BASE_WEIGHT = 1.0
NOISE_HALF_WIDTH = 0.5  # epsilon ~ U[-0.5, 0.5]

# Edge-list format
EDGE_LIST_HEADER = "n {n} directed weighted"

# Substream layout: ((k_index << 32) | trial_index) << 2 | purpose
TRIAL_BITS = 32
PURPOSE_BITS = 2
MAX_SEED = 2**64


class GraphKind(str, Enum):
    ER = "ER"
    WS = "WS"
    BA = "BA"


class NoiseMode(str, Enum):
    STRUCTURED = "Structured"
    UNSTRUCTURED = "Unstructured"


class LeaderPolicy(str, Enum):
    LAST_INDICES = "LastIndices"
    UNIFORM_RANDOM = "UniformRandom"


class StreamPurpose(int, Enum):
    TOPOLOGY = 0
    NOISE = 1
    PARTITION = 2


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: equal (master_seed, substream_index) pairs always
    yield the same samples, whatever order streams are consumed in."""

    master_seed: int
    substream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "substream_index"):
            value = getattr(self, name)
            if not 0 <= value < MAX_SEED:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    @classmethod
    def for_trial(cls, master_seed: int, k_index: int, trial_index: int,
                  purpose: StreamPurpose) -> "RngStream":
        """Stream for one purpose of one Monte Carlo trial

        Args:
            master_seed: Experiment seed
            k_index: Position of the noise coefficient in the k grid
            trial_index: Trial number within that k
            purpose: Which draw the stream feeds (topology, noise, partition)

        Returns:
            The trial's substream
        """
        if not 0 <= trial_index < 2**TRIAL_BITS:
            raise ValueError(f"trial_index out of range: {trial_index}")
        if k_index < 0:
            raise ValueError(f"k_index must be non-negative, got {k_index}")
        index = (((k_index << TRIAL_BITS) | trial_index) << PURPOSE_BITS) | int(purpose)
        return cls(master_seed, index)

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator positioned at the start of this stream"""
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.substream_index,))
        return np.random.Generator(np.random.PCG64(seq))


class GraphSpec(BaseModel):
    """Random-graph family and its parameters"""

    model_config = ConfigDict(frozen=True)

    kind: GraphKind
    n: int = Field(ge=2)
    er_p: float = Field(DEFAULT_ER_P, ge=0.0, le=1.0)
    ws_k: int = Field(DEFAULT_WS_K, ge=1)
    ws_p: float = Field(DEFAULT_WS_P, ge=0.0, le=1.0)
    ba_t: int = Field(DEFAULT_BA_T, ge=1)
    ba_m: int = Field(DEFAULT_BA_M, ge=1)

    @model_validator(mode="after")
    def _check_family(self):
        if self.kind is GraphKind.WS and 2 * self.ws_k >= self.n:
            raise ValueError(f"WS requires 2*ws_k < n (ws_k={self.ws_k}, n={self.n})")
        if self.kind is GraphKind.BA:
            seed_size = self.n - self.ba_t
            if seed_size < self.ba_m:
                raise ValueError(
                    f"BA requires n - ba_t >= ba_m (n={self.n}, ba_t={self.ba_t}, ba_m={self.ba_m})"
                )
        return self


class NoiseSpec(BaseModel):
    """Arc-weight perturbation epsilon/k"""

    model_config = ConfigDict(frozen=True)

    mode: NoiseMode
    k: float = Field(gt=0)


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    """Weighted digraph; w[i][j] is the weight of arc j -> i"""

    n: int
    w: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.shape != (self.n, self.n):
            raise ValueError(f"weight matrix must be {self.n}x{self.n}, got {w.shape}")
        if np.any(np.diag(w) != 0):
            raise ValueError("weight matrix must have a zero diagonal")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_matrix(cls, w) -> "WeightedDigraph":
        w = np.asarray(w, dtype=float)
        return cls(w.shape[0], w)

    @property
    def arc_count(self) -> int:
        return int(np.count_nonzero(self.w))

    @property
    def edge_count(self) -> int:
        """Number of vertex pairs joined in at least one direction"""
        joined = (self.w != 0) | (self.w.T != 0)
        return int(np.count_nonzero(np.triu(joined, k=1)))

    def degrees(self) -> np.ndarray:
        """Undirected degree per vertex"""
        joined = (self.w != 0) | (self.w.T != 0)
        return joined.sum(axis=1)


@dataclass(frozen=True)
class Partition:
    """Follower / leader split of the vertex set"""

    followers: tuple[int, ...]
    leaders: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "followers", tuple(int(i) for i in self.followers))
        object.__setattr__(self, "leaders", tuple(int(i) for i in self.leaders))
        if set(self.followers) & set(self.leaders):
            raise ValueError("followers and leaders must be disjoint")
        if len(set(self.followers)) != len(self.followers) or len(set(self.leaders)) != len(self.leaders):
            raise ValueError("partition contains repeated vertices")

    @property
    def n(self) -> int:
        return len(self.followers) + len(self.leaders)

    def validate_for(self, n: int) -> None:
        """Raise ValueError unless the partition covers exactly vertices 0..n-1"""
        if sorted(self.followers + self.leaders) != list(range(n)):
            raise ValueError(f"partition does not cover vertices 0..{n - 1}")


def _networkx_seed(rng: RngStream) -> int:
    return int(rng.generator().integers(0, 2**32))


def _base_graph(spec: GraphSpec, seed: int) -> nx.Graph:
    if spec.kind is GraphKind.ER:
        return nx.gnp_random_graph(spec.n, spec.er_p, seed=seed)
    if spec.kind is GraphKind.WS:
        return nx.watts_strogatz_graph(spec.n, 2 * spec.ws_k, spec.ws_p, seed=seed)
    seed_graph = nx.complete_graph(spec.n - spec.ba_t)
    if seed_graph.number_of_edges() == 0:
        # a lone seed vertex has degree 0; the first newcomer attaches to it directly
        seed_graph.add_edge(0, 1)
    return nx.barabasi_albert_graph(spec.n, spec.ba_m, seed=seed, initial_graph=seed_graph)


def generate_topology(spec: GraphSpec, rng: RngStream) -> WeightedDigraph:
    """Generate a symmetric unit-weight topology of the requested family

    Args:
        spec: Family and parameters
        rng: Stream the generator draws from

    Returns:
        Digraph with each undirected edge stored as two arcs of weight 1
    """
    graph = _base_graph(spec, _networkx_seed(rng))
    w = nx.to_numpy_array(graph, nodelist=list(range(spec.n)), weight=None) * BASE_WEIGHT
    return WeightedDigraph(spec.n, w)


def apply_noise(g: WeightedDigraph, noise: NoiseSpec, rng: RngStream) -> WeightedDigraph:
    """Perturb arc weights by epsilon/k, epsilon uniform on [-0.5, 0.5]

    Structured noise only touches existing arcs; unstructured noise touches every
    off-diagonal entry. Each directed entry gets its own sample.

    Args:
        g: Graph to perturb
        noise: Mode and noise coefficient
        rng: Stream for the samples

    Returns:
        Perturbed copy of g

    Raises:
        ValueError: If noise.k is not positive
    """
    if not noise.k > 0:
        raise ValueError(f"noise coefficient k must be positive, got {noise.k}")

    eps = rng.generator().uniform(-NOISE_HALF_WIDTH, NOISE_HALF_WIDTH, size=(g.n, g.n))
    if noise.mode is NoiseMode.STRUCTURED:
        mask = g.w != 0
    else:
        mask = ~np.eye(g.n, dtype=bool)

    w = g.w + np.where(mask, eps / noise.k, 0.0)
    return WeightedDigraph(g.n, w)


def choose_partition(g: WeightedDigraph, n_l: int, policy: LeaderPolicy,
                     rng: RngStream | None = None) -> Partition:
    """Pick n_l leaders; the remaining vertices are followers

    Args:
        g: Graph to partition
        n_l: Number of leaders (1 <= n_l < g.n)
        policy: LastIndices takes the highest-numbered vertices, UniformRandom samples
            without replacement
        rng: Required for UniformRandom

    Returns:
        Partition with ascending follower and leader lists
    """
    if not 1 <= n_l < g.n:
        raise ValueError(f"n_l must satisfy 1 <= n_l < {g.n}, got {n_l}")

    if policy is LeaderPolicy.LAST_INDICES:
        leaders = range(g.n - n_l, g.n)
    else:
        if rng is None:
            raise ValueError("UniformRandom leader policy needs an RngStream")
        leaders = sorted(rng.generator().choice(g.n, size=n_l, replace=False).tolist())

    leader_set = set(leaders)
    followers = [i for i in range(g.n) if i not in leader_set]
    return Partition(tuple(followers), tuple(leaders))


def write_edge_list(g: WeightedDigraph, path: str | Path) -> Path:
    """Write g as an edge list, one `i j w` line per nonzero entry w[i][j], row-major"""
    path = Path(path)
    lines = [EDGE_LIST_HEADER.format(n=g.n)]
    for i, j in zip(*np.nonzero(g.w)):
        lines.append(f"{i} {j} {float(g.w[i, j])!r}")
    path.write_text("\n".join(lines) + "\n", encoding='utf-8')
    logger.info(f"Wrote {g.arc_count} arcs to {path}")
    return path


def read_edge_list(path: str | Path) -> WeightedDigraph:
    """Read a graph written by write_edge_list

    Raises:
        ValueError: On a malformed header or arc line
        OSError: If the file cannot be read
    """
    path = Path(path)
    lines = path.read_text(encoding='utf-8').splitlines()
    if not lines:
        raise ValueError(f"{path}: empty edge list")

    header = lines[0].split()
    if len(header) != 4 or header[0] != "n" or header[2:] != ["directed", "weighted"]:
        raise ValueError(f"{path}: bad header {lines[0]!r}")
    try:
        n = int(header[1])
    except ValueError:
        raise ValueError(f"{path}: bad vertex count {header[1]!r}") from None

    w = np.zeros((n, n))
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'i j w', got {line!r}")
        try:
            i, j, weight = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse {line!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"{path}:{lineno}: vertex index out of range")
        if i == j:
            raise ValueError(f"{path}:{lineno}: self-loops are not allowed")
        w[i, j] = weight

    return WeightedDigraph(n, w)
