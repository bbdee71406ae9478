#!/usr/bin/env python3
"""Numerical controllability tests and eigenvalue multiplicity analysis"""

import logging
from enum import Enum

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.cluster.hierarchy import fcluster, linkage

from graphgen import RngStream

logger = logging.getLogger(__name__)

# Singular values at or below rel_tol * sigma_max * max(rows, cols) count as zero
DEFAULT_REL_TOL = 2.0 ** -46
# Absolute |det| cutoff, only used by the DetThreshold mode
DEFAULT_DET_THRESHOLD = 1e-10
# Eigenvalues closer than CLUSTER_REL_TOL * (1 + spectral radius) are merged
CLUSTER_REL_TOL = 1e-8
# Random probe vectors used for the minimal polynomial degree; keep it odd
DEFAULT_PROBES = 5
DEFAULT_PROBE_SEED = 0


class RankMethod(str, Enum):
    SVD_RANK = "SvdRank"
    DET_THRESHOLD = "DetThreshold"


class EigenSolveError(RuntimeError):
    """Eigenvalue computation failed"""


class TolerancePolicy(BaseModel):
    """How a numerical rank is decided"""

    model_config = ConfigDict(frozen=True)

    method: RankMethod = RankMethod.SVD_RANK
    rel_tol: float = Field(DEFAULT_REL_TOL, gt=0)
    det_threshold: float = Field(DEFAULT_DET_THRESHOLD, gt=0)

    @property
    def value(self) -> float:
        """Threshold in effect for the selected method"""
        return self.det_threshold if self.method is RankMethod.DET_THRESHOLD else self.rel_tol

    def as_svd(self) -> "TolerancePolicy":
        """Same relative tolerance, SVD method"""
        if self.method is RankMethod.SVD_RANK:
            return self
        return self.model_copy(update={"method": RankMethod.SVD_RANK})


class ControllabilityReport(BaseModel):
    rank: int
    subspace_dim: int
    controllable: bool
    method: TolerancePolicy
    n: int

    @model_validator(mode="after")
    def _check_consistency(self):
        if not 0 <= self.subspace_dim <= self.n:
            raise ValueError(f"subspace_dim {self.subspace_dim} outside [0, {self.n}]")
        if self.controllable != (self.subspace_dim == self.n):
            raise ValueError("controllable must equal (subspace_dim == n)")
        return self


class SpectrumCluster(BaseModel):
    re: float
    im: float
    alg: int = Field(ge=1)
    geo: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_multiplicities(self):
        # geometric multiplicity never exceeds algebraic multiplicity
        if self.geo > self.alg:
            raise ValueError(f"geometric multiplicity {self.geo} exceeds algebraic {self.alg}")
        return self

    @property
    def eigenvalue(self) -> complex:
        return complex(self.re, self.im)


class Spectrum(BaseModel):
    clusters: list[SpectrumCluster]
    cluster_tol: float = Field(gt=0)

    @property
    def n(self) -> int:
        return sum(c.alg for c in self.clusters)

    @property
    def max_algebraic(self) -> int:
        return max((c.alg for c in self.clusters), default=0)

    @property
    def max_geometric(self) -> int:
        return max((c.geo for c in self.clusters), default=0)


DEFAULT_TOLERANCE = TolerancePolicy()


def _check_pencil(F, G) -> tuple[np.ndarray, np.ndarray]:
    F = np.atleast_2d(np.asarray(F))
    G = np.asarray(G)
    if G.ndim == 1:
        G = G.reshape(-1, 1)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError(f"F must be square, got shape {F.shape}")
    if G.ndim != 2 or G.shape[0] != F.shape[0]:
        raise ValueError(f"G must have {F.shape[0]} rows, got shape {G.shape}")
    return F, G


def _check_square(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    return M


def _eigenvalues(M: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.eigvals(M)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolveError(f"eigenvalue computation failed: {e}") from e


def ctrb_matrix(F, G) -> np.ndarray:
    """Krylov blocks [G, FG, ..., F^(n-1) G]"""
    F, G = _check_pencil(F, G)
    blocks = [G]
    for _ in range(1, F.shape[0]):
        blocks.append(F @ blocks[-1])
    return np.hstack(blocks)


def numerical_rank(M, tol: TolerancePolicy | None = None) -> int:
    """Rank of M under the tolerance policy

    SvdRank counts singular values strictly above rel_tol * sigma_max * max(shape).
    DetThreshold (square only) reports full rank when |det| exceeds the threshold and
    n - 1 otherwise.

    Raises:
        ValueError: DetThreshold on a non-square matrix
    """
    tol = tol or DEFAULT_TOLERANCE
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0

    if tol.method is RankMethod.DET_THRESHOLD:
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"DetThreshold needs a square matrix, got shape {M.shape}")
        n = M.shape[0]
        return n if abs(np.linalg.det(M)) > tol.det_threshold else n - 1

    s = scipy.linalg.svdvals(M)
    cutoff = tol.rel_tol * s[0] * max(M.shape)
    return int(np.count_nonzero(s > cutoff))


def controllable_subspace_dim(F, G, tol: TolerancePolicy | None = None) -> int:
    """Dimension of the Krylov span of G under F

    Builds an orthonormal basis block by block (Arnoldi with re-orthogonalisation).
    A new direction is dropped when its residual is at most
    rel_tol * max(n, m) * reference, where the reference is the largest column norm
    of G for the input columns and ||F||_2 for their images.
    """
    tol = (tol or DEFAULT_TOLERANCE).as_svd()
    F, G = _check_pencil(F, G)
    n, m = G.shape
    if n == 0 or m == 0:
        return 0

    g_scale = float(np.max(np.linalg.norm(G, axis=0)))
    if g_scale == 0:
        return 0
    f_scale = float(np.linalg.norm(F, 2))
    drop = tol.rel_tol * max(n, m)

    basis = np.zeros((n, n), dtype=np.result_type(F, G, float))
    dim = 0
    block, scale = G, g_scale
    while dim < n and block.shape[1] > 0:
        added = []
        for column in block.T:
            v = column.astype(basis.dtype, copy=True)
            for _ in range(2):
                v -= basis[:, :dim] @ (basis[:, :dim].conj().T @ v)
            norm = np.linalg.norm(v)
            if norm <= drop * scale:
                continue
            basis[:, dim] = v / norm
            added.append(dim)
            dim += 1
            if dim == n:
                break
        block, scale = F @ basis[:, added], f_scale
    return dim


def _report(rank: int, krylov_dim: int, controllable: bool,
            tol: TolerancePolicy, n: int) -> ControllabilityReport:
    # the verdict comes from the rank test; the Krylov dimension is reconciled with it
    subspace_dim = n if controllable else min(krylov_dim, n - 1)
    if subspace_dim != krylov_dim:
        logger.debug(f"Krylov dimension {krylov_dim} reconciled to {subspace_dim} (rank verdict {controllable})")
    return ControllabilityReport(
        rank=rank,
        subspace_dim=subspace_dim,
        controllable=controllable,
        method=tol,
        n=n,
    )


def _normalized_pencil(F: np.ndarray, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(F / ||F||_2, G / max column norm): same Krylov span, scale-free verdict"""
    f_scale = float(np.linalg.norm(F, 2)) if F.size else 0.0
    g_scale = float(np.max(np.linalg.norm(G, axis=0))) if G.size else 0.0
    return (F / f_scale if f_scale else F), (G / g_scale if g_scale else G)


def kalman_controllable(F, G, tol: TolerancePolicy | None = None) -> ControllabilityReport:
    """Kalman rank test on the pencil (F, G)

    SvdRank works on the normalised pencil, so verdicts do not change when F
    and G are rescaled. DetThreshold uses the raw Krylov matrix.
    """
    tol = tol or DEFAULT_TOLERANCE
    F, G = _check_pencil(F, G)
    n = F.shape[0]
    pencil = (F, G) if tol.method is RankMethod.DET_THRESHOLD else _normalized_pencil(F, G)
    rank = numerical_rank(ctrb_matrix(*pencil), tol)
    return _report(rank, controllable_subspace_dim(F, G, tol), rank == n, tol, n)


def pbh_controllable(F, G, tol: TolerancePolicy | None = None) -> ControllabilityReport:
    """Eigenvalue test: rank [lambda I - F, G] = n at every eigenvalue of F

    The reported rank is the smallest rank seen over the eigenvalues.

    Raises:
        EigenSolveError: If the eigenvalues of F cannot be computed
    """
    tol = tol or DEFAULT_TOLERANCE
    F, G = _check_pencil(F, G)
    n = F.shape[0]
    svd_tol = tol.as_svd()
    identity = np.eye(n)

    rank = n
    for lam in _eigenvalues(F):
        rank = min(rank, numerical_rank(np.hstack([lam * identity - F, G]), svd_tol))
    return _report(rank, controllable_subspace_dim(F, G, tol), rank == n, tol, n)


def default_cluster_tol(eigenvalues: np.ndarray) -> float:
    radius = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    return CLUSTER_REL_TOL * (1.0 + radius)


def eigen_multiplicities(M, cluster_tol: float | None = None,
                         tol: TolerancePolicy | None = None) -> Spectrum:
    """Cluster the eigenvalues of M and measure their multiplicities

    Eigenvalues are merged by single linkage at distance cluster_tol. The algebraic
    multiplicity is the cluster size; the geometric multiplicity is
    n - rank(M - centroid * I).

    Args:
        M: Square matrix
        cluster_tol: Merge distance (default 1e-8 * (1 + spectral radius))
        tol: Rank tolerance for the geometric multiplicity

    Returns:
        Spectrum with clusters ordered by (real, imaginary) part
    """
    M = _check_square(M)
    svd_tol = (tol or DEFAULT_TOLERANCE).as_svd()
    eigs = _eigenvalues(M)
    n = len(eigs)
    if cluster_tol is None:
        cluster_tol = default_cluster_tol(eigs)
    if not cluster_tol > 0:
        raise ValueError(f"cluster_tol must be positive, got {cluster_tol}")
    if n == 0:
        return Spectrum(clusters=[], cluster_tol=cluster_tol)

    if n == 1:
        labels = np.ones(1, dtype=int)
    else:
        points = np.column_stack([eigs.real, eigs.imag])
        labels = fcluster(linkage(points, method="single"), t=cluster_tol, criterion="distance")

    clusters = []
    identity = np.eye(n)
    for label in np.unique(labels):
        members = eigs[labels == label]
        centroid = complex(members.mean())
        alg = len(members)
        shifted = M - (centroid if centroid.imag else centroid.real) * identity
        geo = n - numerical_rank(shifted, svd_tol)
        if not 1 <= geo <= alg:
            logger.debug(f"Geometric multiplicity {geo} clamped into [1, {alg}] at {centroid:.6g}")
            geo = min(max(geo, 1), alg)
        clusters.append(SpectrumCluster(re=centroid.real, im=centroid.imag, alg=alg, geo=geo))

    clusters.sort(key=lambda c: (c.re, c.im))
    return Spectrum(clusters=clusters, cluster_tol=cluster_tol)


def min_leaders_ND(F, tol: TolerancePolicy | None = None, cluster_tol: float | None = None) -> int:
    """Least number of leaders: the largest geometric multiplicity of F"""
    return eigen_multiplicities(F, cluster_tol, tol).max_geometric


def minpoly_degree(M, tol: TolerancePolicy | None = None, rng: RngStream | None = None,
                   probes: int = DEFAULT_PROBES) -> int:
    """Degree of the minimal polynomial from randomised Krylov dimensions

    A random probe v reaches the full minimal-polynomial degree with probability 1.
    A probe whose Krylov residual is tiny but not zero can be miscounted either way,
    so the median dimension over the probes is returned.
    """
    M = _check_square(M)
    n = M.shape[0]
    if n == 0:
        return 0
    generator = (rng or RngStream(DEFAULT_PROBE_SEED)).generator()

    dims = sorted(controllable_subspace_dim(M, generator.standard_normal(n), tol) for _ in range(max(probes, 1)))
    if dims[0] != dims[-1]:
        logger.debug(f"Krylov dimensions disagree across probes: {dims}")
    return dims[len(dims) // 2]


def max_ctrl_index_gamma(F, tol: TolerancePolicy | None = None, rng: RngStream | None = None) -> int:
    """Maximum controllability index with a single leader"""
    return minpoly_degree(F, tol, rng)


def afl_feasible(F, g, tol: TolerancePolicy | None = None, rng: RngStream | None = None) -> bool:
    """True iff the leader arcs g reach the maximum controllability index of F"""
    F = _check_square(F)
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.shape != (F.shape[0],):
        raise ValueError(f"g must have {F.shape[0]} entries, got {g.size}")
    return controllable_subspace_dim(F, g, tol) == max_ctrl_index_gamma(F, tol, rng)
