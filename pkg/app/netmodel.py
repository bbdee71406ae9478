#!/usr/bin/env python3
"""Leader-follower systems built from weighted digraphs, and minimum-energy steering"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.integrate import simpson

from ctrlcore import ControllabilityReport, TolerancePolicy, kalman_controllable
from graphgen import Partition, WeightedDigraph

logger = logging.getLogger(__name__)

# Reciprocal condition number below which the Gramian counts as singular
GRAMIAN_RCOND_MIN = 1e-12
DEFAULT_STEER_STEPS = 2000
# Costate corrections against the integrated terminal state
STEER_CORRECTIONS = 2

__all__ = [
    "Partition",
    "Representation",
    "LeaderFollowerSystem",
    "SteerResult",
    "SingularGramianError",
    "laplacian",
    "build_system",
    "leader_subsystem_pencil",
    "network_controllable",
    "min_energy_steer",
]


class Representation(str, Enum):
    ADJACENCY = "Adjacency"
    LAPLACIAN = "Laplacian"


class SingularGramianError(np.linalg.LinAlgError):
    """Controllability Gramian is numerically singular"""

    def __init__(self, condition: float, message: str | None = None):
        self.condition = condition
        super().__init__(message or f"controllability Gramian is numerically singular (condition estimate {condition:.3e})")


@dataclass(frozen=True, eq=False)
class LeaderFollowerSystem:
    """Blocks of a partitioned network matrix

    F and G form the controllability pencil as written: (A_ff, A_fl) or
    (L_ff, L_fl). The sign of the Laplacian dynamics lives in dynamics_pencil().
    """

    representation: Representation
    F: np.ndarray
    G: np.ndarray
    lf_block: np.ndarray
    ll_block: np.ndarray
    partition: Partition | None = field(default=None)

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        G = np.asarray(self.G, dtype=float)
        if G.ndim == 1:
            G = G.reshape(-1, 1)
        n_f, n_l = F.shape[0], G.shape[1]
        lf = np.asarray(self.lf_block, dtype=float).reshape(n_l, n_f)
        ll = np.asarray(self.ll_block, dtype=float).reshape(n_l, n_l)
        if F.shape != (n_f, n_f) or G.shape[0] != n_f:
            raise ValueError(f"inconsistent block shapes F={F.shape}, G={G.shape}")
        if self.partition is not None and (
                len(self.partition.followers) != n_f or len(self.partition.leaders) != n_l):
            raise ValueError("block shapes do not match the partition")
        for name, value in (("F", F), ("G", G), ("lf_block", lf), ("ll_block", ll)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_followers(self) -> int:
        return self.F.shape[0]

    @property
    def n_leaders(self) -> int:
        return self.G.shape[1]

    @property
    def sign(self) -> float:
        return 1.0 if self.representation is Representation.ADJACENCY else -1.0

    def dynamics_pencil(self) -> tuple[np.ndarray, np.ndarray]:
        """Follower dynamics x_f' = F' x_f + G' x_l: (+A_ff, +A_fl) or (-L_ff, -L_fl)"""
        return self.sign * self.F, self.sign * self.G

    def reassemble(self) -> np.ndarray:
        """Full network matrix in original vertex order (needs the partition)"""
        if self.partition is None:
            raise ValueError("system was built without a partition")
        order = np.array(self.partition.followers + self.partition.leaders)
        blocked = np.block([[self.F, self.G], [self.lf_block, self.ll_block]])
        full = np.empty_like(blocked)
        full[np.ix_(order, order)] = blocked
        return full


@dataclass(frozen=True, eq=False)
class SteerResult:
    """Sampled trajectory of a steering run"""

    time_grid: np.ndarray
    control: np.ndarray
    state: np.ndarray
    terminal_norm: float

    def to_csv(self, path: str | Path) -> Path:
        """Write columns t, x_1..x_Nf, u_1..u_Nl"""
        path = Path(path)
        n_f, n_l = self.state.shape[1], self.control.shape[1]
        header = ["t"] + [f"x_{i + 1}" for i in range(n_f)] + [f"u_{i + 1}" for i in range(n_l)]
        with path.open("w", newline="", encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for t, x, u in zip(self.time_grid, self.state, self.control):
                writer.writerow([format(float(v), ".17g") for v in (t, *x, *u)])
        return path


def laplacian(g: WeightedDigraph) -> np.ndarray:
    """Row-sum Laplacian: L[i][i] = sum_j w[i][j], L[i][j] = -w[i][j]"""
    return np.diag(g.w.sum(axis=1)) - g.w


def build_system(g: WeightedDigraph, p: Partition, rep: Representation) -> LeaderFollowerSystem:
    """Split the adjacency or Laplacian matrix of g into leader/follower blocks

    Args:
        g: Network topology
        p: Follower/leader split covering every vertex of g
        rep: Which matrix represents the network

    Returns:
        The partitioned system
    """
    p.validate_for(g.n)
    matrix = g.w if rep is Representation.ADJACENCY else laplacian(g)
    f, l = list(p.followers), list(p.leaders)
    return LeaderFollowerSystem(
        representation=rep,
        F=matrix[np.ix_(f, f)],
        G=matrix[np.ix_(f, l)],
        lf_block=matrix[np.ix_(l, f)],
        ll_block=matrix[np.ix_(l, l)],
        partition=p,
    )


def leader_subsystem_pencil(sys: LeaderFollowerSystem) -> tuple[np.ndarray, np.ndarray]:
    """Leader subsystem after feedback cancels the follower coupling: (A_ll, I)"""
    return sys.sign * sys.ll_block, np.eye(sys.n_leaders)


def network_controllable(sys: LeaderFollowerSystem,
                         tol: TolerancePolicy | None = None) -> tuple[ControllabilityReport, ControllabilityReport]:
    """Verdicts for the leader subsystem and the follower pencil

    The network is controllable iff both reports are; the leader subsystem
    always is.

    Returns:
        Tuple of (leader_report, follower_report)
    """
    leader = kalman_controllable(*leader_subsystem_pencil(sys), tol)
    follower = kalman_controllable(sys.F, sys.G, tol)
    return leader, follower


def _propagators(A: np.ndarray, dt: float, count: int) -> np.ndarray:
    """expm(A * j * dt) for j = 0..count, by repeated multiplication"""
    step = scipy.linalg.expm(A * dt)
    out = np.empty((count + 1,) + A.shape)
    out[0] = np.eye(A.shape[0])
    for j in range(count):
        out[j + 1] = out[j] @ step
    return out


def _rk4(A: np.ndarray, B: np.ndarray, x0: np.ndarray, u_half: np.ndarray, h: float) -> np.ndarray:
    """Classical RK4 in extended precision; u_half holds the input at every half step"""
    A = A.astype(np.longdouble)
    B = B.astype(np.longdouble)
    h = np.longdouble(h)
    steps = (len(u_half) - 1) // 2
    state = np.empty((steps + 1, A.shape[0]), dtype=np.longdouble)
    state[0] = x = x0.astype(np.longdouble)
    for k in range(steps):
        u0, um, u1 = u_half[2 * k], u_half[2 * k + 1], u_half[2 * k + 2]
        k1 = A @ x + B @ u0
        k2 = A @ (x + h / 2 * k1) + B @ um
        k3 = A @ (x + h / 2 * k2) + B @ um
        k4 = A @ (x + h * k3) + B @ u1
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        state[k + 1] = x
    return state


def min_energy_steer(sys: LeaderFollowerSystem, x0, tau: float,
                     steps: int = DEFAULT_STEER_STEPS, refine: bool = True) -> SteerResult:
    """Drive the follower states to the origin with the minimum-energy input

    The leader states act as the follower subsystem's input. The finite-horizon
    Gramian is integrated by composite Simpson on `steps` panels and the closed
    system by classical RK4 on the same grid. With refine, the costate is then
    corrected against the terminal state the integrator reaches.

    Args:
        sys: Leader-follower system
        x0: Initial follower state
        tau: Horizon (> 0)
        steps: Number of integration panels (>= 2)
        refine: Apply the terminal-state costate corrections

    Returns:
        SteerResult sampled on the integration grid

    Raises:
        ValueError: On a non-positive horizon or bad shapes
        SingularGramianError: If the Gramian is numerically singular
    """
    if not tau > 0:
        raise ValueError(f"horizon tau must be positive, got {tau}")
    if steps < 2:
        raise ValueError(f"steps must be at least 2, got {steps}")

    A, B = sys.dynamics_pencil()
    n = A.shape[0]
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have {n} entries, got {x0.size}")

    h = tau / steps
    time_grid = np.linspace(0.0, tau, steps + 1)
    half = _propagators(A, h / 2, 2 * steps)

    full = half[::2]
    integrand = full @ (B @ B.T) @ np.transpose(full, (0, 2, 1))
    gramian = simpson(integrand, x=time_grid, axis=0)
    gramian = (gramian + gramian.T) / 2

    condition = float(np.linalg.cond(gramian))
    if not np.isfinite(condition) or 1.0 / condition < GRAMIAN_RCOND_MIN:
        raise SingularGramianError(condition)
    try:
        factor = scipy.linalg.cho_factor(gramian)
    except np.linalg.LinAlgError:
        raise SingularGramianError(condition) from None

    # u(t) = -B^T expm(A^T (tau - t)) costate, sampled every half step
    input_map = -np.einsum("ij,kli->kjl", B, half[::-1]).astype(np.longdouble)
    costate = scipy.linalg.cho_solve(factor, scipy.linalg.expm(A * tau) @ x0).astype(np.longdouble)
    for _ in range(STEER_CORRECTIONS if refine else 0):
        # x(tau) = x_free(tau) - W costate, so W^-1 x(tau) is the costate still missing
        terminal = _rk4(A, B, x0, input_map @ costate, h)[-1]
        costate = costate + scipy.linalg.cho_solve(factor, terminal.astype(float))

    u_half = input_map @ costate
    state = _rk4(A, B, x0, u_half, h)

    terminal_norm = float(np.sqrt(np.sum(state[-1] ** 2)))
    logger.debug(f"Steered {n} followers over tau={tau} in {steps} steps, terminal norm {terminal_norm:.3e}")
    return SteerResult(
        time_grid=time_grid,
        control=u_half[::2].astype(float),
        state=state.astype(float),
        terminal_norm=terminal_norm,
    )
