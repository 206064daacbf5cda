"""Ornstein-Uhlenbeck models and a numerical check of the global Markov property.

The model is ``dX = M (X - mu) dt + sigma0 dW`` with ``Sigma = sigma0 sigma0^T``.
Given a separation ``(A, B, C)`` in the model's canonical graph, the
conditional mean of the drift of every ``b`` in ``B`` is the same whether
the observer sees the ``C`` coordinates or the ``C | A`` coordinates.
:func:`verify_global_markov` simulates paths, runs the two Kalman-Bucy
filters and compares the implied drift estimates.

Supporting pieces: canonical-graph extraction, the six-block partition of
the coordinates and its sparsity audit, Lyapunov and algebraic Riccati
solvers, a closed form for the differential Riccati equation with an RK4
cross-check, a Pade matrix exponential and an Euler-Maruyama simulator.

Linear solves and eigenvalues use numpy; everything else is in this module.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph_core import Graph, NodeSet, bits, random_cdg
from .separation import m_separated, mu_separated, neck_reachable

__all__ = [
    "ZERO_TOL",
    "NumericsError",
    "OUModel",
    "canonical_lig",
    "is_stable",
    "lyapunov_solve",
    "expm",
    "Partition",
    "partition_v1_v6",
    "M_ZERO_BLOCKS",
    "SIGMA_ZERO_BLOCKS",
    "D_ZERO_BLOCKS",
    "E_ZERO_BLOCKS",
    "F_ZERO_BLOCKS",
    "sparsity_audit",
    "RiccatiSystem",
    "build_def",
    "CareSolution",
    "care_solve",
    "riccati_diff",
    "riccati_rk4",
    "SamplePath",
    "euler_maruyama",
    "FilterRun",
    "filter_covariance",
    "kalman_bucy_filter",
    "VerificationReport",
    "verify_global_markov",
    "example1_model",
    "random_separated_instance",
    "negative_control_query",
]

ZERO_TOL = 1e-12
"""Entries with absolute value at most this count as structural zeros."""


class NumericsError(ValueError):
    pass


# -- model ------------------------------------------------------------------------------


@dataclass(frozen=True)
class OUModel:
    """Drift ``M (x - mu)``, diffusion ``Sigma`` (factor ``sigma0``), start covariance ``Gamma0``.

    ``Gamma0`` is diagonal: the start vector has independent coordinates
    with mean ``mu``. ``diffusion``, when given, is ``Sigma`` itself; it
    keeps exact zeros that ``sigma0 @ sigma0.T`` would blur by rounding.
    """

    nodes: tuple[str, ...]
    M: np.ndarray
    mu: np.ndarray
    sigma0: np.ndarray
    Gamma0_diag: np.ndarray
    diffusion: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.nodes)
        if self.M.shape != (n, n) or self.mu.shape != (n,) or self.sigma0.shape[0] != n:
            raise NumericsError("model dimensions do not match the node list")
        if self.Gamma0_diag.shape != (n,) or np.any(self.Gamma0_diag <= 0):
            raise NumericsError("Gamma0 must be a positive diagonal")
        if self.diffusion is not None:
            factored = self.sigma0 @ self.sigma0.T
            if self.diffusion.shape != (n, n) or not np.allclose(self.diffusion, factored, rtol=1e-12, atol=1e-12):
                raise NumericsError("diffusion does not match sigma0 @ sigma0.T")
        if np.linalg.eigvalsh(self.Sigma).min() <= 0:
            raise NumericsError("Sigma must be positive definite")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def Sigma(self) -> np.ndarray:
        if self.diffusion is not None:
            return self.diffusion
        return self.sigma0 @ self.sigma0.T

    @property
    def a(self) -> np.ndarray:
        return -self.M @ self.mu

    @property
    def Gamma0(self) -> np.ndarray:
        return np.diag(self.Gamma0_diag)

    @classmethod
    def from_sigma(cls, nodes, M, mu, Sigma, Gamma0_diag) -> "OUModel":
        """Build from a diffusion matrix; the factor is its Cholesky factor."""
        Sigma = np.asarray(Sigma, float)
        if not np.array_equal(Sigma, Sigma.T):
            raise NumericsError("Sigma must be symmetric")
        try:
            factor = np.linalg.cholesky(Sigma)
        except np.linalg.LinAlgError as exc:
            raise NumericsError("Sigma must be positive definite") from exc
        return cls(tuple(nodes), np.asarray(M, float), np.asarray(mu, float), factor, np.asarray(Gamma0_diag, float), Sigma.copy())

    @classmethod
    def from_dict(cls, data: dict) -> "OUModel":
        """Read ``sigma0``, ``Sigma`` or both; with only ``Sigma`` the factor is its Cholesky factor."""
        n = len(data["nodes"])
        mu = data.get("mu", [0.0] * n)
        g0 = data.get("Gamma0_diag", [1.0] * n)
        if "sigma0" not in data:
            return cls.from_sigma(data["nodes"], data["M"], mu, data["Sigma"], g0)
        diffusion = np.asarray(data["Sigma"], float) if "Sigma" in data else None
        return cls(
            tuple(data["nodes"]),
            np.asarray(data["M"], float),
            np.asarray(mu, float),
            np.asarray(data["sigma0"], float),
            np.asarray(g0, float),
            diffusion,
        )

    @classmethod
    def from_json(cls, text: str) -> "OUModel":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "M": self.M.tolist(),
            "mu": self.mu.tolist(),
            "sigma0": self.sigma0.tolist(),
            "Gamma0_diag": self.Gamma0_diag.tolist(),
        } | ({} if self.diffusion is None else {"Sigma": self.diffusion.tolist()})


def canonical_lig(model: OUModel, tol: float = ZERO_TOL) -> Graph:
    """``a -> b`` iff ``|M[b, a]| > tol``; ``a |-| b`` iff ``|Sigma[a, b]| > tol`` (``a != b``)."""
    n = model.n
    M, S = model.M, model.Sigma
    directed = frozenset((a, b) for a in range(n) for b in range(n) if abs(M[b, a]) > tol)
    blunt = frozenset((a, b) for a in range(n) for b in range(a + 1, n) if abs(S[a, b]) > tol)
    return Graph(model.nodes, directed, blunt, class_tag="cDG")


# -- dense linear algebra -------------------------------------------------------------------


def is_stable(M: np.ndarray) -> bool:
    """All eigenvalues strictly in the open left half-plane."""
    M = np.asarray(M, float)
    if M.size == 0:
        return True
    return bool(np.max(np.linalg.eigvals(M).real) < 0)


def lyapunov_solve(M: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``M X + X M^T + Q = 0`` through the Kronecker linear system.

    Unique when no two eigenvalues of ``M`` sum to zero (e.g. ``M`` stable).
    """
    M = np.asarray(M, float)
    Q = np.asarray(Q, float)
    k = M.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    eye = np.eye(k)
    # Row-major vec: vec(M X) = (M kron I) vec X, vec(X M^T) = (I kron M) vec X.
    op = np.kron(M, eye) + np.kron(eye, M)
    try:
        x = np.linalg.solve(op, -Q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericsError("Lyapunov operator is singular") from exc
    X = x.reshape(k, k)
    if np.allclose(Q, Q.T, rtol=0, atol=0):
        X = (X + X.T) / 2
    return X


_PADE6 = (1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280)


def expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-6 Pade approximant.

    ``A`` is scaled so its 1-norm is at most 1/2, where the approximant is
    accurate to double precision, then squared back.
    """
    A = np.asarray(A, float)
    k = A.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    norm = np.abs(A).sum(axis=0).max()
    s = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = A / 2.0**s
    eye = np.eye(k)
    P = np.zeros_like(X)
    Qm = np.zeros_like(X)
    power = eye
    for j, c in enumerate(_PADE6):
        P = P + c * power
        Qm = Qm + (-1) ** j * c * power
        power = power @ X
    R = np.linalg.solve(Qm, P)
    for _ in range(s):
        R = R @ R
    return R


# -- partition and sparsity --------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Six-block split of the coordinates for a query ``(A, C)``; ``W = A | C``."""

    blocks: tuple[NodeSet, NodeSet, NodeSet, NodeSet, NodeSet, NodeSet]
    U: NodeSet
    W: NodeSet

    def block(self, i: int) -> NodeSet:
        """Block ``V<i>``, 1-based."""
        return self.blocks[i - 1]

    def labels(self, g: Graph) -> dict[str, list[str]]:
        return {f"V{i + 1}": g.labels(b) for i, b in enumerate(self.blocks)}


def partition_v1_v6(g: Graph, A: NodeSet, C: NodeSet) -> Partition:
    """Split ``U = V - (A | C)`` into V1..V3 and ``W = A | C`` into V4..V6.

    V1: m-separated from ``A`` given ``C``. V2: m-separated from V1 given
    ``W`` but not from ``A``. V3: the rest of ``U``. V4 and V5: nodes of
    ``W`` neck-reachable given ``W`` from V1 and V2. V6: the rest of ``W``.
    """
    if A & C:
        raise NumericsError("A and C must be disjoint")
    W = A | C
    U = g.all_nodes & ~W
    V1 = V2 = V3 = 0
    for u in bits(U):
        if m_separated(g, 1 << u, A, C):
            V1 |= 1 << u
    for u in bits(U & ~V1):
        if m_separated(g, 1 << u, V1, W):
            V2 |= 1 << u
        else:
            V3 |= 1 << u
    V4 = V5 = 0
    for w in bits(W):
        if V1 and neck_reachable(g, V1, w, W):
            V4 |= 1 << w
        if V2 and neck_reachable(g, V2, w, W):
            V5 |= 1 << w
    V6 = W & ~(V4 | V5)
    return Partition((V1, V2, V3, V4, V5, V6), U, W)


# (row block, column block) pairs that must vanish for a separated query.
M_ZERO_BLOCKS = ((1, 2), (1, 3), (2, 1), (2, 3), (4, 2), (4, 3), (5, 1), (5, 3), (6, 1), (6, 2), (6, 3))
SIGMA_ZERO_BLOCKS = (
    (1, 2), (1, 5), (1, 6), (2, 1), (2, 4), (2, 6), (4, 2), (4, 5),
    (4, 6), (5, 1), (5, 4), (5, 6), (6, 1), (6, 2), (6, 4), (6, 5),
)  # fmt: skip
# D, E, F live on U; their blocks are V1..V3.
D_ZERO_BLOCKS = ((2, 1), (3, 1), (1, 2), (3, 2))
E_ZERO_BLOCKS = ((1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3))
F_ZERO_BLOCKS = ((1, 2), (2, 1))


def _block_indices(part: Partition, i: int, on_u: bool) -> list[int]:
    if on_u:
        order = list(bits(part.U))
        return [order.index(v) for v in bits(part.block(i))]
    return list(bits(part.block(i)))


def sparsity_audit(part: Partition, tol: float = 0.0, **matrices: np.ndarray) -> list[str]:
    """List every required zero block that is violated.

    Accepted keywords: ``M`` and ``Sigma`` (indexed by all nodes), ``D``,
    ``E`` and ``F`` (indexed by ``U`` in increasing node order). With the
    default ``tol = 0`` the zeros must be exact.
    """
    table = {"M": M_ZERO_BLOCKS, "Sigma": SIGMA_ZERO_BLOCKS, "D": D_ZERO_BLOCKS, "E": E_ZERO_BLOCKS, "F": F_ZERO_BLOCKS}
    out = []
    for name, mat in matrices.items():
        if name not in table:
            raise NumericsError(f"unknown matrix {name!r}")
        on_u = name in ("D", "E", "F")
        for i, j in table[name]:
            rows = _block_indices(part, i, on_u)
            cols = _block_indices(part, j, on_u)
            if rows and cols:
                worst = float(np.abs(mat[np.ix_(rows, cols)]).max())
                if worst > tol:
                    out.append(f"{name}[V{i},V{j}] has entry {worst:.3e}")
    return out


# -- Riccati equations ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiccatiSystem:
    """``d/dt gamma = gamma D + D^T gamma - gamma E gamma + F`` on ``U``."""

    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    U: tuple[int, ...]
    W: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.U)


def build_def(model: OUModel, U: Sequence[int], W: Sequence[int]) -> RiccatiSystem:
    """Matrices of the filter's Riccati equation for hidden ``U``, observed ``W``."""
    U, W = tuple(U), tuple(W)
    M, S = model.M, model.Sigma
    ix = np.ix_
    M_UU = M[ix(U, U)]
    M_WU = M[ix(W, U)]
    ss = S[ix(U, U)]
    sS = S[ix(U, W)]
    SS = S[ix(W, W)]
    if W:
        try:
            SS_inv = np.linalg.inv(SS)
        except np.linalg.LinAlgError as exc:
            raise NumericsError("observed block of Sigma is singular") from exc
        D = M_UU.T - M_WU.T @ SS_inv @ sS.T
        E = M_WU.T @ SS_inv @ M_WU
        F = ss - sS @ SS_inv @ sS.T
    else:
        D, E, F = M_UU.T.copy(), np.zeros((len(U), len(U))), ss.copy()
    E = (E + E.T) / 2
    F = (F + F.T) / 2
    if len(U):
        if np.linalg.eigvalsh(F).min() <= 0:
            raise NumericsError("F is not positive definite")
        if np.linalg.eigvalsh(E).min() < -1e-10 * max(1.0, np.abs(E).max()):
            raise NumericsError("E is not positive semidefinite")
    return RiccatiSystem(D, E, F, U, W)


def care_residual(sys: RiccatiSystem, X: np.ndarray) -> np.ndarray:
    return X @ sys.D + sys.D.T @ X - X @ sys.E @ X + sys.F


@dataclass(frozen=True)
class CareSolution:
    Gamma: np.ndarray
    iterates: tuple[np.ndarray, ...]
    residual: float


def care_solve(sys: RiccatiSystem, newton_steps: int = 50, rtol: float = 1e-14) -> CareSolution:
    """Stabilising solution of ``0 = G D + D^T G - G E G + F``.

    The stable invariant subspace of ``[[D, -E], [-F, -D^T]]`` gives a
    starting point; Newton-Kleinman steps (one Lyapunov solve each) refine
    it. ``iterates`` holds the Hamiltonian start followed by each step.
    """
    k = sys.k
    if k == 0:
        return CareSolution(np.zeros((0, 0)), (), 0.0)
    D, E, F = sys.D, sys.E, sys.F
    H = np.block([[D, -E], [-F, -D.T]])
    vals, vecs = np.linalg.eig(H)
    if np.min(np.abs(vals.real)) < 1e-12 * max(1.0, np.abs(H).max()):
        raise NumericsError("Hamiltonian has eigenvalues on the imaginary axis")
    stable = vecs[:, vals.real < 0]
    if stable.shape[1] != k:
        raise NumericsError("stable subspace has the wrong dimension")
    X = np.real(stable[k:] @ np.linalg.inv(stable[:k]))
    X = (X + X.T) / 2
    iterates = [X]
    scale = np.linalg.norm(F) + np.linalg.norm(X) ** 2 * np.linalg.norm(E) + 1e-300
    for _ in range(newton_steps):
        L = D - E @ X
        if not is_stable(L):
            raise NumericsError("Newton iterate lost closed-loop stability")
        X_new = lyapunov_solve(L.T, X @ E @ X + F)
        iterates.append(X_new)
        done = np.linalg.norm(X_new - X) <= rtol * max(1.0, np.linalg.norm(X_new))
        X = X_new
        if done:
            break
    res = float(np.linalg.norm(care_residual(sys, X)) / scale)
    return CareSolution(X, tuple(iterates), res)


def riccati_diff(sys: RiccatiSystem, Gamma0: np.ndarray, t_grid: Sequence[float], Gamma_bar: np.ndarray | None = None) -> np.ndarray:
    """Closed-form solution of the differential Riccati equation on ``t_grid``.

    With ``K = D - E Gbar`` and ``S(t) = int_0^t e^{sK} E e^{sK^T} ds``,
    ``gamma(t) = Gbar + e^{tK^T} Delta0 (I + S(t) Delta0)^{-1} e^{tK}``,
    ``Delta0 = Gamma0 - Gbar``. ``S(t)`` solves the Lyapunov equation
    ``K S + S K^T + E - e^{tK} E e^{tK^T} = 0``.
    """
    k = sys.k
    t_grid = np.asarray(t_grid, float)
    if k == 0:
        return np.zeros((len(t_grid), 0, 0))
    Gamma0 = np.asarray(Gamma0, float)
    if np.linalg.eigvalsh((Gamma0 + Gamma0.T) / 2).min() <= 0:
        raise NumericsError("Gamma0 must be positive definite")
    Gbar = care_solve(sys).Gamma if Gamma_bar is None else Gamma_bar
    K = sys.D - sys.E @ Gbar
    delta0 = Gamma0 - Gbar
    eye = np.eye(k)
    out = np.empty((len(t_grid), k, k))
    for idx, t in enumerate(t_grid):
        eK = expm(t * K)
        S = lyapunov_solve(K, sys.E - eK @ sys.E @ eK.T)
        try:
            mid = delta0 @ np.linalg.inv(eye + S @ delta0)
        except np.linalg.LinAlgError as exc:
            raise NumericsError("closed form hit a singular matrix") from exc
        G = Gbar + eK.T @ mid @ eK
        out[idx] = (G + G.T) / 2
    return out


def riccati_rk4(sys: RiccatiSystem, Gamma0: np.ndarray, t_grid: Sequence[float], substeps: int = 200) -> np.ndarray:
    """Classical RK4 integration of the differential Riccati equation."""
    D, E, F = sys.D, sys.E, sys.F

    def rhs(G):
        return G @ D + D.T @ G - G @ E @ G + F

    t_grid = np.asarray(t_grid, float)
    G = np.asarray(Gamma0, float).copy()
    out = np.empty((len(t_grid),) + G.shape)
    t = 0.0
    for idx, target in enumerate(t_grid):
        span = target - t
        if span > 0:
            h = span / substeps
            for _ in range(substeps):
                k1 = rhs(G)
                k2 = rhs(G + h / 2 * k1)
                k3 = rhs(G + h / 2 * k2)
                k4 = rhs(G + h * k3)
                G = G + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = target
        out[idx] = G
    return out


# -- simulation and filtering ------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplePath:
    t: np.ndarray
    X: np.ndarray  # shape (len(t), n)
    seed: int


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def euler_maruyama(model: OUModel, T: float, dt: float, seed: int) -> SamplePath:
    """``X_{k+1} = X_k + dt M (X_k - mu) + sqrt(dt) sigma0 eps_k`` on a uniform grid.

    ``X_0 = mu + sqrt(Gamma0) eps`` with the same counter-based generator, so
    a seed fixes the path bit for bit.
    """
    if dt <= 0 or T <= 0:
        raise NumericsError("T and dt must be positive")
    steps = int(round(T / dt))
    rng = _rng(seed)
    X = np.empty((steps + 1, model.n))
    X[0] = model.mu + np.sqrt(model.Gamma0_diag) * rng.standard_normal(model.n)
    noise = rng.standard_normal((steps, model.sigma0.shape[1])) @ model.sigma0.T * np.sqrt(dt)
    drift = model.M
    for k in range(steps):
        X[k + 1] = X[k] + dt * (drift @ (X[k] - model.mu)) + noise[k]
    return SamplePath(np.arange(steps + 1) * dt, X, seed)


@dataclass(frozen=True)
class FilterRun:
    """Conditional means ``m`` of the hidden coordinates ``U`` given ``W``.

    ``m`` has shape ``(len(t), |U|)`` and ``gamma`` shape ``(len(t), |U|, |U|)``.
    """

    t: np.ndarray
    U: tuple[int, ...]
    W: tuple[int, ...]
    m: np.ndarray
    gamma: np.ndarray
    seed: int

    def estimate(self, X: np.ndarray) -> np.ndarray:
        """Best estimate of every coordinate: ``X`` on ``W``, ``m`` on ``U``."""
        est = np.array(X, float, copy=True)
        if self.U:
            est[:, list(self.U)] = self.m
        return est


def filter_covariance(model: OUModel, W: NodeSet, t: np.ndarray) -> np.ndarray:
    """Error covariance ``gamma_t`` of the filter observing ``W`` (path independent)."""
    U = [v for v in range(model.n) if not W >> v & 1]
    Wl = [v for v in range(model.n) if W >> v & 1]
    sys = build_def(model, U, Wl)
    return riccati_diff(sys, model.Gamma0[np.ix_(U, U)], t)


def kalman_bucy_filter(model: OUModel, W: NodeSet, path: SamplePath, gamma: np.ndarray | None = None) -> FilterRun:
    """Euler discretisation of the filter for ``E(X^U | F^W)`` along ``path``.

    ``m_{k+1} = m_k + (a_U + M_UU m_k + M_UW X^W_k) dt
    + G_k (dX^W_k - (a_W + M_WU m_k + M_WW X^W_k) dt)`` with gain
    ``G_k = (Sigma_UW + gamma_k M_WU^T) Sigma_WW^{-1}``; ``m_0 = mu_U``.
    """
    n = model.n
    if W >> n:
        raise NumericsError("W has nodes outside the model")
    U = tuple(v for v in range(n) if not W >> v & 1)
    Wl = tuple(v for v in range(n) if W >> v & 1)
    t, X = path.t, path.X
    if len(t) < 2 or not np.allclose(np.diff(t), t[1] - t[0]):
        raise NumericsError("path must be sampled on a uniform grid")
    dt = t[1] - t[0]
    if gamma is None:
        gamma = filter_covariance(model, W, t)
    if gamma.shape[0] != len(t):
        raise NumericsError("covariance grid does not match the path")
    k = len(U)
    m = np.empty((len(t), k))
    if k == 0:
        return FilterRun(t, U, Wl, m, gamma, path.seed)
    ix = np.ix_
    M, S, a = model.M, model.Sigma, model.a
    aU, M_UU = a[list(U)], M[ix(U, U)]
    m[0] = model.mu[list(U)]
    if not Wl:
        for j in range(len(t) - 1):
            m[j + 1] = m[j] + (aU + M_UU @ m[j]) * dt
        return FilterRun(t, U, Wl, m, gamma, path.seed)
    aW = a[list(Wl)]
    M_UW, M_WU, M_WW = M[ix(U, Wl)], M[ix(Wl, U)], M[ix(Wl, Wl)]
    S_UW = S[ix(U, Wl)]
    SS_inv = np.linalg.inv(S[ix(Wl, Wl)])
    XW = X[:, list(Wl)]
    dXW = np.diff(XW, axis=0)
    for j in range(len(t) - 1):
        gain = (S_UW + gamma[j] @ M_WU.T) @ SS_inv
        innov = dXW[j] - (aW + M_WU @ m[j] + M_WW @ XW[j]) * dt
        m[j + 1] = m[j] + (aU + M_UU @ m[j] + M_UW @ XW[j]) * dt + gain @ innov
    return FilterRun(t, U, Wl, m, gamma, path.seed)


# -- global Markov check -------------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    """Drift-estimate discrepancies between the ``C`` and ``C | A`` filters.

    ``per_path[p][b]`` is ``max_t |lam_C - lam_CA|`` for target ``b`` on path
    ``p``; ``relative`` divides the overall maximum by the largest drift
    estimate seen (floored at 1e-12). ``passed`` means ``relative <= tol``.
    """

    separated: bool
    mode: str
    per_path: tuple[dict[str, float], ...]
    max_abs: float
    scale: float
    relative: float
    tol: float
    seeds: tuple[int, ...]
    partition: dict[str, list[str]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.relative <= self.tol

    def to_dict(self) -> dict:
        return {
            "separated": self.separated,
            "mode": self.mode,
            "passed": self.passed,
            "max_abs": self.max_abs,
            "relative": self.relative,
            "tol": self.tol,
            "scale": self.scale,
            "seeds": list(self.seeds),
            "per_path": list(self.per_path),
            "partition": self.partition,
        }


def _drift_estimates(model: OUModel, run: FilterRun, X: np.ndarray, B: NodeSet) -> np.ndarray:
    est = run.estimate(X) - model.mu
    rows = list(bits(B))
    return est @ model.M[rows].T  # shape (len(t), |B|)


def verify_global_markov(
    model: OUModel,
    A: NodeSet,
    B: NodeSet,
    C: NodeSet,
    T: float = 5.0,
    dt: float = 1e-3,
    seed: int = 0,
    n_paths: int = 10,
    tol: float = 1e-8,
    mode: str = "auto",
) -> VerificationReport:
    """Compare drift estimates of ``B`` given ``C`` and given ``C | A``.

    ``mode`` is ``"positive"`` (query must be separated), ``"negative"``
    (must not be) or ``"auto"`` (read off the canonical graph). Path ``p``
    uses seed ``seed + p``.
    """
    if A & C:
        raise NumericsError("A and C must be disjoint")
    g = canonical_lig(model)
    sep = mu_separated(g, A, B, C)
    if mode == "auto":
        mode = "positive" if sep else "negative"
    if mode == "positive" and not sep:
        raise NumericsError("positive mode needs a separated query")
    if mode == "negative" and sep:
        raise NumericsError("negative mode needs a non-separated query")
    W1, W2 = C, C | A
    probe = euler_maruyama(model, T, dt, seed)
    gam1 = filter_covariance(model, W1, probe.t)
    gam2 = filter_covariance(model, W2, probe.t)
    per_path = []
    max_abs = 0.0
    scale = 0.0
    seeds = tuple(seed + p for p in range(n_paths))
    labels = [model.nodes[b] for b in bits(B)]
    for s in seeds:
        path = probe if s == seed else euler_maruyama(model, T, dt, s)
        lam1 = _drift_estimates(model, kalman_bucy_filter(model, W1, path, gam1), path.X, B)
        lam2 = _drift_estimates(model, kalman_bucy_filter(model, W2, path, gam2), path.X, B)
        diff = np.abs(lam1 - lam2).max(axis=0)
        per_path.append({b: float(d) for b, d in zip(labels, diff)})
        max_abs = max(max_abs, float(diff.max()))
        scale = max(scale, float(np.abs(lam1).max()), float(np.abs(lam2).max()))
    part = partition_v1_v6(g, A, C).labels(g) if sep else {}
    rel = max_abs / max(scale, 1e-12)
    return VerificationReport(sep, mode, tuple(per_path), max_abs, scale, rel, tol, seeds, part)


# -- fixtures and generators ---------------------------------------------------------------------------------


def example1_model() -> OUModel:
    """Three coordinates: ``alpha -> beta`` in the drift, shared noise on beta and gamma."""
    M = np.array([[-1.0, 0.0, 0.0], [0.8, -1.5, 0.0], [0.0, 0.0, -0.7]])
    sigma0 = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.8, 0.0, 0.5], [0.0, 0.0, 0.7, 0.6]])
    return OUModel(("alpha", "beta", "gamma"), M, np.zeros(3), sigma0, np.ones(3))


def _model_on_graph(g: Graph, rng: random.Random) -> OUModel:
    """Random stable model whose canonical graph is ``g`` (which must carry every loop)."""
    n = g.n
    M = np.zeros((n, n))
    for a, b in g.directed:
        if a != b:
            M[b, a] = rng.choice((-1, 1)) * rng.uniform(0.3, 1.0)
    for v in range(n):
        M[v, v] = -(np.abs(M[v]).sum() + rng.uniform(0.5, 1.5))
    S = np.zeros((n, n))
    for a, b in g.blunt:
        S[a, b] = S[b, a] = rng.choice((-1, 1)) * rng.uniform(0.2, 0.6)
    for v in range(n):
        S[v, v] = np.abs(S[v]).sum() + rng.uniform(0.5, 1.0)
    mu = np.array([rng.uniform(-1, 1) for _ in range(n)])
    g0 = np.array([rng.uniform(0.5, 1.5) for _ in range(n)])
    return OUModel.from_sigma(g.nodes, M, mu, S, g0)


def random_separated_instance(rng: random.Random, n_min: int = 3, n_max: int = 5, max_tries: int = 10_000) -> tuple[OUModel, NodeSet, NodeSet, NodeSet]:
    """Model plus a separated query ``(A, B, C)`` with ``A`` nonempty.

    A random cDG and pairwise disjoint ``A``, ``B``, ``C`` are drawn until
    ``B`` is separated from ``A`` given ``C``, some parent of ``B`` lies
    outside ``A | C`` and another lies in ``C``. The first keeps the check
    from being vacuous; the second puts observed signal into the drift
    estimate, so its scale is nonzero. The model's
    nonzeros follow the graph exactly; diagonal dominance makes ``M``
    stable and ``Sigma`` positive definite.
    """
    for _ in range(max_tries):
        n = rng.randint(n_min, n_max)
        g = random_cdg(n, rng, p_directed=0.35, p_blunt=0.35)
        roles = [rng.randrange(4) for _ in range(n)]  # 0 free, 1 A, 2 B, 3 C
        A = sum(1 << v for v in range(n) if roles[v] == 1)
        B = sum(1 << v for v in range(n) if roles[v] == 2)
        C = sum(1 << v for v in range(n) if roles[v] == 3)
        if not A or not B:
            continue
        pa_B = 0
        for b in bits(B):
            pa_B |= g.parents[b]
        if not pa_B & ~(A | C) or not pa_B & C:
            continue
        if mu_separated(g, A, B, C):
            return _model_on_graph(g, rng), A, B, C
    raise NumericsError("no separated instance found")


def negative_control_query(model: OUModel) -> tuple[NodeSet, NodeSet, NodeSet]:
    """A non-separated query: a directed edge ``a -> b`` (``a != b``) with ``C`` empty,
    else a blunt edge ``a |-| b`` (walk ``a |-| b -> b``)."""
    g = canonical_lig(model)
    for a, b in sorted(g.directed):
        if a != b:
            return 1 << a, 1 << b, 0
    for a, b in sorted(g.blunt):
        return 1 << a, 1 << b, 0
    raise NumericsError("model has no edge between distinct coordinates")
