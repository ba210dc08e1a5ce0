"""Jacobian of the invariant set, its rank, and the nuclear-norm penalty.

The Jacobian ``2 B diag(theta)`` loses rank exactly when zero-weight edges
cut a group of hidden neurons off from both inputs and outputs; the rank
can be read off the quotient graph or from singular values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dag import Dag, detached_hidden_sets, quotient_components, reduced_incidence

TAU_ZERO = 1e-3
TAU_RANK = 1e-8
TAU_SV = 1e-12


def jacobian(B: np.ndarray, theta) -> np.ndarray:
    return 2.0 * B * np.asarray(theta, dtype=float)[None, :]


def singular_values(M) -> np.ndarray:
    """Full singular spectrum, descending (LAPACK divide-and-conquer)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def numerical_rank(M, tau_rank: float = TAU_RANK) -> int:
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tau_rank * s[0]))


def zero_edges(dag: Dag, theta, tau_zero: float = TAU_ZERO) -> set[int]:
    th = np.asarray(theta, dtype=float)
    return {e for e, x in zip(dag.edge_ids, th) if abs(x) <= tau_zero}


def rank_via_topology(dag: Dag, theta, tau_zero: float = TAU_ZERO) -> int:
    return len(dag.hidden) + 1 - quotient_components(dag, zero_edges(dag, theta, tau_zero))


def disconnected_sets(dag: Dag, theta, tau_zero: float = TAU_ZERO) -> list[frozenset[int]]:
    return detached_hidden_sets(dag, zero_edges(dag, theta, tau_zero))


def nuclear_norm_and_grad(B: np.ndarray, theta) -> tuple[float, np.ndarray]:
    """``||2 B diag(theta)||_*`` and a (sub)gradient with respect to theta.

    With the thin SVD ``J = U S V^T`` the gradient is
    ``d/d theta_e = <U V^T, dJ/d theta_e> = 2 sum_v (U V^T)_{ve} B_{ve}``.
    ``V^T`` is recovered as ``S^-1 U^T J`` over singular values above
    ``TAU_SV * s_max`` so that columns of exactly-zero edges get exactly
    zero gradient.
    """
    th = np.asarray(theta, dtype=float)
    J = jacobian(B, th)
    if J.size == 0 or not np.any(th):
        return 0.0, np.zeros_like(th)
    U, s, _ = np.linalg.svd(J, full_matrices=False)
    keep = s > TAU_SV * s[0]
    Ur, sr = U[:, keep], s[keep]
    G = (Ur / sr) @ (Ur.T @ J)
    grad = 2.0 * np.sum(G * B, axis=0)
    return float(np.sum(s)), grad


@dataclass
class SingularityReport:
    rank_topological: int
    rank_numerical: int
    singular_values: list[float]
    disconnected_sets: list[list[int]]
    zero_edges: list[int]
    n_hidden: int
    tau_zero: float
    tau_rank: float
    extra: dict = field(default_factory=dict)

    @property
    def singular(self) -> bool:
        return self.rank_topological < self.n_hidden

    def to_dict(self):
        return {
            "n_hidden": self.n_hidden,
            "rank_topological": self.rank_topological,
            "rank_numerical": self.rank_numerical,
            "singular": self.singular,
            "singular_values": self.singular_values,
            "disconnected_sets": self.disconnected_sets,
            "zero_edges": self.zero_edges,
            "tau_zero": self.tau_zero,
            "tau_rank": self.tau_rank,
            **self.extra,
        }


def singularity_report(dag: Dag, theta, tau_zero: float = TAU_ZERO,
                       tau_rank: float = TAU_RANK) -> SingularityReport:
    B = reduced_incidence(dag)
    J = jacobian(B, theta)
    s = singular_values(J)
    return SingularityReport(
        rank_topological=rank_via_topology(dag, theta, tau_zero),
        rank_numerical=numerical_rank(J, tau_rank),
        singular_values=[float(x) for x in s],
        disconnected_sets=[sorted(S) for S in disconnected_sets(dag, theta, tau_zero)],
        zero_edges=sorted(zero_edges(dag, theta, tau_zero)),
        n_hidden=len(dag.hidden),
        tau_zero=tau_zero,
        tau_rank=tau_rank,
    )
