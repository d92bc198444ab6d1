"""Rosenberg reduction of the cubic objective into an augmented QUBO.

Variable layout: indices ``0..n-1`` are the asset bits ``x``; index ``n + t`` is
the auxiliary ``w_t`` standing in for ``x_i x_j`` of triple ``t``. The matrix is
stored upper-triangular with linear terms folded onto the diagonal
(``x**2 == x``), so ``matrix_energy(s) = s' U s``. The cardinality constant
``lambda_K * K**2`` is kept aside in ``constant`` and never enters ``U``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .instance import Portfolio, PortfolioInstance

LAMBDA_R = 10.0


def rosenberg_penalty(xi, xj, w, lambda_R: float = LAMBDA_R):
    """``lambda_R (3w + x_i x_j - 2 x_i w - 2 x_j w)``; zero exactly when ``w = x_i x_j``."""
    return lambda_R * (3 * w + xi * xj - 2 * xi * w - 2 * xj * w)


def quadratize_term(i: int, j: int, k: int, c: float, aux_index: int, aux_map: dict,
                    lambda_R: float = LAMBDA_R):
    """Replace ``c x_i x_j x_k`` by ``c w x_k`` plus the Rosenberg penalty on ``(x_i, x_j, w)``.

    Records ``aux_map[aux_index] = (i, j)`` and returns two lists of
    ``(row, col, value)`` upper-triangular updates: objective, then penalty.
    """
    if len({i, j, k}) != 3:
        raise ValueError("triple indices must be distinct")
    if aux_index in aux_map:
        raise ValueError(f"auxiliary index {aux_index} already allocated")
    if aux_index in (i, j, k):
        raise ValueError("auxiliary index collides with a triple index")
    aux_map[aux_index] = (i, j)

    def ut(r, s, v):
        return (min(r, s), max(r, s), v)

    objective = [ut(k, aux_index, c)]
    penalty = [
        (aux_index, aux_index, 3.0 * lambda_R),
        ut(i, j, lambda_R),
        ut(i, aux_index, -2.0 * lambda_R),
        ut(j, aux_index, -2.0 * lambda_R),
    ]
    return objective, penalty


class Decomposition(NamedTuple):
    native: float
    card_penalty: float
    rosenberg_penalty: float


@dataclass(frozen=True, eq=False)
class AugmentedQubo:
    """Augmented QUBO over ``n_aug = n + m`` binary variables.

    ``aux_pairs[t] = (i, j, k)`` describes auxiliary ``n + t``; ``aux_map`` gives
    the ``(i, j)`` pair per auxiliary index. ``K`` may be 0 for plain QUBOs
    without a cardinality term.
    """

    n: int
    K: int
    coeff: sp.csr_matrix = field(repr=False)
    constant: float = 0.0
    aux_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64), repr=False)
    aux_coeff: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    lambda_R: float = LAMBDA_R
    lambda_K: float = 0.0
    lambda_multiplier: float = 1.0
    max_abs_q: float = 0.0
    instance: PortfolioInstance | None = field(default=None, repr=False)

    def __post_init__(self):
        na = self.n + len(self.aux_pairs)
        if self.coeff.shape != (na, na):
            raise ValueError(f"coefficient matrix must be {na}x{na}")
        if sp.tril(self.coeff, k=-1).nnz:
            raise ValueError("coefficient matrix must be upper-triangular")

    @classmethod
    def from_dense(cls, Q, constant: float = 0.0) -> AugmentedQubo:
        """Plain QUBO (no assets, no auxiliaries): ``s' triu(Q + Q' - diag Q) s``."""
        Q = np.asarray(Q, dtype=np.float64)
        U = np.triu(Q) + np.triu(Q.T, 1)
        return cls(n=len(Q), K=0, coeff=sp.csr_matrix(U), constant=constant)

    @property
    def n_aux(self) -> int:
        return len(self.aux_pairs)

    @property
    def n_aug(self) -> int:
        return self.n + self.n_aux

    @cached_property
    def aux_map(self) -> dict:
        return {self.n + t: (int(i), int(j)) for t, (i, j, _) in enumerate(self.aux_pairs)}

    @property
    def linear(self) -> np.ndarray:
        return self.coeff.diagonal()

    @cached_property
    def neighbors(self):
        """Diagonal ``h`` and symmetric off-diagonal CSR ``(indptr, indices, data)``."""
        U = self.coeff.tocsr()
        h = U.diagonal().copy()
        off = sp.triu(U, k=1)
        W = (off + off.T).tocsr()
        W.sort_indices()
        return (h, W.indptr.astype(np.int64), W.indices.astype(np.int64),
                W.data.astype(np.float64))

    def _state(self, state):
        s = np.asarray(state)
        if s.shape != (self.n_aug,):
            raise ValueError(f"state must have length n_aug={self.n_aug}, got {s.shape}")
        return s.astype(np.float64)

    def matrix_energy(self, state) -> float:
        s = self._state(state)
        return float(s @ (self.coeff @ s))


def build_augmented(instance: PortfolioInstance, lambda_multiplier: float = 1.0,
                    lambda_R: float = LAMBDA_R) -> AugmentedQubo:
    """Assemble the augmented QUBO for ``instance``.

    ``lambda_K = 4 n max|Q| * lambda_multiplier`` where ``max|Q|`` is taken
    over the objective coefficients (quadratic part plus ``c w x_k`` terms)
    before any penalty is inserted.
    """
    n, K, m = instance.n, instance.K, instance.n_triples
    na = n + m
    cov = 0.5 * (instance.covariance + instance.covariance.T)
    rows, cols, vals = [], [], []

    iu, ju = np.triu_indices(n, k=1)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(np.diag(cov) - instance.expected_return)
    rows.append(iu)
    cols.append(ju)
    vals.append(2.0 * cov[iu, ju])

    aux_map: dict = {}
    penalty = []
    for t, ((i, j, k), c) in enumerate(zip(instance.triples.tolist(), instance.cubic_coeff)):
        obj, pen = quadratize_term(i, j, k, float(c), n + t, aux_map, lambda_R)
        penalty.extend(pen)
        for r, s, v in obj:
            rows.append([r])
            cols.append([s])
            vals.append([v])

    def assemble(r, c, v):
        return sp.coo_matrix(
            (np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(na, na)
        ).tocsr()

    Q = assemble(rows, cols, vals)
    max_abs_q = float(np.abs(Q.data).max()) if Q.nnz else 0.0
    lambda_K = 4.0 * n * max_abs_q * lambda_multiplier

    # cardinality: lambda_K (sum x - K)^2 = lambda_K [(1 - 2K) sum x + 2 sum_{i<j} x_i x_j + K^2]
    rows += [np.arange(n), iu]
    cols += [np.arange(n), ju]
    vals += [np.full(n, lambda_K * (1.0 - 2.0 * K)), np.full(len(iu), 2.0 * lambda_K)]
    if penalty:
        pr, pc, pv = (np.array(a) for a in zip(*penalty))
        rows.append(pr.astype(np.int64))
        cols.append(pc.astype(np.int64))
        vals.append(pv.astype(np.float64))
    U = assemble(rows, cols, vals)
    U.sum_duplicates()

    return AugmentedQubo(
        n=n, K=K, coeff=U, constant=lambda_K * K * K,
        aux_pairs=np.array(instance.triples, dtype=np.int64).reshape(-1, 3),
        aux_coeff=np.array(instance.cubic_coeff, dtype=np.float64),
        lambda_R=lambda_R, lambda_K=lambda_K, lambda_multiplier=lambda_multiplier,
        max_abs_q=max_abs_q, instance=instance,
    )


def decode(qubo: AugmentedQubo, state):
    """Leading ``n`` bits as a candidate selection (not checked for cardinality) and the ``w`` slice."""
    s = np.asarray(state)
    if s.shape != (qubo.n_aug,):
        raise ValueError(f"state must have length n_aug={qubo.n_aug}")
    return Portfolio(s[: qubo.n].astype(np.int8)), s[qubo.n:].astype(np.int8)


def embed(qubo: AugmentedQubo, portfolio: Portfolio | np.ndarray) -> np.ndarray:
    """Augmented state with every auxiliary set consistently to ``x_i x_j``."""
    x = np.asarray(getattr(portfolio, "selection", portfolio), dtype=np.int8)
    if x.shape != (qubo.n,):
        raise ValueError(f"selection must have length n={qubo.n}")
    a = qubo.aux_pairs
    w = (x[a[:, 0]] * x[a[:, 1]]).astype(np.int8)
    return np.concatenate([x, w])


def decompose(qubo: AugmentedQubo, state) -> Decomposition:
    """Objective, cardinality and Rosenberg parts recomputed from the decoded bits.

    ``native`` is the surrogate's view of the objective (``c w x_k`` in place of
    the cubic monomial); it equals the native objective on consistent states.
    The cardinality part includes its constant.
    """
    s = qubo._state(state)
    if qubo.instance is None:
        return Decomposition(qubo.matrix_energy(state), 0.0, 0.0)
    inst = qubo.instance
    x, w = s[: qubo.n], s[qubo.n:]
    a = qubo.aux_pairs
    quad = float(x @ inst.covariance @ x - inst.expected_return @ x)
    cubic = float(np.sum(qubo.aux_coeff * w * x[a[:, 2]])) if len(a) else 0.0
    card = float(qubo.lambda_K * (x.sum() - qubo.K) ** 2)
    ros = float(np.sum(rosenberg_penalty(x[a[:, 0]], x[a[:, 1]], w, qubo.lambda_R))) if len(a) else 0.0
    return Decomposition(quad + cubic, card, ros)


def augmented_energy(qubo: AugmentedQubo, state):
    """``(matrix_energy, Decomposition)``; ``matrix_energy`` excludes ``constant``."""
    return qubo.matrix_energy(state), decompose(qubo, state)


def export_qubo(qubo: AugmentedQubo, path) -> Path:
    """Write ``<path>`` as ``row col value`` lines and ``<path>.header`` with the bookkeeping."""
    path = Path(path)
    U = qubo.coeff.tocoo()
    order = np.lexsort((U.col, U.row))
    with path.open("w") as fh:
        for r, c, v in zip(U.row[order], U.col[order], U.data[order]):
            fh.write(f"{r} {c} {float(v).hex()}\n")
    header = path.with_name(path.name + ".header")
    with header.open("w") as fh:
        fh.write(f"n {qubo.n}\nn_aug {qubo.n_aug}\nK {qubo.K}\n")
        fh.write(f"lambda_R {float(qubo.lambda_R).hex()}\n")
        fh.write(f"lambda_K {float(qubo.lambda_K).hex()}\n")
        fh.write(f"constant {float(qubo.constant).hex()}\n")
        for aux, (i, j, k) in enumerate(qubo.aux_pairs.tolist(), start=qubo.n):
            fh.write(f"aux {aux} {i} {j} {k}\n")
    return path
