"""Decoded-feasibility audit of augmented states, exact enumeration oracle, random reference floor."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .instance import Portfolio, PortfolioInstance, n_portfolios
from .native import eval_native, terms
from .quadratize import AugmentedQubo, decompose, rosenberg_penalty

ENUMERATION_CAP = 10**7


@dataclass(frozen=True)
class FeasibilityRecord:
    """What an augmented-space answer looks like once decoded back to native variables.

    ``false_positive_count`` counts auxiliaries set to 1 whose product is 0;
    ``false_negative_count`` the reverse. ``penalty_fraction`` divides the two
    penalty magnitudes by ``|native + card_penalty + rosenberg_penalty|``, i.e.
    the matrix energy with the cardinality constant added back, so a feasible
    consistent state scores exactly 0.
    """

    augmented_matrix_energy: float
    decoded_native_objective: float
    cardinality: int
    card_violation: int
    aux_viol_count: int
    aux_viol_rate: float
    false_positive_count: int
    false_negative_count: int
    card_penalty: float
    rosenberg_penalty: float
    penalty_fraction: float

    @property
    def native_feasible(self) -> bool:
        return self.card_violation == 0

    def to_dict(self) -> dict:
        return asdict(self)


def feasibility_record(qubo: AugmentedQubo, state, instance: PortfolioInstance) -> FeasibilityRecord:
    """Audit one raw augmented state, recomputing every quantity from the bits."""
    s = np.asarray(state)
    if s.shape != (qubo.n_aug,):
        raise ValueError(f"state must have length n_aug={qubo.n_aug}, got {s.shape}")
    if instance.n != qubo.n or instance.K != qubo.K:
        raise ValueError("instance does not match the QUBO")
    s = s.astype(np.int64)
    x, w = s[: qubo.n], s[qubo.n:]
    a = qubo.aux_pairs
    prod = x[a[:, 0]] * x[a[:, 1]]
    fp = int(np.sum((w == 1) & (prod == 0)))
    fn = int(np.sum((w == 0) & (prod == 1)))
    m = len(a)

    native = float(eval_native(instance, x))
    cardinality = int(x.sum())
    card_pen = float(qubo.lambda_K * (cardinality - qubo.K) ** 2)
    ros_pen = float(np.sum(rosenberg_penalty(x[a[:, 0]], x[a[:, 1]], w, qubo.lambda_R))) if m else 0.0
    # the surrogate objective differs from the native one exactly where w disagrees with its product
    surrogate = native + (float(np.sum(qubo.aux_coeff * (w - prod) * x[a[:, 2]])) if m else 0.0)
    total = surrogate + card_pen + ros_pen
    pen = abs(card_pen) + abs(ros_pen)
    if pen == 0.0:
        frac = 0.0
    elif total == 0.0:
        frac = float("inf")
    else:
        frac = pen / abs(total)
    return FeasibilityRecord(
        augmented_matrix_energy=qubo.matrix_energy(s),
        decoded_native_objective=native,
        cardinality=cardinality,
        card_violation=abs(cardinality - qubo.K),
        aux_viol_count=fp + fn,
        aux_viol_rate=(fp + fn) / m if m else 0.0,
        false_positive_count=fp,
        false_negative_count=fn,
        card_penalty=card_pen,
        rosenberg_penalty=ros_pen,
        penalty_fraction=frac,
    )


def reconcile(qubo: AugmentedQubo, state, record: FeasibilityRecord) -> float:
    """Relative mismatch between the record's recomputation and the QUBO's own decomposition.

    Compares ``matrix_energy + constant`` against the quadratizer's
    ``native + card + rosenberg``, and the penalty components one by one.
    """
    dec = decompose(qubo, state)
    scale = max(1.0, abs(record.augmented_matrix_energy) + abs(qubo.constant))
    errs = [
        record.augmented_matrix_energy + qubo.constant - sum(dec),
        record.card_penalty - dec.card_penalty,
        record.rosenberg_penalty - dec.rosenberg_penalty,
    ]
    return max(abs(e) for e in errs) / scale


class Optimum(NamedTuple):
    portfolio: Portfolio
    value: float
    visited: int


def brute_force_optimum(instance: PortfolioInstance, cap: int = ENUMERATION_CAP,
                        resync: int = 4096) -> Optimum:
    """Global minimiser over every exact-K selection.

    Selections are visited in revolving-door order, each differing from the
    last by one swap whose exact delta updates the running value; the value
    is recomputed from scratch every ``resync`` steps. Near-ties are settled
    on exact values, then by the lexicographically smallest index set.
    """
    total = n_portfolios(instance.n, instance.K)
    if total > cap:
        raise ValueError(f"C({instance.n},{instance.K}) = {total} exceeds the enumeration cap {cap}")
    T = terms(instance)
    scale = max(1.0, float(np.abs(T.cov).sum() + np.abs(T.mu).sum() + T.coeff.sum()))
    sel, value, visited = _kernels.revolving_door_minimum(
        T.cov, T.mu, T.tri, T.coeff, T.inc_ptr, T.inc_tri, instance.n, instance.K,
        resync, 1e-12 * scale,
    )
    return Optimum(Portfolio(sel), float(eval_native(instance, sel)), int(visited))


def random_portfolios(instance: PortfolioInstance, trials: int, seed: int) -> np.ndarray:
    """``trials`` uniform exact-K selections as a (trials, n) 0/1 array."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    keys = rng.random((trials, instance.n))
    picks = np.argpartition(keys, instance.K - 1, axis=1)[:, : instance.K]
    out = np.zeros((trials, instance.n), dtype=np.int8)
    np.put_along_axis(out, picks, 1, axis=1)
    return out


def random_reference_trace(instance: PortfolioInstance, trials: int = 1000, seed: int = 0) -> np.ndarray:
    """Running minimum of the native objective over the sampled portfolios."""
    values = eval_native(instance, random_portfolios(instance, trials, seed))
    return np.minimum.accumulate(np.atleast_1d(values))


def random_reference(instance: PortfolioInstance, trials: int = 1000, seed: int = 0) -> float:
    """Best native objective among ``trials`` uniform exact-K portfolios: a rough floor, not a solver."""
    return float(random_reference_trace(instance, trials, seed)[-1])
