"""Single-bit-flip baselines on the augmented QUBO: simulated annealing and tabu search.

Both solvers keep the local field ``field[i] = sum_j W_ij s_j`` up to date, so a
flip delta ``(1 - 2 s_i)(h_i + field_i)`` costs O(1) and applying a flip costs
O(row degree). The objective they minimise is the matrix energy; their answers
are judged by decoding the first ``n`` bits and evaluating the native cubic
objective on them.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from . import _kernels
from .hamd import TTT_FRACTIONS
from .native import eval_native
from .quadratize import AugmentedQubo, decode, embed

INITS = ("zeros", "feasible", "random")


def _check_budget(secs, units, unit_name):
    if (secs is None) == (units is None):
        raise ValueError(f"set exactly one of budget_secs and {unit_name}")
    if secs is not None and not secs > 0:
        raise ValueError("budget_secs must be positive")
    if units is not None and units <= 0:
        raise ValueError(f"{unit_name} must be positive")


@dataclass(frozen=True)
class AnnealConfig:
    """Simulated-annealing settings.

    Temperatures left as ``None`` are calibrated from ``calibration_flips``
    random single flips of the starting state so that an average uphill move
    is accepted with probability ``initial_acceptance`` at the start and
    ``final_acceptance`` at the end. Cooling is geometric, one temperature per
    sweep of ``n_aug`` proposals at uniformly random indices.
    """

    budget_secs: float | None = None
    budget_sweeps: int | None = None
    seed: int = 0
    initial_temperature: float | None = None
    final_temperature: float | None = None
    initial_acceptance: float = 0.8
    final_acceptance: float = 0.01
    calibration_flips: int = 100
    init: str = "zeros"

    def __post_init__(self):
        _check_budget(self.budget_secs, self.budget_sweeps, "budget_sweeps")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if not 0.0 < self.final_acceptance < self.initial_acceptance < 1.0:
            raise ValueError("need 0 < final_acceptance < initial_acceptance < 1")
        t0, tf = self.initial_temperature, self.final_temperature
        for t in (t0, tf):
            if t is not None and not t > 0:
                raise ValueError("temperatures must be positive")
        if t0 is not None and tf is not None and not tf < t0:
            raise ValueError("final temperature must be below the initial one")
        if self.calibration_flips < 1:
            raise ValueError("calibration_flips must be >= 1")

    @property
    def fixed_iterations(self) -> bool:
        return self.budget_sweeps is not None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TabuConfig:
    """Tabu-search settings; ``tenure=None`` means ``max(10, n_aug // 50)``.

    Each iteration scans the full single-flip neighbourhood. ``budget_iters``
    counts flips.
    """

    budget_secs: float | None = None
    budget_iters: int | None = None
    seed: int = 0
    tenure: int | None = None
    aspiration: bool = True
    init: str = "zeros"

    def __post_init__(self):
        _check_budget(self.budget_secs, self.budget_iters, "budget_iters")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.tenure is not None and self.tenure < 1:
            raise ValueError("tenure must be >= 1")

    @property
    def fixed_iterations(self) -> bool:
        return self.budget_iters is not None

    def resolved_tenure(self, n_aug: int) -> int:
        return self.tenure if self.tenure is not None else max(10, n_aug // 50)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BaselineTrace:
    """Best-seen energy history ``(fraction, energy)`` plus decoded-native TTT checkpoints.

    ``ttt`` holds the native objective of the decoded best-energy state at each
    of the five budget fractions. It need not be monotone: a lower matrix
    energy can decode to a worse portfolio.
    """

    solver: str
    samples: list = field(default_factory=list)
    ttt: list = field(default_factory=list)
    sweeps: int = 0
    flips: int = 0
    accepted: int = 0
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def record(self, fraction: float, energy: float) -> None:
        if not self.samples or energy < self.samples[-1][1]:
            self.samples.append((float(fraction), float(energy)))


@dataclass
class BaselineResult:
    final_state: np.ndarray
    best_state: np.ndarray
    best_energy: float
    trace: BaselineTrace


def initial_state(qubo: AugmentedQubo, init: str, seed: int) -> np.ndarray:
    """Starting state shared by both baselines for a given seed.

    ``feasible`` draws a uniform exact-K selection and sets every auxiliary to
    its product, so the start carries no penalty; ``zeros`` is the all-zeros
    state; ``random`` is uniform over all ``2**n_aug`` states.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[0])
    if init == "zeros":
        return np.zeros(qubo.n_aug, dtype=np.int8)
    if init == "random":
        return rng.integers(0, 2, size=qubo.n_aug).astype(np.int8)
    if init != "feasible":
        raise ValueError(f"init must be one of {INITS}")
    x = np.zeros(qubo.n, dtype=np.int8)
    x[rng.choice(qubo.n, size=qubo.K, replace=False)] = 1
    return embed(qubo, x)


def _search_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])


def local_field(qubo: AugmentedQubo, s) -> np.ndarray:
    """``W s`` for the symmetric off-diagonal part ``W`` of the QUBO."""
    _, indptr, indices, data = qubo.neighbors
    W = sp.csr_matrix((data, indices, indptr), shape=(qubo.n_aug, qubo.n_aug))
    return W @ np.asarray(s, dtype=np.float64)


def flip_deltas(qubo: AugmentedQubo, s) -> np.ndarray:
    """Matrix-energy change of flipping each bit of ``s`` on its own."""
    s = np.asarray(s)
    h = qubo.neighbors[0]
    return (1.0 - 2.0 * s) * (h + local_field(qubo, s))


def calibrate_temperatures(deltas, initial_acceptance: float = 0.8,
                           final_acceptance: float = 0.01) -> tuple[float, float]:
    """Temperatures at which the mean Metropolis acceptance of the uphill ``deltas`` hits each target.

    With no uphill sample the mean ``|delta|`` (or 1) is used as the single
    energy scale.
    """
    d = np.asarray(deltas, dtype=np.float64)
    up = d[d > 0]
    if len(up) == 0:
        scale = float(np.mean(np.abs(d))) if len(d) and np.any(d) else 1.0
        return scale / -math.log(initial_acceptance), scale / -math.log(final_acceptance)

    def solve_for(target):
        def gap(log_t):
            return float(np.mean(np.exp(-up / math.exp(log_t)))) - target

        lo, hi = math.log(up.min()) - 10.0, math.log(up.max()) + 10.0
        while gap(lo) > 0:
            lo -= 10.0
        while gap(hi) < 0:
            hi += 10.0
        return math.exp(brentq(gap, lo, hi, xtol=1e-12))

    return solve_for(initial_acceptance), solve_for(final_acceptance)


class _Clock:
    def __init__(self, secs, units):
        self.secs, self.units = secs, units
        self.start = time.monotonic()

    def fraction(self, done: int) -> float:
        if self.units is not None:
            return done / self.units
        return (time.monotonic() - self.start) / self.secs

    def finished(self, done: int) -> bool:
        return self.fraction(done) >= 1.0


class _TTT:
    """Decoded-native checkpoints of the best-seen state at fixed budget fractions."""

    def __init__(self, qubo: AugmentedQubo):
        self.qubo = qubo
        self.values: list = []

    def _native(self, best_s):
        x, _ = decode(self.qubo, best_s)
        if self.qubo.instance is None:
            return float("nan")
        return float(eval_native(self.qubo.instance, x.selection))

    def update(self, fraction: float, best_s) -> None:
        while len(self.values) < len(TTT_FRACTIONS) and fraction >= TTT_FRACTIONS[len(self.values)]:
            self.values.append(self._native(best_s))

    def finish(self, best_s) -> list:
        while len(self.values) < len(TTT_FRACTIONS):
            self.values.append(self._native(best_s))
        return self.values


def sa_solve(qubo: AugmentedQubo, config: AnnealConfig) -> BaselineResult:
    """Metropolis single-bit-flip annealing with geometric cooling on the matrix energy."""
    h, indptr, indices, data = qubo.neighbors
    n_aug = qubo.n_aug
    s = initial_state(qubo, config.init, config.seed)
    rng = _search_rng(config.seed)
    fld = local_field(qubo, s)
    energy = qubo.matrix_energy(s)

    t0, tf = config.initial_temperature, config.final_temperature
    if t0 is None or tf is None:
        probe = rng.integers(0, n_aug, size=config.calibration_flips)
        c0, cf = calibrate_temperatures(flip_deltas(qubo, s)[probe],
                                        config.initial_acceptance, config.final_acceptance)
        t0 = c0 if t0 is None else t0
        tf = cf if tf is None else tf
        if not tf < t0:
            raise ValueError("calibrated final temperature is not below the initial one")
    cfg = config.to_dict() | {"initial_temperature": t0, "final_temperature": tf}

    trace = BaselineTrace(solver="sa", config=cfg)
    ttt = _TTT(qubo)
    clock = _Clock(config.budget_secs, config.budget_sweeps)
    best_s = s.copy()
    best_energy = energy
    trace.record(0.0, best_energy)
    sweep = 0
    ratio = math.log(tf / t0)
    while True:
        frac = clock.fraction(sweep)
        if frac >= 1.0:
            break
        ttt.update(frac, best_s)
        if config.fixed_iterations:
            pos = sweep / max(config.budget_sweeps - 1, 1)
        else:
            pos = frac
        temp = t0 * math.exp(ratio * min(pos, 1.0))
        idx = rng.integers(0, n_aug, size=n_aug)
        u = rng.random(n_aug)
        energy, best_energy, acc = _kernels.anneal_sweeps(
            s, fld, h, indptr, indices, data, idx, u, temp, energy, best_s, best_energy)
        sweep += 1
        trace.accepted += int(acc)
        trace.record(clock.fraction(sweep), best_energy)

    trace.sweeps = sweep
    trace.flips = sweep * n_aug
    trace.ttt = ttt.finish(best_s)
    trace.wall_time = time.monotonic() - clock.start
    return BaselineResult(final_state=s, best_state=best_s,
                          best_energy=qubo.matrix_energy(best_s), trace=trace)


def tabu_solve(qubo: AugmentedQubo, config: TabuConfig) -> BaselineResult:
    """Steepest non-tabu single flips with aspiration on the matrix energy.

    A flipped variable stays tabu for ``tenure`` iterations. The clock is
    checked every ``n_aug`` iterations in wall-clock mode.
    """
    h, indptr, indices, data = qubo.neighbors
    n_aug = qubo.n_aug
    tenure = config.resolved_tenure(n_aug)
    s = initial_state(qubo, config.init, config.seed)
    fld = local_field(qubo, s)
    energy = qubo.matrix_energy(s)
    cfg = config.to_dict() | {"tenure": tenure}

    trace = BaselineTrace(solver="tabu", config=cfg)
    ttt = _TTT(qubo)
    clock = _Clock(config.budget_secs, config.budget_iters)
    best_s = s.copy()
    best_energy = energy
    trace.record(0.0, best_energy)
    tabu_until = np.zeros(n_aug, dtype=np.int64)
    chunk = max(n_aug, 1)
    flips = np.empty(chunk, dtype=np.int64)
    it = 0
    while True:
        frac = clock.fraction(it)
        if frac >= 1.0:
            break
        ttt.update(frac, best_s)
        todo = chunk if config.budget_iters is None else min(chunk, config.budget_iters - it)
        energy, best_energy = _kernels.tabu_iterations(
            s, fld, h, indptr, indices, data, tabu_until, it, todo, tenure,
            config.aspiration, energy, best_s, best_energy, flips)
        it += todo
        trace.sweeps += 1
        trace.record(clock.fraction(it), best_energy)

    trace.flips = it
    trace.accepted = it
    trace.ttt = ttt.finish(best_s)
    trace.wall_time = time.monotonic() - clock.start
    return BaselineResult(final_state=s, best_state=best_s,
                          best_energy=qubo.matrix_energy(best_s), trace=trace)


def decoded_native(qubo: AugmentedQubo, state) -> float:
    """Native objective of the first ``n`` bits of an augmented state."""
    if qubo.instance is None:
        raise ValueError("this QUBO carries no native instance")
    x, _ = decode(qubo, state)
    return float(eval_native(qubo.instance, x.selection))
