"""HAMD hybrid solver: batched continuous dynamics, exact-K projection, K-swap polish, late ILS.

The continuous phase integrates damped momentum dynamics on the effective
energy ``f(x) + beta(t) sum x^2 (x - 1)^2`` with a curvature-informed transverse
force and reflecting walls at 0 and 1. Binary answers only ever come from
top-K snapping, so every portfolio the solver emits has exactly ``K`` assets.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .instance import Portfolio, PortfolioInstance
from .native import EnergyParams, SwapCache, eval_effective_energy, eval_native, gradient, hvp

MODES = ("cont", "proj", "polish", "full")
TTT_FRACTIONS = (0.10, 0.25, 0.50, 0.75, 1.00)


@dataclass(frozen=True)
class HamdConfig:
    """Solver settings. Exactly one of ``budget_secs`` / ``budget_iters`` must be set.

    In iteration mode one unit is a batch dynamics step during the continuous
    phase and one perturb-and-polish step during ILS.
    """

    mode: str = "full"
    budget_secs: float | None = None
    budget_iters: int | None = None
    batch_size: int = 32
    ils_fraction: float = 0.20
    damping: float = 0.1
    step_size: float = 0.05
    transverse_weight: float = 1.0
    epsilon: float = 1e-9
    restitution: float = 0.5
    grad_clip: float = 1e3
    stall_steps: int = 200
    stall_rtol: float = 1e-6
    restarts_per_trajectory: float = 3.0
    near_radius: float = 0.2
    snap_every: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if (self.budget_secs is None) == (self.budget_iters is None):
            raise ValueError("set exactly one of budget_secs and budget_iters")
        if self.budget_secs is not None and not self.budget_secs > 0:
            raise ValueError("budget_secs must be positive")
        if self.budget_iters is not None and self.budget_iters <= 0:
            raise ValueError("budget_iters must be positive")
        if not 0.0 < self.ils_fraction < 1.0:
            raise ValueError("ils_fraction must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")

    @property
    def fixed_iterations(self) -> bool:
        return self.budget_iters is not None

    @property
    def continuous_fraction(self) -> float:
        """Share of the budget given to the continuous phase (all of it without ILS)."""
        return 1.0 - self.ils_fraction if self.mode == "full" else 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrajectoryBatch:
    """``B`` continuous states plus per-trajectory restart bookkeeping."""

    x: np.ndarray
    v: np.ndarray
    best_selection: np.ndarray
    best_value: np.ndarray
    restarts: np.ndarray
    beta: float = 0.0
    aborted: np.ndarray = None
    energy_best: np.ndarray = None
    last_improve: np.ndarray = None
    last_restart_at: np.ndarray = None
    step: int = 0

    def __post_init__(self):
        B = self.x.shape[0]
        if self.aborted is None:
            self.aborted = np.zeros(B, dtype=bool)
        if self.energy_best is None:
            self.energy_best = np.full(B, np.inf)
        if self.last_improve is None:
            self.last_improve = np.zeros(B, dtype=np.int64)
        if self.last_restart_at is None:
            self.last_restart_at = np.zeros(B)

    @classmethod
    def initialize(cls, instance: PortfolioInstance, B: int, rng) -> TrajectoryBatch:
        x = rng.random((B, instance.n))
        sel = np.stack([project_topk(row, instance.K).selection for row in x])
        vals = np.asarray(eval_native(instance, sel), dtype=np.float64).reshape(B)
        return cls(x=x, v=np.zeros_like(x), best_selection=sel, best_value=vals,
                   restarts=np.zeros(B, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.x.shape[0]


@dataclass
class RunTrace:
    """Outcome of one solve: incumbent history, counters, final portfolio."""

    samples: list = field(default_factory=list)
    restarts: int = 0
    ils_steps: int = 0
    dynamics_steps: int = 0
    portfolio: Portfolio | None = None
    value: float = float("inf")
    mode: str = "full"
    seed: int = 0
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def record(self, fraction: float, value: float) -> None:
        if not self.samples or value < self.samples[-1][1]:
            self.samples.append((float(fraction), float(value)))

    def best_at(self, fraction: float) -> float:
        """Best incumbent value reached by ``fraction`` of the budget."""
        best = float("inf")
        for f, v in self.samples:
            if f <= fraction + 1e-12:
                best = v
        return best

    def ttt(self, fractions=TTT_FRACTIONS) -> list:
        return [self.best_at(f) for f in fractions]


# ---------------------------------------------------------------------------
# continuous phase
# ---------------------------------------------------------------------------


def transverse_force(g: np.ndarray, hv: np.ndarray, epsilon: float = 1e-9) -> np.ndarray:
    """Component of ``hv`` orthogonal to ``g``, scaled by ``min(1, |g| / (|hv| + eps))``.

    Works row-wise on (B, n) arrays. The projection is applied twice so the
    result stays orthogonal to working precision even when ``hv`` is nearly
    parallel to ``g``.
    """
    g2 = np.atleast_2d(g)
    h2 = np.atleast_2d(hv)
    gg = np.einsum("bi,bi->b", g2, g2)
    safe = np.where(gg > 0.0, gg, 1.0)
    f = h2 - (np.einsum("bi,bi->b", h2, g2) / safe)[:, None] * g2
    f = f - (np.einsum("bi,bi->b", f, g2) / safe)[:, None] * g2
    f[gg == 0.0] = 0.0
    alpha = np.minimum(1.0, np.sqrt(gg) / (np.linalg.norm(h2, axis=1) + epsilon))
    f = alpha[:, None] * f
    return f.reshape(np.shape(hv))


def reflect(x: np.ndarray, v: np.ndarray, restitution: float) -> None:
    """Damped elastic reflection into [0, 1], in place.

    A coordinate that left the box is mirrored back across the wall and its
    velocity is reversed and scaled by ``restitution``.
    """
    hi = x > 1.0
    lo = x < 0.0
    x[hi] = 2.0 - x[hi]
    x[lo] = -x[lo]
    hit = hi | lo
    v[hit] = -restitution * v[hit]
    np.clip(x, 0.0, 1.0, out=x)


def dynamics_step(batch: TrajectoryBatch, instance: PortfolioInstance, config: HamdConfig,
                  t: float) -> TrajectoryBatch:
    """One damped momentum step for every trajectory; updates ``batch`` in place and returns it.

    ``t`` is the progress through the continuous phase; the well-potential
    ramp is ``beta = t``.
    """
    beta = float(min(max(t, 0.0), 1.0))
    params = EnergyParams(beta=beta)
    x, v = batch.x, batch.v
    g = gradient(instance, x, params)
    bad = ~np.all(np.isfinite(g), axis=1)
    if bad.any():
        warnings.warn(f"non-finite gradient on trajectories {np.flatnonzero(bad).tolist()}; aborting them",
                      RuntimeWarning, stacklevel=2)
        batch.aborted |= bad
        g[bad] = 0.0
        v[bad] = 0.0
    np.clip(g, -config.grad_clip, config.grad_clip, out=g)
    hv = hvp(instance, x, v, params)
    force = transverse_force(g, hv, config.epsilon)
    v *= 1.0 - config.damping
    v += config.step_size * (-g + config.transverse_weight * force)
    x += config.step_size * v
    reflect(x, v, config.restitution)
    batch.beta = beta
    batch.step += 1
    return batch


# ---------------------------------------------------------------------------
# discrete stages
# ---------------------------------------------------------------------------


def project_topk(x, K: int) -> Portfolio:
    """The ``K`` largest coordinates set to 1; ties go to the lower index."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 < K < len(x):
        raise ValueError(f"need 0 < K < n, got K={K}, n={len(x)}")
    order = np.argsort(-x, kind="stable")
    sel = np.zeros(len(x), dtype=np.int8)
    sel[order[:K]] = 1
    return Portfolio(sel)


def improvement_tol(value: float) -> float:
    return 1e-12 * max(1.0, abs(value))


def kswap_polish(portfolio: Portfolio, instance: PortfolioInstance) -> Portfolio:
    """Steepest-descent over all ``K(n-K)`` single swaps until none improves.

    Ties between equally good swaps go to the lowest (out, in) index pair.
    """
    cache = SwapCache(instance, portfolio)
    while True:
        out_idx, in_idx, D = cache.delta_matrix()
        if D.size == 0:
            break
        a = int(np.argmin(D))
        best = D.flat[a]
        if not best < -improvement_tol(cache.value):
            break
        r, c = divmod(a, D.shape[1])
        cache.apply(out_idx[r], in_idx[c], best)
    return cache.portfolio


def perturb_pairs(portfolio: Portfolio, rng) -> Portfolio:
    """Swap two selected assets for two unselected ones, drawn uniformly."""
    sel = np.array(portfolio.selection)
    ins = np.flatnonzero(sel)
    outs = np.flatnonzero(sel == 0)
    sel[rng.choice(ins, size=2, replace=False)] = 0
    sel[rng.choice(outs, size=2, replace=False)] = 1
    return Portfolio(sel)


@dataclass
class IlsResult:
    portfolio: Portfolio
    value: float
    steps: int


def ils_phase(best: Portfolio, instance: PortfolioInstance, config: HamdConfig,
              remaining_steps: int | None = None, deadline: float | None = None,
              rng=None, on_improve=None) -> IlsResult:
    """Perturb-polish-accept loop around the incumbent until the budget runs out.

    Give either ``remaining_steps`` or a ``time.monotonic()`` ``deadline``.
    ``on_improve(step, value)`` is called after every accepted improvement.
    """
    rng = np.random.default_rng() if rng is None else rng
    value = eval_native(instance, best.selection)
    K, n = instance.K, instance.n
    if K < 2 or n - K < 2:
        warnings.warn("2-pair perturbation needs K >= 2 and n - K >= 2; ILS skipped",
                      RuntimeWarning, stacklevel=2)
        return IlsResult(best, value, 0)
    steps = 0
    while True:
        if remaining_steps is not None and steps >= remaining_steps:
            break
        if deadline is not None and time.monotonic() >= deadline:
            break
        if remaining_steps is None and deadline is None:
            break
        cand = kswap_polish(perturb_pairs(best, rng), instance)
        steps += 1
        cval = eval_native(instance, cand.selection)
        if cval < value:
            best, value = cand, cval
            if on_improve is not None:
                on_improve(steps, value)
    return IlsResult(best, value, steps)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, config: HamdConfig):
        self.config = config
        self.start = time.monotonic()

    def progress(self, units: int) -> float:
        if self.config.fixed_iterations:
            return units / self.config.budget_iters
        return (time.monotonic() - self.start) / self.config.budget_secs

    def deadline(self) -> float:
        return self.start + self.config.budget_secs


def _near(incumbent: np.ndarray, radius: float, rng) -> np.ndarray:
    x = incumbent + rng.uniform(-radius, radius, size=incumbent.shape)
    return np.clip(x, 0.0, 1.0)


def solve(instance: PortfolioInstance, config: HamdConfig, seed: int = 0) -> RunTrace:
    """Run the hybrid pipeline in ``config.mode`` and return its trace.

    ``cont`` runs one trajectory with no restarts and reports the best
    periodic top-K snap; ``proj`` restarts with snapping only; ``polish`` adds
    K-swap polish on every restart; ``full`` adds the ILS phase at the end.
    """
    rng = np.random.default_rng(seed)
    K = instance.K
    mode = config.mode
    budget = _Budget(config)
    trace = RunTrace(mode=mode, seed=seed, config=config.to_dict())

    B = 1 if mode == "cont" else config.batch_size
    batch = TrajectoryBatch.initialize(instance, B, rng)
    b0 = int(np.argmin(batch.best_value))
    inc_sel = batch.best_selection[b0].copy()
    inc_val = float(batch.best_value[b0])
    trace.record(0.0, inc_val)

    phase_end = config.continuous_fraction
    if config.fixed_iterations:
        phase_steps = int(round(phase_end * config.budget_iters))
        if mode == "full":
            phase_steps = min(phase_steps, config.budget_iters - 1)
    cap = phase_end / config.restarts_per_trajectory

    step = 0
    progress = budget.progress(0)
    while True:
        if config.fixed_iterations:
            if step >= phase_steps:
                break
        elif progress >= phase_end:
            break
        dynamics_step(batch, instance, config, progress / phase_end)
        step += 1
        progress = budget.progress(step)
        params = EnergyParams(beta=batch.beta)
        energy = np.atleast_1d(eval_effective_energy(instance, batch.x, params))
        better = energy < batch.energy_best - config.stall_rtol * np.maximum(np.abs(energy), 1e-12)
        better &= np.isfinite(energy)
        batch.energy_best[better] = energy[better]
        batch.last_improve[better] = step

        if mode == "cont":
            if step % config.snap_every == 0:
                snap = project_topk(batch.x[0], K)
                val = eval_native(instance, snap.selection)
                if val < inc_val:
                    inc_sel, inc_val = snap.selection.copy(), val
                    trace.record(progress, val)
            continue

        due = (
            batch.aborted
            | (step - batch.last_improve >= config.stall_steps)
            | (progress - batch.last_restart_at >= cap)
        )
        for b in np.flatnonzero(due):
            snap = project_topk(batch.x[b], K)
            if mode in ("polish", "full"):
                snap = kswap_polish(snap, instance)
            val = eval_native(instance, snap.selection)
            if val < batch.best_value[b]:
                batch.best_value[b] = val
                batch.best_selection[b] = snap.selection
            if val < inc_val:
                inc_sel, inc_val = snap.selection.copy(), val
                trace.record(progress, val)
            if batch.restarts[b] % 2 == 0:
                batch.x[b] = _near(inc_sel.astype(np.float64), config.near_radius, rng)
            else:
                batch.x[b] = rng.random(instance.n)
            batch.v[b] = 0.0
            batch.restarts[b] += 1
            batch.aborted[b] = False
            batch.energy_best[b] = np.inf
            batch.last_improve[b] = step
            batch.last_restart_at[b] = progress
            trace.restarts += 1

    trace.dynamics_steps = step
    if mode == "cont":
        snap = project_topk(batch.x[0], K)
        val = eval_native(instance, snap.selection)
        if val < inc_val:
            inc_sel, inc_val = snap.selection.copy(), val
            trace.record(progress, val)

    if mode == "full":
        def on_improve(ils_step, value):
            if config.fixed_iterations:
                trace.record((step + ils_step) / config.budget_iters, value)
            else:
                trace.record(budget.progress(0), value)

        if config.fixed_iterations:
            res = ils_phase(Portfolio(inc_sel), instance, config,
                            remaining_steps=config.budget_iters - step, rng=rng, on_improve=on_improve)
        else:
            res = ils_phase(Portfolio(inc_sel), instance, config,
                            deadline=budget.deadline(), rng=rng, on_improve=on_improve)
        trace.ils_steps = res.steps
        if res.value < inc_val:
            inc_sel, inc_val = res.portfolio.selection.copy(), res.value

    trace.portfolio = Portfolio(inc_sel)
    trace.value = float(inc_val)
    trace.record(1.0, inc_val)
    trace.wall_time = time.monotonic() - budget.start
    return trace
