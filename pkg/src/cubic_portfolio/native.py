"""Native cubic objective: values, analytic derivatives on ``[0,1]^n``, and exact-K swap deltas."""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .instance import Portfolio, PortfolioInstance


@dataclass(frozen=True)
class EnergyParams:
    """Bifurcation ramp value ``beta`` in [0, 1].

    The well potential is centred on the domain midpoint and the expansion
    force is permanently off on the unit box.
    """

    beta: float = 0.0

    center: float = 0.5
    expansion: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.expansion != 0.0:
            raise ValueError("the expansion force is disabled on [0,1]^n")


class _Terms:
    """Per-instance derived arrays, built once and shared by every evaluation."""

    def __init__(self, inst: PortfolioInstance):
        n = inst.n
        self.cov = 0.5 * (inst.covariance + inst.covariance.T)
        self.diag = np.ascontiguousarray(np.diag(self.cov))
        self.mu = np.ascontiguousarray(inst.expected_return)
        self.tri = np.ascontiguousarray(inst.triples)
        self.coeff = np.ascontiguousarray(inst.cubic_coeff)
        self.ti, self.tj, self.tk = (self.tri[:, a].copy() for a in range(3))
        order = np.argsort(self.tri.ravel(), kind="stable")
        self.inc_tri = (order // 3).astype(np.int64)
        self.inc_ptr = np.concatenate(
            [[0], np.cumsum(np.bincount(self.tri.ravel(), minlength=n))]
        ).astype(np.int64)


_TERMS: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def terms(instance: PortfolioInstance) -> _Terms:
    t = _TERMS.get(instance)
    if t is None:
        t = _TERMS[instance] = _Terms(instance)
    return t


def _check(instance, x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != instance.n or x.ndim not in (1, 2):
        raise ValueError(f"{name} must have length n={instance.n}, got shape {x.shape}")
    return x


def _quad_linear(T, x):
    sx = x @ T.cov
    return np.sum(sx * x, axis=-1) - x @ T.mu


def _cubic(T, x):
    prod = x[..., T.ti] * x[..., T.tj] * x[..., T.tk]
    return prod @ T.coeff


def eval_native(instance: PortfolioInstance, x) -> float | np.ndarray:
    """``x'Σx - μ'x + Σ_T c x_i x_j x_k`` for a vector or a batch of row vectors."""
    T = terms(instance)
    x = _check(instance, x)
    val = _quad_linear(T, x) + _cubic(T, x)
    return float(val) if x.ndim == 1 else val


def well_potential(x):
    return np.sum(x * x * (x - 1.0) ** 2, axis=-1)


def eval_effective_energy(instance: PortfolioInstance, x, params: EnergyParams):
    x = _check(instance, x)
    return eval_native(instance, x) + params.beta * well_potential(x)


def gradient(instance: PortfolioInstance, x, params: EnergyParams) -> np.ndarray:
    """Analytic gradient of the effective energy; ``x`` may be (n,) or (B, n)."""
    T = terms(instance)
    x = _check(instance, x)
    x2 = np.ascontiguousarray(np.atleast_2d(x))
    g = 2.0 * (x2 @ T.cov) - T.mu
    _kernels.cubic_gradient(x2, T.tri, T.coeff, g)
    g = g.reshape(x.shape)
    if params.beta:
        g = g + params.beta * (4.0 * x**3 - 6.0 * x**2 + 2.0 * x)
    return g


def hvp(instance: PortfolioInstance, x, v, params: EnergyParams) -> np.ndarray:
    """Hessian of the effective energy at ``x`` applied to ``v`` (same shapes)."""
    T = terms(instance)
    x = _check(instance, x)
    v = _check(instance, v, "v")
    if v.shape != x.shape:
        raise ValueError("x and v must have the same shape")
    x2 = np.ascontiguousarray(np.atleast_2d(x))
    v2 = np.ascontiguousarray(np.atleast_2d(v))
    out = 2.0 * (v2 @ T.cov)
    _kernels.cubic_hvp(x2, v2, T.tri, T.coeff, out)
    out = out.reshape(x.shape)
    if params.beta:
        out = out + params.beta * (12.0 * x**2 - 12.0 * x + 2.0) * v
    return out


class SwapCache:
    """Incremental state for exact-K swap moves on one binary portfolio.

    Holds ``Σx`` per asset and, per triple, how many of its members are
    selected. Owned by a single worker; not safe to share.
    """

    def __init__(self, instance: PortfolioInstance, portfolio: Portfolio):
        self.instance = instance
        self._T = terms(instance)
        self.sel = np.array(portfolio.selection, dtype=np.int8)
        self.sx = self._T.cov @ self.sel.astype(np.float64)
        tri = self._T.tri
        self.tri_count = (self.sel[tri[:, 0]] + self.sel[tri[:, 1]] + self.sel[tri[:, 2]]).astype(np.int64)
        self.value = eval_native(instance, self.sel)

    @property
    def portfolio(self) -> Portfolio:
        return Portfolio(self.sel)

    def delta(self, out_idx: int, in_idx: int) -> float:
        if self.sel[out_idx] != 1 or self.sel[in_idx] != 0:
            raise ValueError("out_idx must be selected and in_idx unselected")
        T = self._T
        return _kernels.swap_delta(
            T.cov, T.mu, T.coeff, T.inc_ptr, T.inc_tri, self.tri_count, T.tri, self.sx,
            int(out_idx), int(in_idx),
        )

    def delta_matrix(self):
        """All swap deltas at once: ``(out_idx, in_idx, D)`` with ``D[a, b]`` for out_idx[a] -> in_idx[b]."""
        T = self._T
        sel = self.sel
        out_idx = np.flatnonzero(sel)
        in_idx = np.flatnonzero(sel == 0)
        sx, d = self.sx, T.diag
        D = (
            2.0 * (sx[in_idx][None, :] - sx[out_idx][:, None])
            + d[in_idx][None, :] + d[out_idx][:, None]
            - 2.0 * T.cov[np.ix_(out_idx, in_idx)]
            - T.mu[in_idx][None, :] + T.mu[out_idx][:, None]
        )
        if len(T.coeff):
            n = len(sel)
            cnt, c = self.tri_count, T.coeff
            full = np.where(cnt == 3, c, 0.0)
            lose = np.bincount(T.tri.ravel(), weights=np.repeat(full, 3), minlength=n)
            two = np.flatnonzero(cnt == 2)
            gain = np.zeros(n)
            pair = np.zeros((n, n))
            if len(two):
                members = T.tri[two]
                msel = sel[members]
                # the one unselected member of each two-selected triple
                u = members[np.arange(len(two)), np.argmin(msel, axis=1)]
                np.add.at(gain, u, c[two])
                for a in range(3):
                    m = members[:, a]
                    keep = msel[:, a] == 1
                    np.add.at(pair, (m[keep], u[keep]), c[two][keep])
            D = D - lose[out_idx][:, None] + gain[in_idx][None, :] - pair[np.ix_(out_idx, in_idx)]
        return out_idx, in_idx, D

    def apply(self, out_idx: int, in_idx: int, delta: float | None = None) -> None:
        if delta is None:
            delta = self.delta(out_idx, in_idx)
        T = self._T
        _kernels.apply_swap(T.cov, T.inc_ptr, T.inc_tri, self.tri_count, self.sel, self.sx,
                            int(out_idx), int(in_idx))
        self.value += delta

    def resync(self) -> None:
        self.value = eval_native(self.instance, self.sel)


def swap_delta(instance: PortfolioInstance, portfolio: Portfolio, out_idx: int, in_idx: int,
               cache: SwapCache | None = None) -> float:
    """Exact change of the native objective when ``out_idx`` leaves and ``in_idx`` enters."""
    if cache is None:
        cache = SwapCache(instance, portfolio)
    elif not np.array_equal(cache.sel, portfolio.selection):
        raise ValueError("cache does not describe this portfolio")
    return cache.delta(out_idx, in_idx)
