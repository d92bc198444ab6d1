"""Cubic portfolio instances: generation, the ``Portfolio`` decision type, and file I/O.

The generator builds a one-factor-per-sector covariance, sector-correlated
returns and anchor-based cubic triples from a single integer seed. Every random
field draws from its own child stream of ``numpy.random.SeedSequence(seed)``
(PCG64), so the output is reproducible across platforms.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_SECTORS = 10
ALPHA_CUBIC = 4.0
FORMAT_VERSION = 1
_MAGIC = "# cubic-portfolio-instance"

# child-stream order of SeedSequence(seed).spawn(...)
_STREAMS = ("loadings", "returns", "triples", "coefficients")


class InstanceFormatError(ValueError):
    """Raised when an instance file is malformed or internally inconsistent."""


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PortfolioInstance:
    """Native cubic problem ``x'Σx - μ'x + Σ_T c_ijk x_i x_j x_k`` with ``sum(x) = K``.

    ``triples`` is an ``(m, 3)`` integer array of ``(i, j, k)`` rows where ``k``
    is the anchor of the sector containing ``i`` and ``j``. Arrays are stored
    read-only; the instance can be shared freely between solver runs.
    """

    n: int
    K: int
    covariance: np.ndarray
    expected_return: np.ndarray
    triples: np.ndarray
    cubic_coeff: np.ndarray
    sector_of: np.ndarray
    seed: int = 0
    quad_scale: float = 0.0
    alpha_cubic: float = ALPHA_CUBIC
    n_sectors: int = N_SECTORS
    loadings: np.ndarray | None = None

    def __post_init__(self):
        if self.n <= 0 or self.K <= 0 or self.K >= self.n:
            raise ValueError(f"need 0 < K < n, got n={self.n}, K={self.K}")
        set_ = object.__setattr__
        set_(self, "covariance", _frozen(self.covariance, np.float64))
        set_(self, "expected_return", _frozen(self.expected_return, np.float64))
        set_(self, "triples", _frozen(np.reshape(self.triples, (-1, 3)), np.int64))
        set_(self, "cubic_coeff", _frozen(self.cubic_coeff, np.float64))
        set_(self, "sector_of", _frozen(self.sector_of, np.int64))
        if self.loadings is not None:
            set_(self, "loadings", _frozen(self.loadings, np.float64))
        n = self.n
        if self.covariance.shape != (n, n):
            raise ValueError(f"covariance must be {n}x{n}, got {self.covariance.shape}")
        if self.expected_return.shape != (n,) or self.sector_of.shape != (n,):
            raise ValueError("expected_return and sector_of must have length n")
        if self.loadings is not None and self.loadings.shape != (n,):
            raise ValueError("loadings must have length n")
        if self.cubic_coeff.shape != (len(self.triples),):
            raise ValueError("one cubic coefficient per triple is required")
        t = self.triples
        if len(t):
            if t.min() < 0 or t.max() >= n:
                raise ValueError("triple index out of range [0, n)")
            if np.any((t[:, 0] == t[:, 1]) | (t[:, 0] == t[:, 2]) | (t[:, 1] == t[:, 2])):
                raise ValueError("triple indices must be pairwise distinct")
        if np.any(self.cubic_coeff < 0):
            raise ValueError("cubic coefficients must be nonnegative")

    @property
    def n_triples(self) -> int:
        return len(self.triples)

    def anchors(self) -> np.ndarray:
        """Per-sector anchor: largest own-sector loading, lowest index on ties."""
        if self.loadings is None:
            raise ValueError("instance carries no loadings")
        return _sector_anchors(self.loadings, self.sector_of, self.n_sectors)

    def same_as(self, other: PortfolioInstance) -> bool:
        """Field-for-field, bit-exact equality."""
        scalars = ("n", "K", "seed", "quad_scale", "alpha_cubic", "n_sectors")
        if any(getattr(self, s) != getattr(other, s) for s in scalars):
            return False
        arrays = ("covariance", "expected_return", "triples", "cubic_coeff", "sector_of")
        for a in arrays:
            if not np.array_equal(getattr(self, a), getattr(other, a)):
                return False
        if (self.loadings is None) != (other.loadings is None):
            return False
        return self.loadings is None or np.array_equal(self.loadings, other.loadings)


@dataclass(frozen=True, eq=False)
class Portfolio:
    """Binary asset selection. ``cardinality`` is derived, never stored separately."""

    selection: np.ndarray = field(repr=False)

    def __post_init__(self):
        sel = np.asarray(self.selection)
        if sel.ndim != 1 or not np.all((sel == 0) | (sel == 1)):
            raise ValueError("selection must be a 1-D 0/1 vector")
        object.__setattr__(self, "selection", _frozen(sel, np.int8))

    @classmethod
    def from_indices(cls, n: int, indices) -> Portfolio:
        sel = np.zeros(n, dtype=np.int8)
        sel[np.asarray(list(indices), dtype=np.int64)] = 1
        return cls(sel)

    @property
    def n(self) -> int:
        return len(self.selection)

    @property
    def cardinality(self) -> int:
        return int(self.selection.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.selection)

    def is_feasible(self, K: int) -> bool:
        return self.cardinality == K

    def __eq__(self, other):
        return isinstance(other, Portfolio) and np.array_equal(self.selection, other.selection)

    def __hash__(self):
        return hash(self.selection.tobytes())

    def __repr__(self):
        return f"Portfolio(n={self.n}, indices={self.indices.tolist()})"


def _sector_anchors(loadings, sector_of, n_sectors):
    anchors = np.full(n_sectors, -1, dtype=np.int64)
    for s in range(n_sectors):
        members = np.flatnonzero(sector_of == s)
        if len(members):
            anchors[s] = members[np.argmax(loadings[members])]
    return anchors


def _sector_pairs(sector_of, anchors, n_sectors):
    """Intra-sector non-anchor pairs, interleaved round-robin across sectors."""
    per_sector = []
    for s in range(n_sectors):
        members = [i for i in np.flatnonzero(sector_of == s) if i != anchors[s]]
        per_sector.append(
            [(members[a], members[b], anchors[s])
             for a in range(len(members)) for b in range(a + 1, len(members))]
        )
    out = []
    for r in range(max((len(p) for p in per_sector), default=0)):
        out.extend(p[r] for p in per_sector if r < len(p))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def generate_instance(n: int, K: int, seed: int) -> PortfolioInstance:
    """Generate the cubic portfolio instance for ``(n, K, seed)``.

    From ``n >= 200`` the triple set is subsampled to exactly ``4n``; below
    that every intra-sector non-anchor pair is kept.
    """
    if n <= 0 or K <= 0:
        raise ValueError("n and K must be positive")
    if K >= n:
        raise ValueError(f"K must be smaller than n (K={K}, n={n})")
    if n < N_SECTORS:
        raise ValueError(f"n must be at least {N_SECTORS}")
    streams = dict(zip(_STREAMS, np.random.SeedSequence(seed).spawn(len(_STREAMS))))
    rng = {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in streams.items()}

    sector_of = np.arange(n) % N_SECTORS
    loadings = rng["loadings"].uniform(0.5, 1.5, size=n)
    idio = rng["loadings"].uniform(0.05, 0.25, size=n)
    same = sector_of[:, None] == sector_of[None, :]
    cov = np.where(same, np.outer(loadings, loadings), 0.0)
    cov[np.diag_indices(n)] += idio

    base = rng["returns"].uniform(0.05, 0.15, size=N_SECTORS)
    mu = base[sector_of] + rng["returns"].normal(0.0, 0.02, size=n)

    off = ~np.eye(n, dtype=bool)
    quad_scale = float(np.abs(cov[off]).mean())

    anchors = _sector_anchors(loadings, sector_of, N_SECTORS)
    triples = _sector_pairs(sector_of, anchors, N_SECTORS)
    if n >= 200:
        target = 4 * n
        if len(triples) < target:
            # round-robin sectors give >= 171 pairs per sector at n >= 200
            raise RuntimeError("not enough intra-sector pairs to reach 4n triples")
        keep = np.sort(rng["triples"].choice(len(triples), size=target, replace=False))
        triples = triples[keep]
    coeff = rng["coefficients"].exponential(1.0, size=len(triples)) * quad_scale * ALPHA_CUBIC

    return PortfolioInstance(
        n=n, K=K, covariance=cov, expected_return=mu, triples=triples,
        cubic_coeff=coeff, sector_of=sector_of, seed=seed, quad_scale=quad_scale,
        alpha_cubic=ALPHA_CUBIC, n_sectors=N_SECTORS, loadings=loadings,
    )


# ---------------------------------------------------------------------------
# text format
#
#   # cubic-portfolio-instance
#   format_version 1
#   n <int> / K <int> / seed <int> / n_sectors <int> / n_triples <int>
#   alpha_cubic <hex> / quad_scale <hex>
#   [covariance]      n rows of n hex floats
#   [expected_return] one row of n hex floats
#   [sector_of]       one row of n ints
#   [loadings]        optional, one row of n hex floats
#   [triples]         n_triples rows "i j k <hex c>"
#   [end]
# ---------------------------------------------------------------------------

_INT_KEYS = ("format_version", "n", "K", "seed", "n_sectors", "n_triples")
_FLOAT_KEYS = ("alpha_cubic", "quad_scale")


def dumps_instance(instance: PortfolioInstance) -> str:
    buf = io.StringIO()
    w = buf.write
    w(_MAGIC + "\n")
    header = {
        "format_version": FORMAT_VERSION, "n": instance.n, "K": instance.K,
        "seed": instance.seed, "n_sectors": instance.n_sectors,
        "n_triples": instance.n_triples,
    }
    for key, val in header.items():
        w(f"{key} {val}\n")
    w(f"alpha_cubic {float(instance.alpha_cubic).hex()}\n")
    w(f"quad_scale {float(instance.quad_scale).hex()}\n")
    w("[covariance]\n")
    for row in instance.covariance:
        w(" ".join(float(v).hex() for v in row) + "\n")
    w("[expected_return]\n")
    w(" ".join(float(v).hex() for v in instance.expected_return) + "\n")
    w("[sector_of]\n")
    w(" ".join(str(int(v)) for v in instance.sector_of) + "\n")
    if instance.loadings is not None:
        w("[loadings]\n")
        w(" ".join(float(v).hex() for v in instance.loadings) + "\n")
    w("[triples]\n")
    for (i, j, k), c in zip(instance.triples, instance.cubic_coeff):
        w(f"{i} {j} {k} {float(c).hex()}\n")
    w("[end]\n")
    return buf.getvalue()


def save_instance(instance: PortfolioInstance, path) -> None:
    Path(path).write_text(dumps_instance(instance))


def _parse_floats(line, expected, what):
    try:
        vals = [float.fromhex(tok) for tok in line.split()]
    except ValueError as exc:
        raise InstanceFormatError(f"bad number in {what}: {exc}") from None
    if len(vals) != expected:
        raise InstanceFormatError(f"{what}: expected {expected} values, got {len(vals)}")
    return vals


def loads_instance(text: str) -> PortfolioInstance:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _MAGIC:
        raise InstanceFormatError("missing instance file header")
    header: dict[str, float | int] = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("["):
        parts = lines[pos].split()
        if len(parts) != 2:
            raise InstanceFormatError(f"bad header line: {lines[pos]!r}")
        key, val = parts
        try:
            if key in _INT_KEYS:
                header[key] = int(val)
            elif key in _FLOAT_KEYS:
                header[key] = float.fromhex(val)
            else:
                raise InstanceFormatError(f"unknown header key {key!r}")
        except ValueError:
            raise InstanceFormatError(f"bad header value: {lines[pos]!r}") from None
        pos += 1
    missing = [k for k in _INT_KEYS + _FLOAT_KEYS if k not in header]
    if missing:
        raise InstanceFormatError(f"missing header keys: {missing}")
    if header["format_version"] != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported format_version {header['format_version']}")
    n, m = int(header["n"]), int(header["n_triples"])
    if n <= 0 or m < 0:
        raise InstanceFormatError("n must be positive and n_triples nonnegative")

    sections: dict[str, list[str]] = {}
    current = None
    for ln in lines[pos:]:
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1]
            if current in sections:
                raise InstanceFormatError(f"duplicate section [{current}]")
            sections[current] = []
        elif current is None:
            raise InstanceFormatError(f"data outside a section: {ln!r}")
        else:
            sections[current].append(ln)
    for name in ("covariance", "expected_return", "sector_of", "triples", "end"):
        if name not in sections:
            raise InstanceFormatError(f"missing section [{name}]")

    rows = sections["covariance"]
    if len(rows) != n:
        raise InstanceFormatError(f"covariance: expected {n} rows, got {len(rows)}")
    cov = np.array([_parse_floats(r, n, "covariance") for r in rows])
    if not np.array_equal(cov, cov.T):
        raise InstanceFormatError("covariance is not symmetric")

    def single_row(name):
        if len(sections[name]) != 1:
            raise InstanceFormatError(f"[{name}] must hold exactly one row")
        return sections[name][0]

    mu = np.array(_parse_floats(single_row("expected_return"), n, "expected_return"))
    try:
        sector_of = np.array([int(t) for t in single_row("sector_of").split()])
    except ValueError:
        raise InstanceFormatError("bad integer in sector_of") from None
    if len(sector_of) != n:
        raise InstanceFormatError("sector_of length does not match n")
    loadings = None
    if "loadings" in sections:
        loadings = np.array(_parse_floats(single_row("loadings"), n, "loadings"))

    trows = sections["triples"]
    if len(trows) != m:
        raise InstanceFormatError(f"triples: expected {m} rows, got {len(trows)}")
    triples = np.zeros((m, 3), dtype=np.int64)
    coeff = np.zeros(m)
    for r, ln in enumerate(trows):
        parts = ln.split()
        if len(parts) != 4:
            raise InstanceFormatError(f"bad triple row: {ln!r}")
        try:
            triples[r] = [int(p) for p in parts[:3]]
            coeff[r] = float.fromhex(parts[3])
        except ValueError:
            raise InstanceFormatError(f"bad triple row: {ln!r}") from None
    if m and (triples.min() < 0 or triples.max() >= n):
        raise InstanceFormatError("triple index out of range [0, n)")

    try:
        return PortfolioInstance(
            n=n, K=int(header["K"]), covariance=cov, expected_return=mu,
            triples=triples, cubic_coeff=coeff, sector_of=sector_of,
            seed=int(header["seed"]), quad_scale=float(header["quad_scale"]),
            alpha_cubic=float(header["alpha_cubic"]),
            n_sectors=int(header["n_sectors"]), loadings=loadings,
        )
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from None


def load_instance(path) -> PortfolioInstance:
    return loads_instance(Path(path).read_text())


def n_portfolios(n: int, K: int) -> int:
    return math.comb(n, K)
