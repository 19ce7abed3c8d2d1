"""Lattice, site states, model parameters and the per-site rate table.

Sites of a ``side**d`` box are indexed row-major with axis 0 fastest::

    index = c[0] + c[1]*side + c[2]*side**2 + ...

Neighbours are always listed in the order (axis 0 -, axis 0 +, axis 1 -,
axis 1 +, ...), which fixes every downstream tie-break.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, UsageError

__all__ = [
    "SiteState",
    "Boundary",
    "Lattice",
    "Configuration",
    "Params",
    "neighbors",
    "count_spreader_neighbors",
    "site_rates",
    "apply_transition",
    "ALLOWED_TRANSITIONS",
]


class SiteState(enum.IntEnum):
    IGNORANT = 0
    SPREADER = 1
    STIFLER = 2


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    FROZEN_IGNORANT = "frozen"

    @classmethod
    def parse(cls, value: "str | Boundary") -> "Boundary":
        if isinstance(value, Boundary):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "periodic": cls.PERIODIC,
            "frozen": cls.FROZEN_IGNORANT,
            "frozenignorant": cls.FROZEN_IGNORANT,
        }
        try:
            return aliases[key]
        except KeyError:
            raise UsageError(f"unknown boundary {value!r}") from None


# (from, to) pairs with a rate that can be positive.
ALLOWED_TRANSITIONS = frozenset(
    {
        (SiteState.IGNORANT, SiteState.SPREADER),
        (SiteState.SPREADER, SiteState.IGNORANT),
        (SiteState.SPREADER, SiteState.STIFLER),
        (SiteState.STIFLER, SiteState.IGNORANT),
    }
)


@dataclass(frozen=True)
class Lattice:
    """A finite box ``{0..side-1}^d`` with a boundary rule.

    Under ``Boundary.PERIODIC`` coordinates wrap modulo ``side``; under
    ``Boundary.FROZEN_IGNORANT`` everything outside the box is a permanent
    Ignorant site and is simply left out of the neighbour lists.
    """

    d: int
    side: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary.parse(self.boundary))
        if int(self.d) != self.d or self.d < 1:
            raise UsageError(f"dimension must be a positive integer, got {self.d!r}")
        if int(self.side) != self.side or self.side < 1:
            raise UsageError(f"side must be a positive integer, got {self.side!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "side", int(self.side))
        if self.boundary is Boundary.PERIODIC and self.side < 3:
            raise UsageError("periodic lattices need side >= 3")

    @property
    def n_sites(self) -> int:
        return self.side**self.d

    @property
    def degree(self) -> int:
        return 2 * self.d

    def index(self, coord: Sequence[int]) -> int:
        coord = tuple(int(c) for c in coord)
        if len(coord) != self.d or any(c < 0 or c >= self.side for c in coord):
            raise UsageError(f"coordinate {coord} outside lattice {self}")
        idx = 0
        for axis in reversed(range(self.d)):
            idx = idx * self.side + coord[axis]
        return idx

    def coord(self, index: int) -> tuple[int, ...]:
        index = self._check_index(index)
        out = []
        for _ in range(self.d):
            index, c = divmod(index, self.side)
            out.append(c)
        return tuple(out)

    def coords(self) -> np.ndarray:
        """All coordinates as an ``(n_sites, d)`` integer array."""
        idx = np.arange(self.n_sites)
        return np.stack([(idx // self.side**a) % self.side for a in range(self.d)], axis=1)

    def center(self) -> int:
        return self.index([self.side // 2] * self.d)

    def resolve(self, x) -> int:
        """Accept either a flat index or a coordinate tuple."""
        if isinstance(x, (tuple, list, np.ndarray)):
            return self.index(x)
        return self._check_index(x)

    def _check_index(self, index) -> int:
        if isinstance(index, (bool, np.bool_)) or int(index) != index:
            raise UsageError(f"site index must be an integer, got {index!r}")
        index = int(index)
        if not 0 <= index < self.n_sites:
            raise UsageError(f"site index {index} outside 0..{self.n_sites - 1}")
        return index

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """``(n_sites, 2d)`` int64 array of neighbour indices, -1 where absent."""
        coords = self.coords()
        n = self.n_sites
        table = np.full((n, self.degree), -1, dtype=np.int64)
        strides = self.side ** np.arange(self.d)
        for axis in range(self.d):
            for j, step in enumerate((-1, 1)):
                c = coords[:, axis] + step
                if self.boundary is Boundary.PERIODIC:
                    c = c % self.side
                    valid = np.ones(n, dtype=bool)
                else:
                    valid = (c >= 0) & (c < self.side)
                nb = np.arange(n) + (c - coords[:, axis]) * strides[axis]
                table[valid, 2 * axis + j] = nb[valid]
        table.setflags(write=False)
        return table

    @cached_property
    def ordered_pairs(self) -> np.ndarray:
        """``(P, 2)`` array of ordered nearest-neighbour pairs ``(x, y)``."""
        table = self.neighbor_table
        src = np.repeat(np.arange(self.n_sites), self.degree)
        dst = table.ravel()
        keep = dst >= 0
        pairs = np.stack([src[keep], dst[keep]], axis=1)
        pairs.setflags(write=False)
        return pairs


@dataclass(frozen=True)
class Params:
    """Spreading rate ``lam`` and stifling rate ``alpha``.

    Both are per spreader neighbour. The forgetting rate is 1 and sets the
    time unit.
    """

    lam: float
    alpha: float = 0.0

    def __post_init__(self):
        for name in ("lam", "alpha"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise UsageError(f"{name} must be a finite nonnegative number, got {v!r}")
            object.__setattr__(self, name, v)

    FORGET_RATE = 1.0


@dataclass
class Configuration:
    """A lattice together with one ``SiteState`` per site.

    ``states`` is a flat int8 array in site-index order. Operations that
    return a new configuration never alias the input array.
    """

    lattice: Lattice
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = np.asarray(self.states)
        if states.shape != (self.lattice.n_sites,):
            raise UsageError(
                f"expected {self.lattice.n_sites} site states, got shape {np.shape(self.states)}"
            )
        if states.size and (states.min() < 0 or states.max() > 2):
            raise UsageError("site states must lie in {0, 1, 2}")
        self.states = states.astype(np.int8, copy=True)

    @classmethod
    def empty(cls, lattice: Lattice) -> "Configuration":
        return cls(lattice, np.zeros(lattice.n_sites, dtype=np.int8))

    @classmethod
    def from_sites(cls, lattice: Lattice, spreaders: Iterable = (), stiflers: Iterable = ()):
        cfg = cls.empty(lattice)
        for x in spreaders:
            cfg.states[lattice.resolve(x)] = SiteState.SPREADER
        for x in stiflers:
            cfg.states[lattice.resolve(x)] = SiteState.STIFLER
        return cfg

    @classmethod
    def single_spreader(cls, lattice: Lattice, site=None) -> "Configuration":
        return cls.from_sites(lattice, [lattice.center() if site is None else site])

    @classmethod
    def product(cls, lattice: Lattice, p_spreader: float, p_stifler: float, rng) -> "Configuration":
        """IID sites: Spreader w.p. ``p_spreader``, Stifler w.p. ``p_stifler``."""
        if p_spreader < 0 or p_stifler < 0 or p_spreader + p_stifler > 1:
            raise UsageError("densities must be nonnegative and sum to at most 1")
        u = rng.random(lattice.n_sites)
        states = np.zeros(lattice.n_sites, dtype=np.int8)
        states[u < p_spreader] = SiteState.SPREADER
        states[(u >= p_spreader) & (u < p_spreader + p_stifler)] = SiteState.STIFLER
        return cls(lattice, states)

    def __getitem__(self, x) -> SiteState:
        return SiteState(int(self.states[self.lattice.resolve(x)]))

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.lattice == other.lattice and np.array_equal(self.states, other.states)

    def copy(self) -> "Configuration":
        return Configuration(self.lattice, self.states)

    def counts(self) -> tuple[int, int, int]:
        c = np.bincount(self.states, minlength=3)
        return int(c[0]), int(c[1]), int(c[2])

    def is_empty(self) -> bool:
        return not self.states.any()

    def to_snapshot(self) -> str:
        """Text snapshot: ``d,side,boundary`` header then ``index,state`` lines."""
        buf = io.StringIO()
        buf.write(f"{self.lattice.d},{self.lattice.side},{self.lattice.boundary.value}\n")
        for i, s in enumerate(self.states):
            buf.write(f"{i},{int(s)}\n")
        return buf.getvalue()

    @classmethod
    def from_snapshot(cls, text: str) -> "Configuration":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise UsageError("empty snapshot")
        try:
            d, side, boundary = lines[0].split(",")
            lattice = Lattice(int(d), int(side), Boundary.parse(boundary))
        except ValueError as exc:
            raise UsageError(f"bad snapshot header {lines[0]!r}") from exc
        states = np.full(lattice.n_sites, -1, dtype=np.int64)
        for ln in lines[1:]:
            i, s = (int(v) for v in ln.split(","))
            if not 0 <= i < lattice.n_sites or s not in (0, 1, 2):
                raise UsageError(f"bad snapshot line {ln!r}")
            states[i] = s
        if (states < 0).any():
            raise UsageError("snapshot does not list every site")
        return cls(lattice, states)


def neighbors(lattice: Lattice, x) -> list[int]:
    """Nearest neighbours of ``x`` (index or coordinate) as flat indices."""
    row = lattice.neighbor_table[lattice.resolve(x)]
    return [int(y) for y in row if y >= 0]


def count_spreader_neighbors(cfg: Configuration, x) -> int:
    row = cfg.lattice.neighbor_table[cfg.lattice.resolve(x)]
    row = row[row >= 0]
    return int(np.count_nonzero(cfg.states[row] == SiteState.SPREADER))


def site_rates(cfg: Configuration, params: Params, x) -> dict[SiteState, float]:
    """Exit rates of site ``x`` keyed by target state.

    Only transitions that the model allows from the current state appear;
    a listed rate may still be zero (e.g. Spreader -> Stifler with no
    spreading neighbour).
    """
    s = cfg[x]
    n1 = count_spreader_neighbors(cfg, x)
    if s is SiteState.IGNORANT:
        return {SiteState.SPREADER: params.lam * n1}
    if s is SiteState.SPREADER:
        return {SiteState.IGNORANT: Params.FORGET_RATE, SiteState.STIFLER: params.alpha * n1}
    return {SiteState.IGNORANT: Params.FORGET_RATE}


def total_exit_rate(cfg: Configuration, params: Params, x) -> float:
    return float(sum(site_rates(cfg, params, x).values()))


def apply_transition(cfg: Configuration, x, to) -> Configuration:
    """Return a copy of ``cfg`` with site ``x`` moved to state ``to``."""
    i = cfg.lattice.resolve(x)
    to = SiteState(to)
    frm = SiteState(int(cfg.states[i]))
    if (frm, to) not in ALLOWED_TRANSITIONS:
        raise ContractError(f"transition {frm.name} -> {to.name} at site {i} is not a model move")
    out = cfg.copy()
    out.states[i] = to
    return out
