"""Monte Carlo drivers: survival, extinction times, phase sweeps, block events.

Replica ``r`` of cell ``c`` always draws from ``make_rng(seed, c, r)``, so
results do not depend on the thread count or scheduling order.
"""

from __future__ import annotations

import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import gillespie, harris
from .errors import CapacityError, UsageError
from .lattice import Boundary, Configuration, Lattice, Params, SiteState
from .seeding import check_seed, make_rng

MAX_BLOCK_SITES = 4_000_000


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _map_replicas(fn, n: int, threads: int = 1) -> list:
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


class SurvivalCriterion(str, enum.Enum):
    SPREADERS = "spreaders"
    RUMOR = "rumor"  # Spreaders or Stiflers


@dataclass
class SurvivalEstimate:
    params: Params
    lattice: Lattice
    T: float
    R: int
    survivals: int
    seed: int
    outcomes: np.ndarray = field(repr=False, default=None)

    @property
    def p_hat(self) -> float:
        return self.survivals / self.R

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.survivals, self.R)

    def row(self) -> dict:
        lo, hi = self.interval
        return {
            "lambda": self.params.lam,
            "alpha": self.params.alpha,
            "side": self.lattice.side,
            "T": self.T,
            "R": self.R,
            "survivals": self.survivals,
            "p_hat": self.p_hat,
            "ci_lo": lo,
            "ci_hi": hi,
            "seed": self.seed,
        }


def _contact_version(eta0: Configuration) -> Configuration:
    return harris.contact_initial(eta0)


def estimate_survival(
    params: Params,
    lattice: Lattice,
    eta0: Configuration | None = None,
    T: float = 200.0,
    R: int = 1000,
    seed: int = 0,
    *,
    cell: int = 0,
    criterion: SurvivalCriterion | str = SurvivalCriterion.SPREADERS,
    engine: str = "gillespie",
    mode: str = "rumor",
    threads: int = 1,
) -> SurvivalEstimate:
    """Fraction of ``R`` replicas with the rumor alive at time ``T``.

    ``mode="contact"`` runs the plain contact process (Stiflers erased from
    the start, ``alpha`` forced to 0). With the Harris engine a contact run
    and a rumor run at ``alpha = 0`` see identical marks replica by replica.
    """
    if R < 1:
        raise UsageError("R must be at least 1")
    seed = check_seed(seed)
    criterion = SurvivalCriterion(criterion)
    if eta0 is None:
        eta0 = Configuration.single_spreader(lattice)
    if eta0.lattice != lattice:
        raise UsageError("initial configuration lives on a different lattice")
    if mode not in ("rumor", "contact"):
        raise UsageError(f"unknown mode {mode!r}")
    if mode == "contact":
        params = Params(params.lam, 0.0)
        eta0 = _contact_version(eta0)
    stop = gillespie.STOP_NO_SPREADERS if criterion is SurvivalCriterion.SPREADERS else gillespie.STOP_NO_RUMOR

    def one(r: int) -> bool:
        if engine == "gillespie":
            states, _, _ = gillespie.final_state(eta0, params, T, make_rng(seed, cell, r), stop_mode=stop)
        elif engine == "harris":
            if mode == "contact":
                stream = harris.generate_arrivals(lattice, params, T, seed, key=(cell, r))
                _, xi, _ = harris.drive(eta0, stream, eta0, log=False)
                states = xi
            else:
                _, cfg = harris.run_harris_state(eta0, params, T, seed, key=(cell, r), log=False)
                states = cfg.states
        else:
            raise UsageError(f"unknown engine {engine!r}")
        if criterion is SurvivalCriterion.SPREADERS:
            return bool((states == SiteState.SPREADER).any())
        return bool(states.any())

    outcomes = np.array(_map_replicas(one, R, threads), dtype=bool)
    return SurvivalEstimate(params, lattice, float(T), int(R), int(outcomes.sum()), seed, outcomes)


@dataclass
class ExtinctionSummary:
    mean: float
    median: float
    std: float
    quantiles: dict
    censored: int
    R: int
    times: np.ndarray = field(repr=False, default=None)

    @property
    def sem(self) -> float:
        return self.std / math.sqrt(self.R) if self.R > 1 else float("nan")

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("times")
        return out


def estimate_extinction_time(
    params: Params,
    lattice: Lattice,
    eta0: Configuration | None = None,
    R: int = 1000,
    seed: int = 0,
    t_cap: float = 1000.0,
    *,
    cell: int = 0,
    threads: int = 1,
) -> ExtinctionSummary:
    """Time until every site is Ignorant, censored at ``t_cap``.

    Censored replicas enter the statistics with time ``t_cap``.
    """
    seed = check_seed(seed)
    if eta0 is None:
        eta0 = Configuration.single_spreader(lattice)

    def one(r: int):
        _, t, status = gillespie.final_state(
            eta0, params, t_cap, make_rng(seed, cell, r), stop_mode=gillespie.STOP_NO_RUMOR
        )
        return t, status == gillespie.HORIZON and t >= t_cap

    res = _map_replicas(one, R, threads)
    times = np.array([t for t, _ in res])
    censored = int(sum(c for _, c in res))
    qs = (0.1, 0.25, 0.5, 0.75, 0.9)
    return ExtinctionSummary(
        mean=float(times.mean()),
        median=float(np.median(times)),
        std=float(times.std(ddof=1)) if R > 1 else 0.0,
        quantiles={str(q): float(np.quantile(times, q)) for q in qs},
        censored=censored,
        R=int(R),
        times=times,
    )


SWEEP_COLUMNS = ("lambda", "alpha", "side", "T", "R", "survivals", "p_hat", "ci_lo", "ci_hi", "seed")


@dataclass
class PhaseDiagram:
    lambdas: list
    alphas: list
    cells: list  # row-major: cells[i * len(alphas) + j]

    def __getitem__(self, ij) -> SurvivalEstimate:
        i, j = ij
        return self.cells[i * len(self.alphas) + j]

    def p_hat(self) -> np.ndarray:
        return np.array([c.p_hat for c in self.cells]).reshape(len(self.lambdas), len(self.alphas))

    def to_csv(self, header=()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        buf.write(",".join(SWEEP_COLUMNS) + "\n")
        for c in self.cells:
            row = c.row()
            buf.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in SWEEP_COLUMNS))
            buf.write("\n")
        return buf.getvalue()


def sweep_phase_diagram(
    lambdas,
    alphas,
    lattice: Lattice,
    T: float,
    R: int,
    seed: int,
    eta0: Configuration | None = None,
    *,
    threads: int = 1,
    **kwargs,
) -> PhaseDiagram:
    """Survival estimates on the ``lambdas x alphas`` grid.

    Cell ``(i, j)`` has index ``i * len(alphas) + j`` and is exactly
    ``estimate_survival(..., cell=index)``.
    """
    lambdas = [float(v) for v in lambdas]
    alphas = [float(v) for v in alphas]
    grid = [(lam, a) for lam in lambdas for a in alphas]

    def one(c: int) -> SurvivalEstimate:
        lam, a = grid[c]
        return estimate_survival(Params(lam, a), lattice, eta0, T, R, seed, cell=c, **kwargs)

    return PhaseDiagram(lambdas, alphas, _map_replicas(one, len(grid), threads))


def sample_final_states(
    eta0: Configuration,
    params: Params,
    t: float,
    R: int,
    seed: int,
    engine: str = "gillespie",
    *,
    threads: int = 1,
) -> np.ndarray:
    """``(R, n_sites)`` array of independent configurations at time ``t``."""
    seed = check_seed(seed)

    def one(r: int) -> np.ndarray:
        if engine == "gillespie":
            return gillespie.final_state(eta0, params, t, make_rng(seed, 0, r))[0]
        if engine == "harris":
            return harris.run_harris_state(eta0, params, t, seed, key=(0, r), log=False)[1].states
        raise UsageError(f"unknown engine {engine!r}")

    out = np.empty((R, eta0.lattice.n_sites), dtype=np.int8)
    for r, states in enumerate(_map_replicas(one, R, threads)):
        out[r] = states
    return out


# -- block events -----------------------------------------------------------


@dataclass
class BlockEstimate:
    successes: int
    R: int
    seed: int
    spec: dict
    params: Params
    detail: dict = field(default_factory=dict)

    @property
    def p_hat(self) -> float:
        return self.successes / self.R

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.R)

    def to_dict(self) -> dict:
        lo, hi = self.interval
        return {
            **self.spec,
            "lambda": self.params.lam,
            "alpha": self.params.alpha,
            "R": self.R,
            "seed": self.seed,
            "successes": self.successes,
            "estimate": self.p_hat,
            "ci_lo": lo,
            "ci_hi": hi,
            **self.detail,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _box_lattice(radius: int, d: int) -> Lattice:
    side = 2 * radius + 1
    if side**d > MAX_BLOCK_SITES:
        raise CapacityError(f"box of {side}^{d} sites exceeds the cap of {MAX_BLOCK_SITES}")
    return Lattice(d, side, Boundary.FROZEN_IGNORANT)


@dataclass(frozen=True)
class BlockSpecA:
    """Survival block: ``I_m = 2mL + [-L, L]^d`` inside ``B = (-4L, 4L)^d x [0, T]``.

    ``k = floor(sqrt(L))`` is the spreader threshold per interval and
    ``M = floor(sqrt(k))``. ``T`` defaults to ``2L``.
    """

    L: int
    T: float | None = None
    d: int = 1

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise UsageError("L must be a positive integer")
        if self.T is None:
            object.__setattr__(self, "T", 2.0 * self.L)
        if not self.T > 0:
            raise UsageError("T must be positive")

    @property
    def k(self) -> int:
        return math.isqrt(self.L)

    @property
    def M(self) -> int:
        return math.isqrt(self.k)

    def lattice(self) -> Lattice:
        # sites with coordinates -4L..4L along each axis
        return _box_lattice(4 * self.L, self.d)

    def interval_mask(self, offset: tuple[int, ...]) -> np.ndarray:
        """Sites of ``2L * offset + [-L, L]^d``."""
        lat = self.lattice()
        rel = lat.coords() - 4 * self.L
        centre = 2 * self.L * np.asarray(offset)
        return np.all(np.abs(rel - centre) <= self.L, axis=1)

    def to_dict(self) -> dict:
        return {"spec": "A", "L": self.L, "T": self.T, "d": self.d, "k": self.k, "M": self.M,
                "box_radius": 4 * self.L}


def estimate_open_probability_A(
    spec: BlockSpecA,
    params: Params,
    seed: int,
    R: int,
    *,
    placement: str = "random",
    threads: int = 1,
) -> BlockEstimate:
    """Frequency of the survival block event.

    Start: ``k`` Spreaders in ``I_0`` (uniformly at random, or packed around
    the centre with ``placement="center"``), everything else Ignorant, and
    Ignorant outside the box. Success: at time ``T`` every neighbouring
    interval ``I_{+-e_i}`` holds at least ``k`` Spreaders and no Stifler.
    """
    seed = check_seed(seed)
    lat = spec.lattice()
    home = np.flatnonzero(spec.interval_mask((0,) * spec.d))
    targets = []
    for axis in range(spec.d):
        for sign in (-1, 1):
            off = [0] * spec.d
            off[axis] = sign
            targets.append(spec.interval_mask(tuple(off)))
    k = spec.k
    if placement == "center":
        c = lat.center()
        rel = np.abs(lat.coords() - lat.coords()[c]).sum(axis=1)
        fixed = home[np.lexsort((home, rel[home]))][:k]
    elif placement != "random":
        raise UsageError(f"unknown placement {placement!r}")

    def one(r: int) -> bool:
        rng = make_rng(seed, 0, r)
        sites = fixed if placement == "center" else rng.choice(home, size=k, replace=False)
        eta0 = Configuration.from_sites(lat, sites.tolist())
        states, _, _ = gillespie.final_state(eta0, params, spec.T, rng)
        for mask in targets:
            block = states[mask]
            if np.count_nonzero(block == SiteState.SPREADER) < k or (block == SiteState.STIFLER).any():
                return False
        return True

    hits = _map_replicas(one, R, threads)
    return BlockEstimate(int(sum(hits)), int(R), seed, spec.to_dict(), params, {"placement": placement})


class BoundaryPolicy(str, enum.Enum):
    ALL_SPREADERS = "AllSpreaders"
    ALL_STIFLERS = "AllStiflers"
    RANDOM_RESAMPLED = "RandomResampled"


@dataclass(frozen=True)
class BlockSpecB:
    """Extinction block: ``Lambda1 = [-2L, 2L]^d x [0, 2T]`` around
    ``Lambda2 = [-L, L]^d x [T, 2T]``; ``T`` defaults to ``L``."""

    L: int
    T: float | None = None
    d: int = 1

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise UsageError("L must be a positive integer")
        if self.T is None:
            object.__setattr__(self, "T", float(self.L))
        if not self.T > 0:
            raise UsageError("T must be positive")

    def lattice(self) -> Lattice:
        return _box_lattice(2 * self.L, self.d)

    def side_mask(self) -> np.ndarray:
        """Spatial part of the boundary: some ``|x_i| = 2L``."""
        rel = self.lattice().coords() - 2 * self.L
        return np.any(np.abs(rel) == 2 * self.L, axis=1)

    def inner_mask(self) -> np.ndarray:
        rel = self.lattice().coords() - 2 * self.L
        return np.all(np.abs(rel) <= self.L, axis=1)

    def to_dict(self) -> dict:
        return {"spec": "B", "L": self.L, "T": self.T, "d": self.d}


def _boundary_states(policy: BoundaryPolicy, n: int, rng) -> np.ndarray:
    if policy is BoundaryPolicy.ALL_SPREADERS:
        return np.full(n, SiteState.SPREADER, dtype=np.int8)
    if policy is BoundaryPolicy.ALL_STIFLERS:
        return np.full(n, SiteState.STIFLER, dtype=np.int8)
    return rng.integers(0, 3, size=n).astype(np.int8)


def _open_B(spec: BlockSpecB, params: Params, policy: BoundaryPolicy, rng) -> bool:
    lat = spec.lattice()
    side = spec.side_mask()
    inner = spec.inner_mask()
    # bottom of the boundary (t = 0) and the sides get the policy's states;
    # the sides are held fixed for the whole window
    eta0 = Configuration(lat, _boundary_states(policy, lat.n_sites, rng))
    engine = gillespie.EventEngine(eta0, params, rng=rng, clamped=side)
    engine.run_until(spec.T, stop_on_extinction=False, keep_events=False)
    if engine.states[inner].any():
        return False
    traj = engine.run_until(2 * spec.T, stop_on_extinction=False)
    log = traj.events
    hit = inner[log.site] & (log.to != SiteState.IGNORANT)
    return not hit.any()


def estimate_open_probability_B(
    spec: BlockSpecB,
    params: Params,
    seed: int,
    R: int,
    boundary_policy: BoundaryPolicy | str = BoundaryPolicy.ALL_SPREADERS,
    *,
    threads: int = 1,
) -> BlockEstimate:
    """Frequency with which ``Lambda2`` stays all-Ignorant during ``[T, 2T]``.

    The boundary of ``Lambda1`` (the spatial faces for the whole window
    plus the whole box at time 0) is imposed by ``boundary_policy``.
    ``"worst"`` runs every policy on common seeds and reports the lowest
    estimate.
    """
    seed = check_seed(seed)
    if boundary_policy == "worst":
        results = {
            p.value: estimate_open_probability_B(spec, params, seed, R, p, threads=threads) for p in BoundaryPolicy
        }
        worst = min(results.values(), key=lambda e: (e.successes, list(results.values()).index(e)))
        worst.detail = {
            "boundary_policy": "worst",
            "worst_policy": worst.detail["boundary_policy"],
            "per_policy": {k: v.p_hat for k, v in results.items()},
        }
        return worst
    policy = BoundaryPolicy(boundary_policy)

    def one(r: int) -> bool:
        return _open_B(spec, params, policy, make_rng(seed, 0, r))

    hits = _map_replicas(one, R, threads)
    return BlockEstimate(int(sum(hits)), int(R), seed, spec.to_dict(), params, {"boundary_policy": policy.value})
