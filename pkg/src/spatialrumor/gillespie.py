"""Exact event-driven (direct-method Gillespie) simulation.

Per-site exit rates live in a Fenwick tree, so picking the next site costs
O(log N) and an event touches at most ``2d + 1`` rates. Within a site the
candidate moves are ordered (to Ignorant, to Spreader, to Stifler).

The same engine runs the contact process: with ``alpha = 0`` and no
initial Stiflers no Stifler can ever appear.
"""

from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np

from . import fenwick
from .errors import InvariantError, UsageError
from .lattice import Configuration, Params, SiteState
from .seeding import make_rng
from .trajectory import EventLog, Trajectory

REBUILD_EVERY = 1 << 20

# kernel stop modes
STOP_NEVER = 0
STOP_NO_RUMOR = 1  # no Spreaders and no Stiflers
STOP_NO_SPREADERS = 2

# kernel exit statuses
HORIZON = 0
ABSORBED = 1
MAX_EVENTS = 2
STOPPED = 3


class Event(NamedTuple):
    t: float
    site: int
    frm: SiteState
    to: SiteState
    rate: float  # total rate before the event


class _Absorbed:
    def __repr__(self):
        return "Absorbed"

    def __bool__(self):
        return False


Absorbed = _Absorbed()


@numba.njit(cache=True, nogil=True)
def _rate(state, n1, lam, alpha, frozen):
    if frozen:
        return 0.0
    if state == 0:
        return lam * n1
    if state == 1:
        return 1.0 + alpha * n1
    return 1.0


@numba.njit(cache=True, nogil=True)
def init_rates(states, nbr, clamped, lam, alpha):
    n = states.shape[0]
    n1 = np.zeros(n, dtype=np.int64)
    for x in range(n):
        if states[x] == 1:
            for j in range(nbr.shape[1]):
                y = nbr[x, j]
                if y >= 0:
                    n1[y] += 1
    rates = np.empty(n, dtype=np.float64)
    for x in range(n):
        rates[x] = _rate(states[x], n1[x], lam, alpha, clamped[x])
    return n1, rates


@numba.njit(cache=True, nogil=True)
def _set_rate(rates, tree, x, r):
    """Returns (total delta, change in number of active sites)."""
    old = rates[x]
    if r == old:
        return 0.0, 0
    rates[x] = r
    fenwick.add(tree, x, r - old)
    dact = 0
    if old == 0.0:
        dact = 1
    elif r == 0.0:
        dact = -1
    return r - old, dact


@numba.njit(cache=True, nogil=True)
def _apply(states, n1, rates, tree, nbr, clamped, lam, alpha, counts, x, new):
    old = states[x]
    states[x] = new
    counts[old] -= 1
    counts[new] += 1
    dtot, dact = _set_rate(rates, tree, x, _rate(new, n1[x], lam, alpha, clamped[x]))
    if old == 1 or new == 1:
        inc = 1 if new == 1 else -1
        for j in range(nbr.shape[1]):
            y = nbr[x, j]
            if y < 0:
                continue
            n1[y] += inc
            a, b = _set_rate(rates, tree, y, _rate(states[y], n1[y], lam, alpha, clamped[y]))
            dtot += a
            dact += b
    return dtot, dact


@numba.njit(cache=True, nogil=True)
def _grow(arr, n):
    out = np.empty(max(2 * arr.shape[0], 16), dtype=arr.dtype)
    out[:n] = arr[:n]
    return out


@numba.njit(cache=True, nogil=True)
def advance(
    states, n1, rates, tree, nbr, clamped, lam, alpha, counts, scalars, t_max, max_events,
    stop_mode, log, rng,
):
    """Run events until the horizon, absorption, a stop condition or ``max_events``.

    ``scalars`` = [t, total_rate, n_active, events_since_rebuild] is updated
    in place. Returns (status, n_events, log_t, log_site, log_from, log_to,
    log_rate); the log arrays are trimmed to ``n_events`` when ``log`` is set.
    """
    t = scalars[0]
    total = scalars[1]
    n_active = np.int64(scalars[2])
    since = np.int64(scalars[3])
    cap = 64 if log else 0
    lt = np.empty(cap, dtype=np.float64)
    ls = np.empty(cap, dtype=np.int64)
    lf = np.empty(cap, dtype=np.int8)
    lto = np.empty(cap, dtype=np.int8)
    lr = np.empty(cap, dtype=np.float64)
    n_ev = 0
    status = HORIZON
    while True:
        if n_ev >= max_events:
            status = MAX_EVENTS
            break
        if stop_mode == STOP_NO_RUMOR and counts[1] + counts[2] == 0:
            status = STOPPED
            break
        if stop_mode == STOP_NO_SPREADERS and counts[1] == 0:
            status = STOPPED
            break
        if n_active == 0:
            total = 0.0
            status = ABSORBED
            break
        dt = rng.standard_exponential() / total
        if t + dt > t_max:
            t = t_max
            status = HORIZON
            break
        t += dt
        x = rates.shape[0]
        while True:
            x = fenwick.search(tree, rng.random() * total)
            if x < rates.shape[0] and rates[x] > 0.0:
                break
        s = states[x]
        if s == 0:
            new = 1
        elif s == 2:
            new = 0
        else:
            # Spreader: to Ignorant at rate 1, else to Stifler
            if rates[x] == 1.0 or rng.random() * rates[x] < 1.0:
                new = 0
            else:
                new = 2
        if log:
            if n_ev >= lt.shape[0]:
                lt = _grow(lt, n_ev)
                ls = _grow(ls, n_ev)
                lf = _grow(lf, n_ev)
                lto = _grow(lto, n_ev)
                lr = _grow(lr, n_ev)
            lt[n_ev] = t
            ls[n_ev] = x
            lf[n_ev] = s
            lto[n_ev] = new
            lr[n_ev] = total
        dtot, dact = _apply(states, n1, rates, tree, nbr, clamped, lam, alpha, counts, x, new)
        total += dtot
        n_active += dact
        n_ev += 1
        since += 1
        if since >= REBUILD_EVERY:
            tree[:] = fenwick.build(rates)
            total = rates.sum()
            since = 0
    scalars[0] = t
    scalars[1] = total
    scalars[2] = n_active
    scalars[3] = since
    if not log:
        return status, n_ev, lt, ls, lf, lto, lr
    return status, n_ev, lt[:n_ev], ls[:n_ev], lf[:n_ev], lto[:n_ev], lr[:n_ev]


@numba.njit(cache=True, nogil=True)
def run_to_horizon(states, nbr, clamped, lam, alpha, t0, t_max, stop_mode, rng):
    """Evolve ``states`` in place without logging. Returns (t, status, n_events)."""
    n1, rates = init_rates(states, nbr, clamped, lam, alpha)
    tree = fenwick.build(rates)
    counts = np.zeros(3, dtype=np.int64)
    n_active = 0
    for x in range(states.shape[0]):
        counts[states[x]] += 1
        if rates[x] > 0.0:
            n_active += 1
    scalars = np.array([t0, rates.sum(), n_active, 0.0])
    status, n_ev, _, _, _, _, _ = advance(
        states, n1, rates, tree, nbr, clamped, lam, alpha, counts, scalars, t_max,
        np.iinfo(np.int64).max, stop_mode, False, rng,
    )
    return scalars[0], status, n_ev


def _as_mask(clamped, n) -> np.ndarray:
    if clamped is None:
        return np.zeros(n, dtype=np.bool_)
    mask = np.asarray(clamped, dtype=np.bool_)
    if mask.shape != (n,):
        raise UsageError("clamped mask must have one entry per site")
    return mask


class EventEngine:
    """Gillespie engine state: configuration, rates, clock and RNG.

    ``clamped`` marks sites that never change state but still count as
    neighbours (used for boundary conditions of block events).
    """

    def __init__(self, cfg: Configuration, params: Params, seed=None, *, rng=None, t0=0.0, clamped=None):
        if (seed is None) == (rng is None):
            raise UsageError("give exactly one of seed or rng")
        self.lattice = cfg.lattice
        self.params = params
        self.rng = rng if rng is not None else make_rng(seed)
        self.states = cfg.states.copy()
        self.clamped = _as_mask(clamped, self.lattice.n_sites)
        self._nbr = np.ascontiguousarray(self.lattice.neighbor_table)
        self.t = float(t0)
        self.n_events = 0
        self.rebuild()

    def rebuild(self):
        """Recompute every rate from the configuration."""
        self.n1, self.rates = init_rates(
            self.states, self._nbr, self.clamped, self.params.lam, self.params.alpha
        )
        self.tree = fenwick.build(self.rates)
        self.counts = np.bincount(self.states, minlength=3).astype(np.int64)
        self._since_rebuild = 0
        self.total_rate = float(self.rates.sum())
        self._n_active = int(np.count_nonzero(self.rates > 0))

    @property
    def cfg(self) -> Configuration:
        return Configuration(self.lattice, self.states)

    def check_rates(self, rtol: float = 1e-9):
        """Compare incrementally maintained rates against a full rebuild."""
        n1, rates = init_rates(self.states, self._nbr, self.clamped, self.params.lam, self.params.alpha)
        fresh_total = float(rates.sum())
        if not np.array_equal(n1, self.n1) or not np.array_equal(rates, self.rates):
            raise InvariantError("per-site rates diverged from the configuration")
        tree_total = fenwick.prefix(self.tree, rates.shape[0])
        scale = max(fresh_total, 1.0)
        if abs(self.total_rate - fresh_total) > rtol * scale or abs(tree_total - fresh_total) > rtol * scale:
            raise InvariantError(
                f"total rate drift: kept {self.total_rate!r}, tree {tree_total!r}, exact {fresh_total!r}"
            )
        if (self.rates < 0).any():
            raise InvariantError("negative site rate")

    def _advance(self, t_max, max_events, stop_mode, log):
        scalars = np.array([self.t, self.total_rate, self._n_active, self._since_rebuild], dtype=np.float64)
        status, n_ev, lt, ls, lf, lto, lr = advance(
            self.states, self.n1, self.rates, self.tree, self._nbr, self.clamped,
            self.params.lam, self.params.alpha, self.counts, scalars, float(t_max),
            int(max_events), stop_mode, log, self.rng,
        )
        self.t = float(scalars[0])
        self.total_rate = float(scalars[1])
        self._n_active = int(scalars[2])
        self._since_rebuild = int(scalars[3])
        self.n_events += int(n_ev)
        if self.total_rate < -1e-9:
            raise InvariantError(f"negative total rate {self.total_rate!r}")
        return status, (lt, ls, lf, lto, lr)

    def step(self):
        """Perform one event and return it, or ``Absorbed`` if none can occur."""
        _, (lt, ls, lf, lto, lr) = self._advance(np.inf, 1, STOP_NEVER, True)
        if lt.shape[0] == 0:
            return Absorbed
        return Event(float(lt[0]), int(ls[0]), SiteState(int(lf[0])), SiteState(int(lto[0])), float(lr[0]))

    def sample_events(self, n_events: int, t_max: float = np.inf):
        """Run up to ``n_events`` events; returns (times, pre-event rates)."""
        _, (lt, _, _, _, lr) = self._advance(t_max, n_events, STOP_NEVER, True)
        return lt, lr

    def run_until(
        self,
        t_max: float,
        stop_on_extinction: bool = True,
        sample_dt: float | None = None,
        keep_events: bool = True,
    ) -> Trajectory:
        """Advance to ``t_max`` (or until the rumor dies out) and record counts.

        Waiting times that would overshoot ``t_max`` are discarded and the
        clock is set to ``t_max``; by memorylessness the configuration is
        then an exact sample of the state at ``t_max``.
        """
        if t_max < self.t:
            raise UsageError(f"t_max={t_max} is before the current clock {self.t}")
        t0 = self.t
        initial = self.counts.copy()
        status, (lt, ls, lf, lto, _) = self._advance(
            t_max, np.iinfo(np.int64).max, STOP_NO_RUMOR if stop_on_extinction else STOP_NEVER, True
        )
        if status == ABSORBED:
            # nothing can happen any more; the state at t_max is the current one
            self.t = float(t_max)
        log = EventLog(lt, ls, lf, lto)
        return Trajectory.from_events(t0, initial, log, sample_dt=sample_dt, t_end=t_max, keep_events=keep_events)


def simulate(cfg: Configuration, params: Params, t_max: float, seed: int, **kwargs) -> tuple[Trajectory, Configuration]:
    engine = EventEngine(cfg, params, seed)
    traj = engine.run_until(t_max, **kwargs)
    return traj, engine.cfg


def final_state(cfg: Configuration, params: Params, t_max: float, rng, stop_mode=STOP_NEVER, clamped=None):
    """Configuration at ``t_max`` without recording anything. Returns (states, t, status)."""
    states = cfg.states.copy()
    t, status, _ = run_to_horizon(
        states, np.ascontiguousarray(cfg.lattice.neighbor_table), _as_mask(clamped, states.shape[0]),
        params.lam, params.alpha, 0.0, float(t_max), stop_mode, rng,
    )
    return states, float(t), int(status)
