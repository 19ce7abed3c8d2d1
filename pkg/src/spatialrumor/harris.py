"""Harris graphical construction and the rumor/contact coupling.

Each ordered neighbour pair ``(x, y)`` carries a rate-``lam`` infection
clock (N1) and a rate-``alpha`` stifling clock (N2); each site carries a
rate-1 forgetting clock (D). The three families draw from independent
sub-streams of the run seed, so changing ``alpha`` leaves the N1 and D
marks untouched.

Driving the contact process with the same N1 and D marks (N2 ignored),
started from the rumor configuration with Stiflers erased, keeps every
rumor Spreader inside the contact process's occupied set.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvariantError, UsageError
from .lattice import Configuration, Lattice, Params, SiteState
from .seeding import make_rng
from .trajectory import EventLog, Trajectory


class Kind(enum.IntEnum):
    # value doubles as the tie-break rank
    N1 = 0
    N2 = 1
    D = 2


@dataclass(frozen=True)
class Arrival:
    t: float
    kind: Kind
    src: int
    dst: int  # equals src for D marks


@dataclass
class ArrivalStream:
    """Materialised Poisson marks on ``[0, t_max]``, sorted by
    (time, kind, src, dst)."""

    t: np.ndarray
    kind: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    t_max: float
    params: Params

    @classmethod
    def empty(cls, params: Params, t_max: float = 0.0) -> "ArrivalStream":
        z = np.zeros(0, dtype=np.int64)
        return cls(np.zeros(0), np.zeros(0, dtype=np.int8), z, z.copy(), t_max, params)

    def __len__(self):
        return self.t.shape[0]

    def __getitem__(self, i) -> Arrival:
        return Arrival(float(self.t[i]), Kind(int(self.kind[i])), int(self.src[i]), int(self.dst[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def count(self, kind: Kind) -> int:
        return int(np.count_nonzero(self.kind == kind))

    def to_csv(self, header=()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        buf.write("t,kind,src,dst\n")
        names = [k.name for k in Kind]
        for t, k, s, d in zip(self.t.tolist(), self.kind.tolist(), self.src.tolist(), self.dst.tolist()):
            buf.write(f"{t!r},{names[k]},{s},{d}\n")
        return buf.getvalue()


def _poisson_marks(rng, rate, n_slots, t_max):
    if rate == 0 or n_slots == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    k = rng.poisson(rate * n_slots * t_max)
    times = rng.uniform(0.0, t_max, size=k)
    slots = rng.integers(0, n_slots, size=k)
    return times, slots


def generate_arrivals(lattice: Lattice, params: Params, t_max: float, seed=None, *, key=()) -> ArrivalStream:
    """Sample every N1, N2 and D mark in ``[0, t_max]``.

    Per family, the superposition of the per-edge (per-site) processes is
    one Poisson process of rate ``rate * n_edges`` whose marks are assigned
    to edges uniformly; that is the same law as independent per-edge
    clocks.
    """
    if not t_max > 0:
        raise UsageError("t_max must be positive")
    if not np.isfinite(t_max):
        raise UsageError("t_max must be finite")
    pairs = lattice.ordered_pairs
    parts = []
    for kind, rate in ((Kind.N1, params.lam), (Kind.N2, params.alpha), (Kind.D, Params.FORGET_RATE)):
        rng = make_rng(seed, *key, int(kind))
        n_slots = pairs.shape[0] if kind != Kind.D else lattice.n_sites
        times, slots = _poisson_marks(rng, rate, n_slots, t_max)
        if kind == Kind.D:
            src = dst = slots
        else:
            src, dst = pairs[slots, 0], pairs[slots, 1]
        parts.append((times, np.full(times.shape[0], int(kind), dtype=np.int8), src, dst))
    t = np.concatenate([p[0] for p in parts])
    kind = np.concatenate([p[1] for p in parts])
    src = np.concatenate([p[2] for p in parts]).astype(np.int64)
    dst = np.concatenate([p[3] for p in parts]).astype(np.int64)
    order = np.lexsort((dst, src, kind, t))
    return ArrivalStream(t[order], kind[order], src[order], dst[order], float(t_max), params)


def apply_arrival_rumor(eta: Configuration, arrival: Arrival) -> Configuration:
    """Rumor update rule for one mark; marks whose condition fails are no-ops."""
    out = eta.copy()
    s = out.states
    if arrival.kind == Kind.N1:
        if s[arrival.src] == SiteState.SPREADER and s[arrival.dst] == SiteState.IGNORANT:
            s[arrival.dst] = SiteState.SPREADER
    elif arrival.kind == Kind.N2:
        if s[arrival.src] == SiteState.SPREADER and s[arrival.dst] == SiteState.SPREADER:
            s[arrival.dst] = SiteState.STIFLER
    elif s[arrival.src] != SiteState.IGNORANT:
        s[arrival.src] = SiteState.IGNORANT
    return out


def apply_arrival_contact(xi: Configuration, arrival: Arrival) -> Configuration:
    """Contact-process rule: N1 infects, D cures, N2 is ignored."""
    out = xi.copy()
    s = out.states
    if arrival.kind == Kind.N1:
        if s[arrival.src] == 1 and s[arrival.dst] == 0:
            s[arrival.dst] = 1
    elif arrival.kind == Kind.D:
        s[arrival.src] = 0
    return out


def contact_initial(eta0: Configuration) -> Configuration:
    """Contact process start: Spreaders stay 1, Stiflers become 0."""
    return Configuration(eta0.lattice, (eta0.states == SiteState.SPREADER).astype(np.int8))


@numba.njit(cache=True, nogil=True)
def _rumor_rule(s, kind, src, dst):
    """Returns (site, new_state) or (-1, 0) for a no-op."""
    if kind == 0:
        if s[src] == 1 and s[dst] == 0:
            return dst, 1
    elif kind == 1:
        if s[src] == 1 and s[dst] == 1:
            return dst, 2
    elif s[src] != 0:
        return src, 0
    return -1, 0


@numba.njit(cache=True, nogil=True)
def _contact_rule(s, kind, src, dst):
    if kind == 0:
        if s[src] == 1 and s[dst] == 0:
            return dst, 1
    elif kind == 2:
        if s[src] != 0:
            return src, 0
    return -1, 0


@numba.njit(cache=True, nogil=True)
def _drive(eta, xi, at, ak, asrc, adst, coupled, log):
    """Apply every mark in order. Mutates ``eta`` (and ``xi`` if coupled).

    Returns per-process logs (index into the stream, site, from, to) and the
    stream indices at which the dominance check failed.
    """
    n = at.shape[0]
    cap = n if log else 0
    e_idx = np.empty(cap, np.int64)
    e_site = np.empty(cap, np.int64)
    e_from = np.empty(cap, np.int8)
    e_to = np.empty(cap, np.int8)
    c_idx = np.empty(cap if coupled else 0, np.int64)
    c_site = np.empty(cap if coupled else 0, np.int64)
    c_from = np.empty(cap if coupled else 0, np.int8)
    c_to = np.empty(cap if coupled else 0, np.int8)
    viol = np.empty(16, np.int64)
    ne = 0
    nc = 0
    nv = 0
    for i in range(n):
        k = ak[i]
        x, new = _rumor_rule(eta, k, asrc[i], adst[i])
        if x >= 0:
            if log:
                e_idx[ne] = i
                e_site[ne] = x
                e_from[ne] = eta[x]
                e_to[ne] = new
            eta[x] = new
            ne += 1
        if coupled:
            y, cnew = _contact_rule(xi, k, asrc[i], adst[i])
            if y >= 0:
                if log:
                    c_idx[nc] = i
                    c_site[nc] = y
                    c_from[nc] = xi[y]
                    c_to[nc] = cnew
                xi[y] = cnew
                nc += 1
            # only the touched sites can have changed
            bad = False
            if x >= 0 and eta[x] == 1 and xi[x] != 1:
                bad = True
            if y >= 0 and eta[y] == 1 and xi[y] != 1:
                bad = True
            if bad:
                if nv >= viol.shape[0]:
                    grown = np.empty(2 * viol.shape[0], np.int64)
                    grown[:nv] = viol[:nv]
                    viol = grown
                viol[nv] = i
                nv += 1
    return (
        ne, e_idx[:ne] if log else e_idx, e_site[:ne] if log else e_site,
        e_from[:ne] if log else e_from, e_to[:ne] if log else e_to,
        nc, c_idx[:nc] if coupled and log else c_idx, c_site[:nc] if coupled and log else c_site,
        c_from[:nc] if coupled and log else c_from, c_to[:nc] if coupled and log else c_to,
        viol[:nv],
    )


def _to_log(stream, idx, site, frm, to) -> EventLog:
    return EventLog(stream.t[idx], site, frm, to)


@dataclass
class DominanceReport:
    replicas: int = 0
    arrivals_applied: int = 0
    violations: list = field(default_factory=list)

    def merge(self, other: "DominanceReport") -> "DominanceReport":
        return DominanceReport(
            self.replicas + other.replicas,
            self.arrivals_applied + other.arrivals_applied,
            self.violations + other.violations,
        )

    def to_dict(self) -> dict:
        return {"replicas": self.replicas, "arrivals_applied": self.arrivals_applied, "violations": self.violations}

    def to_json(self, **extra) -> str:
        return json.dumps({**extra, **self.to_dict()}, indent=2, sort_keys=True)


@dataclass
class CoupledRun:
    rumor: Trajectory
    contact: Trajectory
    report: DominanceReport
    eta: Configuration
    xi: Configuration
    stream: ArrivalStream


def drive(eta0: Configuration, stream: ArrivalStream, xi0: Configuration | None = None, log: bool = True):
    """Apply ``stream`` to copies of ``eta0`` (and ``xi0``); low-level entry point."""
    eta = eta0.states.copy()
    coupled = xi0 is not None
    xi = xi0.states.copy() if coupled else np.zeros(0, np.int8)
    out = _drive(eta, xi, stream.t, stream.kind, stream.src, stream.dst, coupled, log)
    return eta, xi, out


def run_coupled(eta0: Configuration, params: Params, t_max: float, seed=None, *, key=(), stream=None,
                strict: bool = True) -> CoupledRun:
    """Run rumor and contact processes on one shared arrival stream.

    With ``strict`` any dominance violation raises ``InvariantError``.
    """
    if stream is None:
        stream = generate_arrivals(eta0.lattice, params, t_max, seed, key=key)
    xi0 = contact_initial(eta0)
    eta, xi, out = drive(eta0, stream, xi0)
    _, ei, es, ef, et, _, ci, cs, cf, ct, viol = out
    # the start configurations must already satisfy dominance
    initial_bad = np.flatnonzero((eta0.states == 1) & (xi0.states != 1))
    violations = [{"arrival": -1, "site": int(s)} for s in initial_bad]
    violations += [
        {"arrival": int(i), "t": float(stream.t[i]), "kind": Kind(int(stream.kind[i])).name} for i in viol
    ]
    report = DominanceReport(1, len(stream), violations)
    if strict and violations:
        raise InvariantError(f"dominance violated at {len(violations)} arrivals")
    rumor = Trajectory.from_events(0.0, eta0.counts(), _to_log(stream, ei, es, ef, et))
    contact = Trajectory.from_events(0.0, xi0.counts(), _to_log(stream, ci, cs, cf, ct))
    return CoupledRun(
        rumor, contact, report, Configuration(eta0.lattice, eta), Configuration(eta0.lattice, xi), stream
    )


def run_harris(eta0: Configuration, params: Params, t_max: float, seed=None, *, key=(), stream=None) -> Trajectory:
    """Rumor-only run driven by the graphical construction."""
    traj, _ = run_harris_state(eta0, params, t_max, seed, key=key, stream=stream)
    return traj


def run_harris_state(eta0, params, t_max, seed=None, *, key=(), stream=None, log=True):
    if stream is None and t_max == 0:
        stream = ArrivalStream.empty(params)
    if stream is None:
        stream = generate_arrivals(eta0.lattice, params, t_max, seed, key=key)
    eta, _, out = drive(eta0, stream, None, log=log)
    cfg = Configuration(eta0.lattice, eta)
    if not log:
        return None, cfg
    _, ei, es, ef, et = out[:5]
    return Trajectory.from_events(0.0, eta0.counts(), _to_log(stream, ei, es, ef, et)), cfg
