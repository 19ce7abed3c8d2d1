"""Exact transient law of the rumor CTMC on tiny lattices.

Configurations are encoded in base 3 with site ``i`` as digit ``i``. The
generator is assembled from ``lattice.site_rates`` and the transient
distribution comes from uniformization with a truncated Poisson sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse, stats

from .errors import CapacityError, UsageError
from .lattice import Configuration, Lattice, Params, site_rates

DEFAULT_CAP = 8
TAIL_TOL = 1e-12


def encode(states) -> int:
    states = np.asarray(states, dtype=np.int64)
    return int(np.dot(states, 3 ** np.arange(states.shape[-1], dtype=np.int64)))


def encode_many(states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.int64)
    return states @ (3 ** np.arange(states.shape[-1], dtype=np.int64))


def decode(code: int, n_sites: int) -> np.ndarray:
    out = np.empty(n_sites, dtype=np.int8)
    for i in range(n_sites):
        code, out[i] = divmod(code, 3)
    return out


@dataclass
class GeneratorMatrix:
    lattice: Lattice
    params: Params
    Q: sparse.csr_matrix

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    def exit_rates(self) -> np.ndarray:
        return -self.Q.diagonal()


def build_generator(lattice: Lattice, params: Params, cap: int = DEFAULT_CAP) -> GeneratorMatrix:
    n = lattice.n_sites
    if n > cap:
        raise CapacityError(f"{n} sites exceeds the oracle cap of {cap} (3^{n} states)")
    n_states = 3**n
    rows, cols, vals = [], [], []
    powers = 3 ** np.arange(n)
    for code in range(n_states):
        cfg = Configuration(lattice, decode(code, n))
        for x in range(n):
            cur = int(cfg.states[x])
            for to, rate in site_rates(cfg, params, x).items():
                if rate > 0:
                    rows.append(code)
                    cols.append(code + (int(to) - cur) * int(powers[x]))
                    vals.append(rate)
    off = sparse.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    diag = -np.asarray(off.sum(axis=1)).ravel()
    Q = (off + sparse.diags(diag)).tocsr()
    return GeneratorMatrix(lattice, params, Q)


def transient_distribution(gen: GeneratorMatrix, initial: Configuration, t: float, tol: float = TAIL_TOL) -> np.ndarray:
    """Law of the configuration at time ``t`` started from ``initial``.

    With ``q`` the largest exit rate, ``P = I + Q/q`` is stochastic and
    ``p(t) = sum_k Poisson(k; q t) p0 P^k``. The sum stops once the Poisson
    tail drops below ``tol``, which bounds the error of every entry.
    """
    if t < 0:
        raise UsageError("t must be nonnegative")
    if initial.lattice != gen.lattice:
        raise UsageError("initial configuration lives on a different lattice")
    p = np.zeros(gen.n_states)
    p[encode(initial.states)] = 1.0
    q = float(gen.exit_rates().max())
    if t == 0 or q == 0:
        return p
    qt = q * t
    n_terms = int(stats.poisson.isf(tol, qt)) + 1
    while stats.poisson.sf(n_terms - 1, qt) > tol:
        n_terms += 1
    weights = stats.poisson.pmf(np.arange(n_terms), qt)
    PT = (sparse.identity(gen.n_states, format="csr") + gen.Q / q).T.tocsr()
    out = weights[0] * p
    v = p
    for k in range(1, n_terms):
        v = PT @ v
        out += weights[k] * v
    return out


def extinction_probability_by(gen: GeneratorMatrix, initial: Configuration, t: float) -> float:
    return float(transient_distribution(gen, initial, t)[0])


def spreader_count_distribution(dist: np.ndarray, n_sites: int) -> np.ndarray:
    """Marginal law of the number of Spreaders."""
    codes = np.arange(dist.shape[0])
    n_spread = np.zeros(dist.shape[0], dtype=np.int64)
    for _ in range(n_sites):
        codes, digit = np.divmod(codes, 3)
        n_spread += digit == 1
    return np.bincount(n_spread, weights=dist, minlength=n_sites + 1)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def empirical_distribution(final_states: np.ndarray, n_states: int) -> np.ndarray:
    codes = encode_many(final_states)
    return np.bincount(codes, minlength=n_states) / codes.shape[0]


def oracle_report(gen: GeneratorMatrix, initial: Configuration, t: float, top_k: int = 10) -> dict:
    dist = transient_distribution(gen, initial, t)
    order = np.argsort(-dist, kind="stable")[:top_k]
    n = gen.lattice.n_sites
    return {
        "N": n,
        "lambda": gen.params.lam,
        "alpha": gen.params.alpha,
        "t": t,
        "top_states": [
            {"state": "".join(str(v) for v in decode(int(c), n)), "probability": float(dist[c])} for c in order
        ],
        "extinction_probability": float(dist[0]),
    }


def oracle_report_json(gen, initial, t, top_k=10) -> str:
    return json.dumps(oracle_report(gen, initial, t, top_k), indent=2, sort_keys=True)
