import json

import numpy as np
import pytest
from scipy.linalg import expm

from spatialrumor.errors import CapacityError, UsageError
from spatialrumor.lattice import Boundary, Configuration, Lattice, Params
from spatialrumor.oracle import (
    build_generator,
    decode,
    empirical_distribution,
    encode,
    encode_many,
    extinction_probability_by,
    oracle_report_json,
    spreader_count_distribution,
    total_variation,
    transient_distribution,
)

SINGLE = Lattice(1, 1, Boundary.FROZEN_IGNORANT)


def test_encoding_roundtrip():
    assert encode([1, 0, 0]) == 1 and encode([0, 0, 1]) == 9 and encode([2, 1]) == 5
    for code in range(81):
        assert encode(decode(code, 4)) == code
    arr = np.array([decode(c, 4) for c in range(81)])
    np.testing.assert_array_equal(encode_many(arr), np.arange(81))


def test_single_site_generator():
    Q = build_generator(SINGLE, Params(2, 1)).Q.toarray()
    # spreader and stifler both forget at rate 1; nothing else can move
    np.testing.assert_array_equal(Q, [[0, 0, 0], [1, -1, 0], [1, 0, -1]])


def test_all_ignorant_row_absorbing():
    gen = build_generator(Lattice(1, 4), Params(2, 1))
    assert gen.Q.getrow(0).nnz == 0


def test_ring3_exit_rate():
    lat = Lattice(1, 3)
    gen = build_generator(lat, Params(1.5, 0.7))
    # one spreader: it forgets (1) and infects both ignorant neighbors (lambda each)
    code = encode(Configuration.from_sites(lat, [0]).states)
    assert gen.exit_rates()[code] == pytest.approx(2 * 1.5 + 1)


def test_row_sums_zero():
    gen = build_generator(Lattice(2, 2, Boundary.FROZEN_IGNORANT), Params(2.3, 0.4))
    assert np.abs(np.asarray(gen.Q.sum(axis=1))).max() < 1e-12
    off = gen.Q.toarray() - np.diag(gen.Q.diagonal())
    assert off.min() >= 0


def test_point_mass_at_zero():
    lat = Lattice(1, 4)
    gen = build_generator(lat, Params(2, 1))
    p = transient_distribution(gen, Configuration.single_spreader(lat), 0.0)
    assert p.sum() == 1.0 and p[encode(Configuration.single_spreader(lat).states)] == 1.0


@pytest.mark.parametrize("t", [0.1, 1.0, 3.7])
def test_single_site_forgetting(t):
    gen = build_generator(SINGLE, Params(2, 1))
    p = transient_distribution(gen, Configuration.from_sites(SINGLE, [0]), t)
    assert abs(p[0] - (1 - np.exp(-t))) < 1e-10


def test_distribution_normalised_and_matches_expm():
    lat = Lattice(1, 5)
    gen = build_generator(lat, Params(2, 0.5))
    start = Configuration.from_sites(lat, [1, 2], stiflers=[4])
    p0 = np.zeros(gen.n_states)
    p0[encode(start.states)] = 1
    for t in (0.3, 1.0, 2.5):
        p = transient_distribution(gen, start, t)
        assert abs(p.sum() - 1) < 1e-9
        ref = p0 @ expm(gen.Q.toarray() * t)
        assert np.abs(p - ref).max() < 1e-10


def test_extinction_monotone():
    lat = Lattice(1, 4)
    gen = build_generator(lat, Params(2, 1))
    start = Configuration.single_spreader(lat)
    values = [extinction_probability_by(gen, start, t) for t in np.linspace(0, 4, 9)]
    assert values[0] == 0
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert values[2] == pytest.approx(0.2962941, abs=1e-5)


def test_capacity():
    with pytest.raises(CapacityError):
        build_generator(Lattice(1, 9), Params(1, 1))
    with pytest.raises(CapacityError):
        build_generator(Lattice(2, 3), Params(1, 1), cap=8)


def test_wrong_lattice_rejected():
    gen = build_generator(Lattice(1, 4), Params(1, 1))
    with pytest.raises(UsageError):
        transient_distribution(gen, Configuration.single_spreader(Lattice(1, 5)), 1.0)


def test_helpers():
    p = np.array([0.5, 0.5, 0, 0])
    q = np.array([0.25, 0.25, 0.5, 0])
    assert total_variation(p, q) == 0.5
    finals = np.array([[0, 0], [1, 0], [1, 0], [0, 2]], np.int8)
    np.testing.assert_allclose(empirical_distribution(finals, 9), [0.25, 0.5, 0, 0, 0, 0, 0.25, 0, 0])
    dist = np.full(9, 1 / 9)
    np.testing.assert_allclose(spreader_count_distribution(dist, 2), [4 / 9, 4 / 9, 1 / 9])


def test_report_json():
    lat = Lattice(1, 4)
    gen = build_generator(lat, Params(2, 1))
    data = json.loads(oracle_report_json(gen, Configuration.single_spreader(lat), 1.0, top_k=3))
    assert data["N"] == 4 and len(data["top_states"]) == 3
    probs = [s["probability"] for s in data["top_states"]]
    assert probs == sorted(probs, reverse=True)
