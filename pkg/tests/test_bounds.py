"""Tests for the phase-error SDP builders, the infinite-phase benchmark and
the leakage combination."""

import math

import numpy as np
import pytest

from tfqkd import (
    BoundComputation,
    NoiseParams,
    ObservedStats,
    PhaseErrorBounds,
    ProtocolConfig,
    binary_entropy,
    bound_phase_errors,
    build_sdp_diff,
    build_sdp_same,
    eph_bound_infinite_M,
    exact_yield,
    fidelity,
    fidelity_complement,
    information_leak,
    mod_m_weights,
    observe,
    parity_coeffs,
    poisson_pmf,
    solve,
)
from tfqkd.sdp import GramSDP

NOISE = NoiseParams(e_mis=0.02, p_dark=1e-8)


def honest_setup(loss_db: float, m_phases: int, mu: float = 0.06, beta1: float = 0.01):
    ch = NOISE.at_loss(loss_db)
    cfg = ProtocolConfig(m_phases=m_phases, mu=mu, decoys=(beta1,))
    stats = observe(cfg.mu, cfg.test_intensities, ch)
    return ch, cfg, stats


def true_phase_error_same(stats, cfg, ch, n_cut: int = 40) -> float:
    """Closed-form honest value: even-photon-number clicks over branch mass."""
    p_branch = stats.p_succ * stats.p_same_given_succ
    numerator = sum(
        poisson_pmf(n, cfg.mu) * exact_yield(n, ch) for n in range(0, n_cut + 1, 2)
    )
    return numerator / (2.0 * p_branch)


# ---------------------------------------------------------------------------
# ProtocolConfig / PhaseErrorBounds
# ---------------------------------------------------------------------------


def test_protocol_config_exposes_intensity_sets():
    cfg = ProtocolConfig(m_phases=8, mu=0.06, decoys=(0.01,))
    assert cfg.test_intensities == (0.01, 0.06)
    assert cfg.n_intensities == 3  # decoy, signal, vacuum
    cfg2 = ProtocolConfig(m_phases=4, mu=0.06, decoys=(0.01, 0.002))
    assert cfg2.test_intensities == (0.01, 0.002, 0.06)
    assert cfg2.n_intensities == 4


@pytest.mark.parametrize(
    "kwargs",
    [
        {"m_phases": 3, "mu": 0.06, "decoys": (0.01,)},
        {"m_phases": 0, "mu": 0.06, "decoys": (0.01,)},
        {"m_phases": 4, "mu": 5e-5, "decoys": (0.01,)},
        {"m_phases": 4, "mu": 0.06, "decoys": (5e-5,)},
        {"m_phases": 4, "mu": 0.06, "decoys": (0.06,)},
        {"m_phases": 4, "mu": 0.06, "decoys": (0.01, 0.01)},
        {"m_phases": 4, "mu": 0.06, "decoys": ()},
        {"m_phases": 4, "mu": 0.06, "decoys": (0.01,), "f": 0.99},
    ],
)
def test_protocol_config_rejects_bad_inputs(kwargs):
    with pytest.raises(ValueError):
        ProtocolConfig(**kwargs)


def test_phase_error_bounds_allow_vacuous_values():
    b = PhaseErrorBounds(e_ph_same=0.8, e_ph_diff=1.0, certified=False)
    assert b.e_ph_same == 0.8
    with pytest.raises(ValueError):
        PhaseErrorBounds(e_ph_same=1.2, e_ph_diff=0.1, certified=True)
    with pytest.raises(ValueError):
        PhaseErrorBounds(e_ph_same=0.1, e_ph_diff=-0.01, certified=True)


# ---------------------------------------------------------------------------
# SDP assembly: counts and structure
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("m,expected", [(4, 17), (8, 29), (12, 41)])
def test_constraint_counts_single_decoy(m, expected):
    _, cfg, stats = honest_setup(30.0, m)
    prob = build_sdp_same(stats, cfg)
    assert prob.n_constraints == expected
    assert len(prob.equalities) + len(prob.inequalities) == expected
    assert prob.dim == 2 * m
    diff = build_sdp_diff(stats, cfg)
    assert diff.n_constraints == expected
    assert diff.dim == 2 * m


@pytest.mark.parametrize("m", [4, 8])
def test_constraint_counts_two_decoys(m):
    ch = NOISE.at_loss(20.0)
    cfg = ProtocolConfig(m_phases=m, mu=0.06, decoys=(0.01, 0.002))
    stats = observe(cfg.mu, cfg.test_intensities, ch)
    prob = build_sdp_same(stats, cfg)
    # (d-1)(d-2)M + 2d + M - 1 with d = 4
    assert prob.n_constraints == 6 * m + 8 + m - 1
    assert prob.dim == 3 * m


@pytest.mark.parametrize("m", [4, 8, 12])
@pytest.mark.parametrize("decoys", [(0.01,), (0.01, 0.002)])
def test_every_referenced_index_is_mapped(m, decoys):
    ch = NOISE.at_loss(25.0)
    cfg = ProtocolConfig(m_phases=m, mu=0.06, decoys=decoys)
    stats = observe(cfg.mu, cfg.test_intensities, ch)
    for prob in (build_sdp_same(stats, cfg), build_sdp_diff(stats, cfg)):
        rows = set(prob.index_map.values())
        assert rows == set(range(prob.dim))
        labels = {key[0] for key in prob.index_map}
        assert labels == set(cfg.test_intensities)
        for mat in [prob.objective] + [a for a, _ in prob.equalities] + [
            a for a, _ in prob.inequalities
        ]:
            touched = {int(i) for i in np.nonzero(mat)[0]} | {
                int(j) for j in np.nonzero(mat)[1]
            }
            assert touched <= rows


def test_constraint_families_in_documented_order():
    m = 4
    ch, cfg, stats = honest_setup(30.0, m)
    prob = build_sdp_same(stats, cfg)
    rows = prob.index_map
    p_branch = stats.p_succ * stats.p_same_given_succ
    pc = parity_coeffs(m, cfg.mu)
    mu_rows = [rows[(cfg.mu, n)] for n in range(m)]

    # objective: rank-one parity projector over the signal block
    expected_c = np.zeros((prob.dim, prob.dim))
    embed_even = np.zeros(prob.dim)
    embed_even[mu_rows] = pc.even
    expected_c += np.outer(embed_even, embed_even) / (2.0 * p_branch)
    assert np.allclose(prob.objective, expected_c, rtol=1e-12, atol=1e-15)

    # (i) success-probability equality mixes both parities
    mat0, rhs0 = prob.equalities[0]
    embed_odd = np.zeros(prob.dim)
    embed_odd[mu_rows] = pc.odd
    expected0 = 0.5 * (np.outer(embed_even, embed_even) + np.outer(embed_odd, embed_odd))
    assert np.allclose(mat0, expected0, rtol=1e-12, atol=1e-15)
    assert rhs0 == p_branch

    # (ii) one diagonal gain equality per non-vacuum intensity
    for k, beta in enumerate(cfg.test_intensities):
        mat, rhs = prob.equalities[1 + k]
        weights = mod_m_weights(m, beta).weights
        expected = np.zeros((prob.dim, prob.dim))
        for n in range(m):
            expected[rows[(beta, n)], rows[(beta, n)]] = weights[n]
        assert np.allclose(mat, expected, rtol=1e-12, atol=1e-15)
        assert rhs == stats.q_same[beta]

    # (iii) unit box bounds on the signal-block diagonal
    for n in range(m):
        mat, bound = prob.inequalities[n]
        assert bound == 1.0
        expected = np.zeros((prob.dim, prob.dim))
        expected[rows[(cfg.mu, n)], rows[(cfg.mu, n)]] = 1.0
        assert np.array_equal(mat, expected)

    # (iv) ordered-pair trace-distance bounds on same-residue diagonals
    pair_block = prob.inequalities[m : m + 2 * m]
    seen = set()
    for mat, bound in pair_block:
        diag = np.diag(mat)
        plus = int(np.where(diag == 1.0)[0][0])
        minus = int(np.where(diag == -1.0)[0][0])
        assert np.count_nonzero(mat) == 2
        inverse = {row: key for key, row in rows.items()}
        (b_plus, n_plus), (b_minus, n_minus) = inverse[plus], inverse[minus]
        assert n_plus == n_minus
        assert b_plus != b_minus
        assert bound == pytest.approx(
            math.sqrt(fidelity_complement(n_plus, m, b_plus, b_minus)), rel=1e-12
        )
        seen.add((b_plus, b_minus, n_plus))
    assert len(seen) == 2 * m  # every ordered pair at every residue

    # (v) vacuum-anchored cap on each intensity's residue-0 diagonal
    q_vac = stats.q_same[0.0]
    for k, beta in enumerate(cfg.test_intensities):
        mat, bound = prob.inequalities[3 * m + k]
        expected = np.zeros((prob.dim, prob.dim))
        expected[rows[(beta, 0)], rows[(beta, 0)]] = 1.0
        assert np.array_equal(mat, expected)
        f0 = fidelity(0, m, beta, 0.0)
        anchor = (
            1.0
            - q_vac
            + 2.0 * math.sqrt(f0 * (1.0 - f0) * (1.0 - q_vac) * q_vac)
            + f0 * (2.0 * q_vac - 1.0)
        )
        assert bound == pytest.approx(anchor, rel=1e-12)


def test_diff_builder_uses_other_branch_observables():
    m = 4
    _, cfg, stats = honest_setup(30.0, m)
    skew = {beta: 1.25 * q for beta, q in stats.q_diff.items()}
    asym = ObservedStats(
        p_succ=stats.p_succ,
        p_same_given_succ=0.4,
        p_diff_given_succ=0.6,
        e_bit=stats.e_bit,
        q_same=dict(stats.q_same),
        q_diff=skew,
    )
    same = build_sdp_same(asym, cfg)
    diff = build_sdp_diff(asym, cfg)
    assert same.content_digest() != diff.content_digest()
    # branch normalization
    assert same.equalities[0][1] == asym.p_succ * 0.4
    assert diff.equalities[0][1] == asym.p_succ * 0.6
    # gain equalities quote the branch's own gains
    for k, beta in enumerate(cfg.test_intensities):
        assert same.equalities[1 + k][1] == asym.q_same[beta]
        assert diff.equalities[1 + k][1] == skew[beta]
    # vacuum anchor built from the branch's vacuum gain
    anchor_same = same.inequalities[3 * m][1]
    anchor_diff = diff.inequalities[3 * m][1]
    assert anchor_same != anchor_diff


def test_builders_reject_degenerate_or_mismatched_stats():
    _, cfg, stats = honest_setup(30.0, 4)
    dead = ObservedStats(
        p_succ=0.0,
        p_same_given_succ=0.5,
        p_diff_given_succ=0.5,
        e_bit=0.0,
        q_same=dict(stats.q_same),
        q_diff=dict(stats.q_diff),
        degenerate=True,
    )
    with pytest.raises(ValueError):
        build_sdp_same(dead, cfg)
    missing = dict(stats.q_same)
    missing.pop(0.01)
    broken = ObservedStats(
        p_succ=stats.p_succ,
        p_same_given_succ=0.5,
        p_diff_given_succ=0.5,
        e_bit=stats.e_bit,
        q_same=missing,
        q_diff=dict(stats.q_diff),
    )
    with pytest.raises(ValueError):
        build_sdp_same(broken, cfg)
    extra = dict(stats.q_same)
    extra[0.5] = 0.1
    broken2 = ObservedStats(
        p_succ=stats.p_succ,
        p_same_given_succ=0.5,
        p_diff_given_succ=0.5,
        e_bit=stats.e_bit,
        q_same=extra,
        q_diff=dict(stats.q_diff),
    )
    with pytest.raises(ValueError):
        build_sdp_same(broken2, cfg)


# ---------------------------------------------------------------------------
# solved bounds: soundness, symmetry, monotone information
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("eta_exp,m", [(2, 4), (3, 4), (3, 8), (4, 4)])
def test_bound_dominates_true_phase_error(eta_exp, m):
    loss_db = 10.0 * eta_exp
    ch, cfg, stats = honest_setup(loss_db, m)
    report = solve(build_sdp_same(stats, cfg))
    assert report.status == "optimal"
    truth = true_phase_error_same(stats, cfg, ch)
    assert report.optimum - truth >= -1e-8


def test_same_and_diff_bounds_agree_on_honest_channel():
    _, cfg, stats = honest_setup(30.0, 8)
    comp = bound_phase_errors(stats, cfg)
    assert isinstance(comp, BoundComputation)
    assert comp.bounds.certified
    assert abs(comp.bounds.e_ph_same - comp.bounds.e_ph_diff) <= 1e-8
    assert comp.report_same.status == "optimal"
    assert comp.report_diff.status == "optimal"


def test_redundant_constraint_never_raises_optimum():
    _, cfg, stats = honest_setup(30.0, 4)
    base = build_sdp_same(stats, cfg)
    base_opt = solve(base).optimum
    extra = np.zeros((base.dim, base.dim))
    extra[base.index_map[(cfg.mu, 0)], base.index_map[(cfg.mu, 0)]] = 1.0
    widened = GramSDP(
        dim=base.dim,
        objective=base.objective,
        equalities=base.equalities,
        inequalities=base.inequalities + ((extra, 1.0),),
        index_map=base.index_map,
    )
    assert solve(widened).optimum <= base_opt + 1e-9


@pytest.mark.parametrize("m", [4, 8, 12])
def test_finite_m_bound_dominates_infinite_benchmark(m):
    ch, cfg, stats = honest_setup(30.0, m)
    sdp_bound = solve(build_sdp_same(stats, cfg)).optimum
    p_branch = stats.p_succ * stats.p_same_given_succ
    yields = [exact_yield(n, ch) for n in range(41)]
    cs_bound = eph_bound_infinite_M(yields, cfg.mu, p_branch)
    assert sdp_bound >= cs_bound - 1e-6


# ---------------------------------------------------------------------------
# infinite-M benchmark
# ---------------------------------------------------------------------------


def test_infinite_benchmark_zero_yields():
    value = eph_bound_infinite_M([0.0] * 41, 0.06, 0.5)
    assert value == pytest.approx(0.0, abs=1e-40)


def test_infinite_benchmark_unit_yields_matches_direct_summation():
    mu = 0.06
    root_sum = sum(math.sqrt(poisson_pmf(n, mu)) for n in range(0, 400, 2))
    expected = root_sum**2 / (2.0 * 0.5)
    value = eph_bound_infinite_M([1.0] * 41, mu, 0.5)
    assert value == pytest.approx(expected, rel=1e-12)


def test_infinite_benchmark_sits_between_truth_and_finite_bound():
    ch, cfg, stats = honest_setup(30.0, 12)
    p_branch = stats.p_succ * stats.p_same_given_succ
    yields = [exact_yield(n, ch) for n in range(41)]
    cs_bound = eph_bound_infinite_M(yields, cfg.mu, p_branch)
    truth = true_phase_error_same(stats, cfg, ch)
    finite = solve(build_sdp_same(stats, cfg)).optimum
    assert truth <= cs_bound <= finite + 1e-6


def test_infinite_benchmark_rejects_bad_inputs():
    with pytest.raises(ValueError):
        eph_bound_infinite_M([0.5] * 41, 0.06, 0.0)
    with pytest.raises(ValueError):
        eph_bound_infinite_M([0.5] * 10, 0.06, 0.5)
    with pytest.raises(ValueError):
        eph_bound_infinite_M([1.5] * 41, 0.06, 0.5)
    with pytest.raises(ValueError):
        eph_bound_infinite_M([0.5] * 41, 0.0, 0.5)


# ---------------------------------------------------------------------------
# information_leak
# ---------------------------------------------------------------------------


def test_information_leak_limits():
    zero = PhaseErrorBounds(e_ph_same=0.0, e_ph_diff=0.0, certified=True)
    assert information_leak(zero, 0.5, 0.5) == 0.0
    full = PhaseErrorBounds(e_ph_same=0.6, e_ph_diff=0.9, certified=True)
    assert information_leak(full, 0.3, 0.7) == pytest.approx(1.0, abs=1e-14)


def test_information_leak_frozen_value():
    bounds = PhaseErrorBounds(e_ph_same=0.02, e_ph_diff=0.05, certified=True)
    assert information_leak(bounds, 0.5, 0.5) == pytest.approx(
        0.21391874982888848, rel=1e-13
    )
    assert information_leak(bounds, 0.5, 0.5) == pytest.approx(
        0.5 * binary_entropy(0.02) + 0.5 * binary_entropy(0.05), rel=1e-14
    )


def test_information_leak_caps_entropy_argument():
    mild = PhaseErrorBounds(e_ph_same=0.5, e_ph_diff=0.3, certified=True)
    wild = PhaseErrorBounds(e_ph_same=0.97, e_ph_diff=0.3, certified=True)
    assert information_leak(wild, 0.5, 0.5) == information_leak(mild, 0.5, 0.5)
