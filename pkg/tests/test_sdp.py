"""Tests for the Gram-matrix SDP engine and its dual-certificate audit."""

import json
import math

import numpy as np
import pytest

from tfqkd import (
    CertificateError,
    GramSDP,
    NoiseParams,
    ProtocolConfig,
    build_sdp_same,
    exact_yield,
    mod_m_weights,
    observe,
    poisson_pmf,
    problem_from_json,
    problem_to_json,
    solve,
    verify_dual,
)
from tfqkd.sdp import svec, unsvec


def scalar_box_problem(bound: float = 0.3) -> GramSDP:
    return GramSDP(
        dim=1,
        objective=np.array([[1.0]]),
        inequalities=((np.array([[1.0]]), bound),),
    )


def cauchy_schwarz_problem() -> GramSDP:
    c = np.array([[0.0, 0.5], [0.5, 0.0]])  # <C, G> = G_01
    eqs = (
        (np.diag([1.0, 0.0]), 1.0),
        (np.diag([0.0, 1.0]), 1.0),
    )
    return GramSDP(dim=2, objective=c, equalities=eqs)


def honest_instance(loss_db: float, m_phases: int) -> GramSDP:
    noise = NoiseParams(e_mis=0.02, p_dark=1e-8)
    cfg = ProtocolConfig(m_phases=m_phases, mu=0.06, decoys=(0.01,))
    stats = observe(cfg.mu, cfg.test_intensities, noise.at_loss(loss_db))
    return build_sdp_same(stats, cfg)


# ---------------------------------------------------------------------------
# GramSDP construction
# ---------------------------------------------------------------------------


def test_gram_sdp_default_index_map_is_bijective():
    prob = cauchy_schwarz_problem()
    assert set(prob.index_map.values()) == {0, 1}
    assert len(prob.index_map) == 2


def test_gram_sdp_rejects_asymmetric_matrices():
    with pytest.raises(ValueError):
        GramSDP(dim=2, objective=np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_gram_sdp_rejects_wrong_side():
    with pytest.raises(ValueError):
        GramSDP(dim=2, objective=np.eye(3))
    with pytest.raises(ValueError):
        GramSDP(dim=2, objective=np.zeros((2, 2)), equalities=((np.eye(3), 1.0),))


def test_gram_sdp_rejects_nonfinite_entries():
    bad = np.array([[np.nan]])
    with pytest.raises(ValueError):
        GramSDP(dim=1, objective=bad)


def test_gram_sdp_rejects_bad_index_map():
    with pytest.raises(ValueError):
        GramSDP(dim=2, objective=np.zeros((2, 2)), index_map={(0.1, 0): 0, (0.1, 1): 0})
    with pytest.raises(ValueError):
        GramSDP(dim=2, objective=np.zeros((2, 2)), index_map={(0.1, 0): 0})


def test_svec_round_trip_and_inner_products():
    rng = np.random.default_rng(7)
    for dim in (1, 2, 5, 8):
        a = rng.standard_normal((dim, dim))
        a = (a + a.T) / 2.0
        b = rng.standard_normal((dim, dim))
        b = (b + b.T) / 2.0
        assert np.allclose(unsvec(svec(a), dim), a, atol=1e-14)
        assert svec(a) @ svec(b) == pytest.approx(float(np.sum(a * b)), rel=1e-12)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def test_solve_scalar_box():
    report = solve(scalar_box_problem())
    assert report.status == "optimal"
    assert report.optimum == pytest.approx(0.3, abs=1e-9)
    assert report.gram[0, 0] == pytest.approx(0.3, abs=1e-7)


def test_solve_cauchy_schwarz_saturation():
    report = solve(cauchy_schwarz_problem())
    assert report.status == "optimal"
    assert report.optimum == pytest.approx(1.0, abs=1e-8)
    assert report.gram[0, 1] == pytest.approx(1.0, abs=1e-6)


def test_solve_detects_infeasible():
    prob = GramSDP(
        dim=1,
        objective=np.array([[1.0]]),
        inequalities=((np.array([[1.0]]), -1.0),),
    )
    report = solve(prob)
    assert report.status == "infeasible"


def test_solve_bounds_instance_dominates_honest_rate():
    loss_db, m = 30.0, 4
    noise = NoiseParams(e_mis=0.02, p_dark=1e-8)
    ch = noise.at_loss(loss_db)
    cfg = ProtocolConfig(m_phases=m, mu=0.06, decoys=(0.01,))
    stats = observe(cfg.mu, cfg.test_intensities, ch)
    report = solve(build_sdp_same(stats, cfg))
    assert report.status == "optimal"
    p_branch = stats.p_succ * stats.p_same_given_succ
    true_rate = sum(
        poisson_pmf(n, cfg.mu) * exact_yield(n, ch) for n in range(0, 41, 2)
    ) / (2.0 * p_branch)
    assert report.optimum >= true_rate
    assert report.optimum <= 1.0 + 1e-8


def test_solve_report_invariants_on_optimal():
    prob = honest_instance(30.0, 4)
    report = solve(prob)
    assert report.status == "optimal"
    assert np.linalg.eigvalsh(report.gram).min() >= -1e-8
    for mat, rhs in prob.equalities:
        assert float(np.sum(mat * report.gram)) == pytest.approx(rhs, abs=1e-8)
    for mat, bound in prob.inequalities:
        assert float(np.sum(mat * report.gram)) <= bound + 1e-8
    cert = report.dual_certificate
    assert len(cert.eq_multipliers) == len(prob.equalities)
    assert len(cert.ineq_multipliers) == len(prob.inequalities)
    assert np.all(cert.ineq_multipliers >= 0.0)


@pytest.mark.parametrize("scale", [0.5, 3.0])
def test_objective_scaling_scales_optimum(scale):
    base = honest_instance(30.0, 4)
    scaled = GramSDP(
        dim=base.dim,
        objective=scale * base.objective,
        equalities=base.equalities,
        inequalities=base.inequalities,
        index_map=base.index_map,
    )
    opt0 = solve(base).optimum
    opt1 = solve(scaled).optimum
    assert opt1 == pytest.approx(scale * opt0, rel=1e-9)


# ---------------------------------------------------------------------------
# verify_dual
# ---------------------------------------------------------------------------


def test_verify_dual_scalar_certificate():
    prob = scalar_box_problem()
    report = solve(prob)
    assert verify_dual(prob, report.dual_certificate) == pytest.approx(0.3, abs=1e-9)


def test_verify_dual_rejects_flipped_multiplier():
    prob = scalar_box_problem()
    report = solve(prob)
    cert = report.dual_certificate
    tampered = type(cert)(
        eq_multipliers=cert.eq_multipliers,
        ineq_multipliers=-cert.ineq_multipliers,
    )
    with pytest.raises(CertificateError):
        verify_dual(prob, tampered)


def test_verify_dual_rejects_non_psd_slack():
    prob = cauchy_schwarz_problem()
    report = solve(prob)
    cert = report.dual_certificate
    tampered = type(cert)(
        eq_multipliers=np.array([0.1, 0.1]),
        ineq_multipliers=cert.ineq_multipliers,
    )
    with pytest.raises(CertificateError):
        verify_dual(prob, tampered)


def test_verify_dual_rejects_wrong_shapes():
    prob = scalar_box_problem()
    report = solve(prob)
    cert = report.dual_certificate
    with pytest.raises((CertificateError, ValueError)):
        verify_dual(
            prob,
            type(cert)(
                eq_multipliers=np.array([1.0]),
                ineq_multipliers=cert.ineq_multipliers,
            ),
        )


def test_verify_dual_matches_primal_on_bounds_instance():
    prob = honest_instance(30.0, 8)
    report = solve(prob)
    assert report.status == "optimal"
    bound = verify_dual(prob, report.dual_certificate)
    assert bound == pytest.approx(report.optimum, abs=1e-6)


@pytest.mark.parametrize(
    "prob_factory",
    [
        scalar_box_problem,
        cauchy_schwarz_problem,
        lambda: honest_instance(10.0, 4),
        lambda: honest_instance(30.0, 4),
        lambda: honest_instance(30.0, 8),
        lambda: honest_instance(50.0, 4),
    ],
)
def test_weak_duality_for_every_solved_instance(prob_factory):
    prob = prob_factory()
    report = solve(prob)
    assert report.status == "optimal"
    assert verify_dual(prob, report.dual_certificate) >= report.optimum - 1e-9


def test_random_feasible_points_never_beat_optimum():
    loss_db, m = 30.0, 4
    noise = NoiseParams(e_mis=0.02, p_dark=1e-8)
    ch = noise.at_loss(loss_db)
    cfg = ProtocolConfig(m_phases=m, mu=0.06, decoys=(0.01,))
    stats = observe(cfg.mu, cfg.test_intensities, ch)
    prob = build_sdp_same(stats, cfg)
    report = solve(prob)
    assert report.status == "optimal"

    def feasible(gram, eq_tol, ineq_tol):
        if np.linalg.eigvalsh(gram).min() < 0.0:
            return False
        for mat, rhs in prob.equalities:
            if abs(float(np.sum(mat * gram)) - rhs) > eq_tol:
                return False
        return all(
            float(np.sum(mat * gram)) <= bound + ineq_tol
            for mat, bound in prob.inequalities
        )

    # strictly feasible anchor: the physically true diagonal of lumped yields
    # (equalities hold by the decoy identity; everything else by honesty)
    anchor_diag = np.zeros(prob.dim)
    for (beta, n), row in prob.index_map.items():
        weight = mod_m_weights(m, beta).weights[n]
        lumped = sum(
            poisson_pmf(m * l + n, beta) * exact_yield(m * l + n, ch) for l in range(40)
        )
        anchor_diag[row] = lumped / weight
    anchor = np.diag(anchor_diag)
    assert feasible(anchor, eq_tol=1e-10, ineq_tol=0.0)
    assert anchor_diag.min() > 0.0

    # clip solver roundoff so the other mixture endpoint is exactly PSD
    eigvals, eigvecs = np.linalg.eigh(report.gram)
    optimal = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
    optimal = (optimal + optimal.T) / 2.0
    assert feasible(optimal, eq_tol=5e-8, ineq_tol=1e-9)

    eq_mats = [mat for mat, _ in prob.equalities]
    eq_gram = np.array([[float(np.sum(a * b)) for b in eq_mats] for a in eq_mats])
    rng = np.random.default_rng(20260815)
    accepted = 0
    values = []
    for _ in range(1000):
        # random point on the anchor-optimum segment (feasible by convexity),
        # plus a random equality-preserving wiggle scaled into the inequalities
        sigma = rng.uniform(0.0, 0.9)
        base = (1.0 - sigma) * anchor + sigma * optimal
        raw = rng.standard_normal((prob.dim, prob.dim))
        direction = (raw + raw.T) / 2.0
        coeffs = np.linalg.solve(
            eq_gram, np.array([float(np.sum(a * direction)) for a in eq_mats])
        )
        for mat, c in zip(eq_mats, coeffs):
            direction = direction - c * mat
        direction /= np.linalg.norm(direction)
        step = 1e-9
        for _ in range(25):
            trial = base + step * direction
            if feasible(trial, eq_tol=1e-7, ineq_tol=1e-10):
                accepted += 1
                value = float(np.sum(prob.objective * trial))
                values.append(value)
                assert value <= report.optimum + 1e-6
                break
            step /= 2.0
    assert accepted == 1000
    # the segment spans from the honest value up to the optimum, so the
    # sampler genuinely explores the feasible objective range
    assert max(values) - min(values) > 0.01


# ---------------------------------------------------------------------------
# JSON dump/load
# ---------------------------------------------------------------------------


def test_problem_json_round_trip():
    prob = honest_instance(30.0, 4)
    text = problem_to_json(prob)
    payload = json.loads(text)
    assert payload["dim"] == prob.dim
    assert len(payload["equalities"]) == len(prob.equalities)
    assert len(payload["inequalities"]) == len(prob.inequalities)
    back = problem_from_json(text)
    assert back.dim == prob.dim
    assert back.index_map == prob.index_map
    assert np.array_equal(back.objective, prob.objective)
    for (a0, b0), (a1, b1) in zip(prob.equalities, back.equalities):
        assert np.array_equal(a0, a1) and b0 == b1
    for (a0, u0), (a1, u1) in zip(prob.inequalities, back.inequalities):
        assert np.array_equal(a0, a1) and u0 == u1
    assert back.content_digest() == prob.content_digest()
    assert solve(back).optimum == pytest.approx(solve(prob).optimum, abs=1e-9)


def test_content_digest_distinguishes_problems():
    a = scalar_box_problem(0.3)
    b = scalar_box_problem(0.31)
    assert a.content_digest() != b.content_digest()
    assert a.content_digest() == scalar_box_problem(0.3).content_digest()


def test_solve_is_deterministic():
    prob = honest_instance(30.0, 4)
    r1 = solve(prob)
    r2 = solve(prob)
    assert r1.optimum == r2.optimum
    assert np.array_equal(r1.gram, r2.gram)
