"""Certified upper bounds on the two phase-error rates of the sifted key.

The test mode only reveals coarse statistics — the success gains of a handful
of intensity settings — so each phase-error rate is bounded by maximizing it
over every Gram matrix of adversary post-measurement states consistent with
those gains.  This module assembles the two semidefinite programs (one per
sifted branch: equal-phase and opposite-phase), evaluates the
unlimited-phase-count benchmark that follows from the Cauchy-Schwarz
inequality, and folds the certified bounds into the adversary-information
term of the key-rate formula.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .channel import ObservedStats
from .sdp import CertificateError, GramSDP, SolveReport, solve, verify_dual
from .states import (
    MAX_TERMS,
    REL_TAIL,
    _check_m,
    binary_entropy,
    fidelity,
    fidelity_complement,
    mod_m_weights,
    parity_coeffs,
    poisson_pmf,
)

INTENSITY_FLOOR = 1e-4  # smallest intensity the protocol allows for mu and the decoys

DEFAULT_F = 1.16  # error-correction inefficiency assumed unless configured otherwise

DEFAULT_N_CUT = 40  # photon-number cutoff for the unlimited-phase benchmark


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol-side choices: phase count, intensities and error-correction cost."""

    m_phases: int
    mu: float
    decoys: tuple[float, ...]
    f: float = DEFAULT_F

    def __post_init__(self) -> None:
        _check_m(self.m_phases)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "decoys", tuple(float(b) for b in self.decoys))
        object.__setattr__(self, "f", float(self.f))
        if self.mu < INTENSITY_FLOOR:
            raise ValueError(f"signal intensity mu must be >= {INTENSITY_FLOOR}, got {self.mu}")
        if not self.decoys:
            raise ValueError("at least one decoy intensity is required")
        for b in self.decoys:
            if b < INTENSITY_FLOOR:
                raise ValueError(f"decoy intensity must be >= {INTENSITY_FLOOR}, got {b}")
        pool = self.decoys + (self.mu,)
        if len(set(pool)) != len(pool):
            raise ValueError(f"test intensities must be pairwise distinct, got {pool}")
        if self.f < 1.0:
            raise ValueError(f"error-correction inefficiency f must be >= 1, got {self.f}")

    @property
    def test_intensities(self) -> tuple[float, ...]:
        """Non-vacuum test-mode intensities, decoys first, signal last."""
        return self.decoys + (self.mu,)

    @property
    def n_intensities(self) -> int:
        """Number of distinct intensities including the implicit vacuum."""
        return len(self.decoys) + 2


@dataclass(frozen=True)
class PhaseErrorBounds:
    """Certified upper bounds for the equal-phase and opposite-phase branches.

    Values can exceed 1/2 (a vacuous bound); they are clamped to [0, 1] and
    the entropy combination caps its argument at 1/2.  certified is True only
    when both values passed the independent dual-certificate audit.
    """

    e_ph_same: float
    e_ph_diff: float
    certified: bool

    def __post_init__(self) -> None:
        for name in ("e_ph_same", "e_ph_diff"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
            object.__setattr__(self, name, value)


def _branch_probability(stats: ObservedStats, branch_weight: float, label: str) -> float:
    p_branch = stats.p_succ * branch_weight
    if p_branch <= 0.0:
        raise ValueError(
            f"{label} branch has zero success probability; its phase-error rate is undefined"
        )
    return p_branch


def _check_gain_keys(gains: dict[float, float], cfg: ProtocolConfig, label: str) -> None:
    expected = {0.0} | set(cfg.test_intensities)
    if set(gains) != expected:
        raise ValueError(
            f"{label} gain map keys {sorted(gains)} do not match the configured "
            f"intensities {sorted(expected)}"
        )


def _assemble(gains: dict[float, float], p_branch: float, cfg: ProtocolConfig) -> GramSDP:
    """Shared builder for both branches; only the gains and p_branch differ.

    Gram rows are the renormalized adversary states, one per (intensity,
    photon-number residue).  Constraint order: success-probability split,
    per-intensity gains, unit bounds on the signal-block yields, ordered-pair
    trace-distance limits, and the vacuum-anchored yield inequalities.
    """
    m = cfg.m_phases
    blocks = cfg.test_intensities
    dim = len(blocks) * m
    index_map = {(b, n): bi * m + n for bi, b in enumerate(blocks) for n in range(m)}

    parity = parity_coeffs(m, cfg.mu)
    v_even = np.zeros(dim)
    v_odd = np.zeros(dim)
    mu_base = index_map[(cfg.mu, 0)]
    v_even[mu_base : mu_base + m] = parity.even
    v_odd[mu_base : mu_base + m] = parity.odd
    objective = np.outer(v_even, v_even) / (2.0 * p_branch)

    equalities = [(0.5 * np.outer(v_even, v_even) + 0.5 * np.outer(v_odd, v_odd), p_branch)]
    for b in blocks:
        mat = np.zeros((dim, dim))
        weights = mod_m_weights(m, b).weights
        for n in range(m):
            row = index_map[(b, n)]
            mat[row, row] = weights[n]
        equalities.append((mat, gains[b]))

    inequalities = []
    for n in range(m):
        mat = np.zeros((dim, dim))
        row = index_map[(cfg.mu, n)]
        mat[row, row] = 1.0
        inequalities.append((mat, 1.0))
    for b1 in blocks:
        for b2 in blocks:
            if b1 == b2:
                continue
            for n in range(m):
                mat = np.zeros((dim, dim))
                mat[index_map[(b1, n)], index_map[(b1, n)]] = 1.0
                mat[index_map[(b2, n)], index_map[(b2, n)]] = -1.0
                inequalities.append((mat, math.sqrt(fidelity_complement(n, m, b1, b2))))
    q_vac = gains[0.0]
    for b in blocks:
        f0 = fidelity(0, m, b, 0.0)
        anchor = (
            1.0
            - q_vac
            + 2.0 * math.sqrt(max(f0 * (1.0 - f0) * (1.0 - q_vac) * q_vac, 0.0))
            + f0 * (2.0 * q_vac - 1.0)
        )
        mat = np.zeros((dim, dim))
        row = index_map[(b, 0)]
        mat[row, row] = 1.0
        inequalities.append((mat, anchor))

    return GramSDP(
        dim=dim,
        objective=objective,
        equalities=tuple(equalities),
        inequalities=tuple(inequalities),
        index_map=index_map,
    )


def build_sdp_same(stats: ObservedStats, cfg: ProtocolConfig) -> GramSDP:
    """Program whose maximum upper-bounds the equal-phase-branch phase-error rate."""
    _check_gain_keys(stats.q_same, cfg, "equal-phase")
    p_branch = _branch_probability(stats, stats.p_same_given_succ, "equal-phase")
    return _assemble(stats.q_same, p_branch, cfg)


def build_sdp_diff(stats: ObservedStats, cfg: ProtocolConfig) -> GramSDP:
    """Program whose maximum upper-bounds the opposite-phase-branch phase-error rate."""
    _check_gain_keys(stats.q_diff, cfg, "opposite-phase")
    p_branch = _branch_probability(stats, stats.p_diff_given_succ, "opposite-phase")
    return _assemble(stats.q_diff, p_branch, cfg)


def eph_bound_infinite_M(
    yields, mu: float, p_succ_branch: float, n_cut: int = DEFAULT_N_CUT
) -> float:
    """Phase-error bound in the limit of unlimited phase randomization.

    With full randomization the adversary interacts with exact photon-number
    states, and the Cauchy-Schwarz inequality bounds the branch phase-error
    rate by [sum_even sqrt(P(n|mu) Y_n)]^2 / (2 p_branch).  Yields beyond
    n_cut are bounded by 1; n_cut = 40 keeps that tail far below 1e-12 for
    the intensities the protocol allows.
    """
    if mu <= 0:
        raise ValueError(f"signal intensity must be > 0, got {mu}")
    if p_succ_branch <= 0:
        raise ValueError(f"branch success probability must be > 0, got {p_succ_branch}")
    ys = [float(y) for y in yields]
    if len(ys) < n_cut + 1:
        raise ValueError(f"need yields for photon numbers 0..{n_cut}, got {len(ys)} values")
    for n, y in enumerate(ys):
        if not 0.0 <= y <= 1.0:
            raise ValueError(f"yield for {n} photons must lie in [0, 1], got {y}")
    total = 0.0
    for n in range(0, n_cut + 1, 2):
        total += math.sqrt(poisson_pmf(n, mu) * ys[n])
    n = n_cut + 2 if n_cut % 2 == 0 else n_cut + 1
    while n < MAX_TERMS:
        term = math.sqrt(poisson_pmf(n, mu))
        total += term
        if term < REL_TAIL * total:
            break
        n += 2
    return total * total / (2.0 * p_succ_branch)


def information_leak(
    bounds: PhaseErrorBounds, p_same_given_succ: float, p_diff_given_succ: float
) -> float:
    """Adversary information per successful round, in bits.

    Branch-weighted binary entropy of the phase-error bounds; each entropy
    argument is capped at 1/2 because h is increasing only up to there and a
    vacuous bound beyond 1/2 cannot reveal more than everything.
    """
    return p_same_given_succ * binary_entropy(min(bounds.e_ph_same, 0.5)) + (
        p_diff_given_succ * binary_entropy(min(bounds.e_ph_diff, 0.5))
    )


@dataclass(frozen=True, eq=False)
class BoundComputation:
    """Phase-error bounds together with the programs and solver reports behind them."""

    bounds: PhaseErrorBounds
    problem_same: GramSDP
    report_same: SolveReport
    problem_diff: GramSDP
    report_diff: SolveReport


_SOLVE_CACHE: OrderedDict[bytes, SolveReport] = OrderedDict()
_SOLVE_CACHE_CAP = 4096


def _cached_solve(problem: GramSDP) -> SolveReport:
    """Solve with memoization on problem content.

    The two branches produce bit-identical programs whenever the observed
    statistics are symmetric (as they are for the honest channel), and the
    grid optimizer revisits intensity pairs, so caching on a content digest
    removes a large share of the conic solves.
    """
    key = problem.content_digest()
    hit = _SOLVE_CACHE.get(key)
    if hit is not None:
        _SOLVE_CACHE.move_to_end(key)
        return hit
    report = solve(problem)
    _SOLVE_CACHE[key] = report
    if len(_SOLVE_CACHE) > _SOLVE_CACHE_CAP:
        _SOLVE_CACHE.popitem(last=False)
    return report


def _certified_value(problem: GramSDP, report: SolveReport) -> tuple[float, bool]:
    """Clamped bound value plus whether its certificate passed the audit.

    When the certificate fails (or the program was infeasible) the bound
    falls back to the vacuous 1.0 and is marked uncertified — never a
    silently optimistic number.
    """
    if report.status == "infeasible":
        return 1.0, False
    try:
        value = verify_dual(problem, report.dual_certificate)
    except CertificateError:
        return 1.0, False
    return min(max(value, 0.0), 1.0), True


def bound_phase_errors(stats: ObservedStats, cfg: ProtocolConfig) -> BoundComputation:
    """Build, solve and certify both branch programs for one set of observations."""
    problem_same = build_sdp_same(stats, cfg)
    problem_diff = build_sdp_diff(stats, cfg)
    report_same = _cached_solve(problem_same)
    report_diff = _cached_solve(problem_diff)
    e_same, ok_same = _certified_value(problem_same, report_same)
    e_diff, ok_diff = _certified_value(problem_diff, report_diff)
    return BoundComputation(
        bounds=PhaseErrorBounds(
            e_ph_same=e_same, e_ph_diff=e_diff, certified=ok_same and ok_diff
        ),
        problem_same=problem_same,
        report_same=report_same,
        problem_diff=problem_diff,
        report_diff=report_diff,
    )
