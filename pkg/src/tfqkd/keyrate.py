"""Secret-key rates, intensity optimization, and rate-vs-loss sweeps.

The rate per pulse is p_succ * [1 - leak - f*h(e_bit)]: what remains of each
successful round after subtracting the adversary's certified information and
the error-correction spend.  Intensities (mu, beta_1) are optimized by a
log-spaced grid search with local refinement — every rate evaluation embeds
two conic solves, so the search prunes candidates whose error-correction-only
rate cap already falls below the incumbent.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import (
    DEFAULT_F,
    DEFAULT_N_CUT,
    INTENSITY_FLOOR,
    BoundComputation,
    PhaseErrorBounds,
    ProtocolConfig,
    bound_phase_errors,
    eph_bound_infinite_M,
    information_leak,
)
from .channel import NoiseParams, ObservedStats, exact_yield, key_mode_stats, observe
from .states import _check_m, binary_entropy

INFINITE_PHASES = math.inf  # marker for the unlimited-phase-randomization benchmark

COARSE_POINTS = 25  # coarse grid points per intensity axis
REFINE_POINTS = 5  # refined grid points per axis
REFINE_ROUNDS = 2
REFINE_SHRINK = 5.0  # each refinement round shrinks the log-range by this factor
_LOG_SPAN = math.log10(1.0 / INTENSITY_FLOOR)  # decades covered by the coarse grid


@dataclass(frozen=True, eq=False)
class KeyRatePoint:
    """One evaluated (loss, phase count) operating point.

    m_phases is an even integer or INFINITE_PHASES.  certified is True only
    when every phase-error bound behind the rate passed its independent
    audit (the unlimited-phase benchmark is closed-form and counts as
    certified).  diagnostics is empty on clean points; artifacts carries the
    solved programs and certificates when they were requested and exist.
    """

    loss_db: float
    eta: float
    m_phases: float
    mu_opt: float
    beta1_opt: float
    e_ph_same: float
    e_ph_diff: float
    e_bit: float
    p_succ: float
    rate: float
    certified: bool
    diagnostics: str = ""
    artifacts: BoundComputation | None = None

    def __post_init__(self) -> None:
        if self.rate < 0.0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")
        if self.mu_opt < INTENSITY_FLOOR or self.beta1_opt < INTENSITY_FLOOR:
            raise ValueError(
                f"intensities must respect the {INTENSITY_FLOOR} floor, "
                f"got mu={self.mu_opt}, beta1={self.beta1_opt}"
            )


def key_rate(stats: ObservedStats, leak: float, f: float) -> float:
    """Secret-key rate per pulse given the adversary-information term.

    max(0, p_succ * (1 - leak - f*h(e_bit))): each successful round yields one
    sifted bit, minus Eve's information, minus the error-correction spend.
    """
    if stats.p_succ <= 0.0:
        return 0.0
    return max(0.0, stats.p_succ * (1.0 - leak - f * binary_entropy(stats.e_bit)))


def plob_bound(eta: float) -> float:
    """Repeaterless secret-key capacity -log2(1 - eta) of a pure-loss channel."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(
            f"transmittance must lie in [0, 1) — the bound diverges at 1 — got {eta}"
        )
    return -math.log2(1.0 - eta)


def _check_phase_count(m_phases) -> None:
    if isinstance(m_phases, float) and math.isinf(m_phases) and m_phases > 0:
        return
    _check_m(m_phases)


def _evaluate(
    loss_db: float,
    m_phases: float,
    mu: float,
    beta1: float,
    noise: NoiseParams,
    f: float,
    keep_artifacts: bool,
) -> KeyRatePoint:
    """Full pipeline for one intensity pair: observe, bound, combine."""
    ch = noise.at_loss(loss_db)
    if mu < INTENSITY_FLOOR or beta1 < INTENSITY_FLOOR:
        raise ValueError(
            f"intensities must be >= {INTENSITY_FLOOR}, got mu={mu}, beta1={beta1}"
        )
    cfg = None
    if not math.isinf(m_phases):
        cfg = ProtocolConfig(m_phases=int(m_phases), mu=mu, decoys=(beta1,), f=f)
    stats = observe(mu, (beta1, mu), ch)
    if stats.degenerate or stats.p_succ <= 0.0:
        return KeyRatePoint(
            loss_db=loss_db,
            eta=ch.eta,
            m_phases=m_phases,
            mu_opt=mu,
            beta1_opt=beta1,
            e_ph_same=1.0,
            e_ph_diff=1.0,
            e_bit=stats.e_bit,
            p_succ=0.0,
            rate=0.0,
            certified=False,
            diagnostics="degenerate statistics: zero success probability",
        )

    artifacts = None
    diagnostics = ""
    if cfg is not None:
        computation = bound_phase_errors(stats, cfg)
        bounds = computation.bounds
        if keep_artifacts:
            artifacts = computation
        if not bounds.certified:
            diagnostics = (
                "uncertified phase-error bounds (solver statuses: "
                f"{computation.report_same.status}, {computation.report_diff.status})"
            )
    else:
        yields = [exact_yield(n, ch) for n in range(DEFAULT_N_CUT + 1)]
        e_same = eph_bound_infinite_M(yields, mu, stats.p_succ * stats.p_same_given_succ)
        e_diff = eph_bound_infinite_M(yields, mu, stats.p_succ * stats.p_diff_given_succ)
        bounds = PhaseErrorBounds(
            e_ph_same=min(e_same, 1.0), e_ph_diff=min(e_diff, 1.0), certified=True
        )
    leak = information_leak(bounds, stats.p_same_given_succ, stats.p_diff_given_succ)
    return KeyRatePoint(
        loss_db=loss_db,
        eta=ch.eta,
        m_phases=m_phases,
        mu_opt=mu,
        beta1_opt=beta1,
        e_ph_same=bounds.e_ph_same,
        e_ph_diff=bounds.e_ph_diff,
        e_bit=stats.e_bit,
        p_succ=stats.p_succ,
        rate=key_rate(stats, leak, f),
        certified=bounds.certified,
        diagnostics=diagnostics,
        artifacts=artifacts,
    )


def _rate_cap(mu: float, ch, f: float) -> float:
    """Rate with zero adversary information: an upper bound used for pruning.

    leak >= 0 always, so no intensity pair sharing this mu can beat
    p_succ * (1 - f*h(e_bit)); candidates capped below the incumbent are
    skipped without solving their programs.
    """
    km = key_mode_stats(mu, ch)
    if km.p_succ <= 0.0:
        return 0.0
    return max(0.0, km.p_succ * (1.0 - f * binary_entropy(km.e_bit)))


def _window(center: float, half_decades: float, n_points: int) -> np.ndarray:
    lo = max(INTENSITY_FLOOR, center * 10.0**-half_decades)
    hi = min(1.0, center * 10.0**half_decades)
    return np.geomspace(lo, hi, n_points)


def optimize_point(
    loss_db: float,
    m_phases: float,
    fixed: tuple[float, float] | None = None,
    noise: NoiseParams | None = None,
    f: float = DEFAULT_F,
) -> KeyRatePoint:
    """Best key-rate point at one loss, optimizing (mu, beta1) unless fixed.

    The search runs a 25x25 log-spaced coarse grid over [1e-4, 1] followed by
    two 5x5 refinement rounds whose log-window shrinks by a factor 5 per
    round around the incumbent; exact rate ties break toward the smaller
    (mu, beta1).  The unlimited-phase benchmark optimizes mu only, with
    beta1 pinned at the floor (its bound does not involve a decoy).
    """
    if loss_db < 0:
        raise ValueError(f"loss must be >= 0 dB, got {loss_db}")
    _check_phase_count(m_phases)
    if noise is None:
        noise = NoiseParams()
    if fixed is not None:
        mu, beta1 = fixed
        return _evaluate(loss_db, m_phases, float(mu), float(beta1), noise, f, True)

    ch = noise.at_loss(loss_db)
    infinite = math.isinf(m_phases)
    best_rate = -1.0
    best_pair: tuple[float, float] | None = None

    def run_grid(mu_axis, beta_axis) -> None:
        nonlocal best_rate, best_pair
        candidates = []
        for mu in mu_axis:
            cap = _rate_cap(float(mu), ch, f)
            for beta1 in beta_axis:
                if not infinite and mu == beta1:
                    continue
                candidates.append((cap, float(mu), float(beta1)))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        for cap, mu, beta1 in candidates:
            if cap <= best_rate or cap == 0.0:
                continue
            point = _evaluate(loss_db, m_phases, mu, beta1, noise, f, False)
            if point.rate > best_rate or (
                point.rate == best_rate
                and best_pair is not None
                and (mu, beta1) < best_pair
            ):
                best_rate = point.rate
                best_pair = (mu, beta1)

    coarse = np.geomspace(INTENSITY_FLOOR, 1.0, COARSE_POINTS)
    pinned = np.array([INTENSITY_FLOOR])
    run_grid(coarse, pinned if infinite else coarse)
    for round_idx in range(1, REFINE_ROUNDS + 1):
        if best_pair is None:
            break
        half = _LOG_SPAN / (2.0 * REFINE_SHRINK**round_idx)
        mu_axis = _window(best_pair[0], half, REFINE_POINTS)
        beta_axis = pinned if infinite else _window(best_pair[1], half, REFINE_POINTS)
        run_grid(mu_axis, beta_axis)

    if best_pair is None:
        return KeyRatePoint(
            loss_db=loss_db,
            eta=ch.eta,
            m_phases=m_phases,
            mu_opt=INTENSITY_FLOOR,
            beta1_opt=INTENSITY_FLOOR,
            e_ph_same=1.0,
            e_ph_diff=1.0,
            e_bit=0.0,
            p_succ=0.0,
            rate=0.0,
            certified=False,
            diagnostics="every candidate intensity has zero rate even before leakage",
        )
    return _evaluate(loss_db, m_phases, best_pair[0], best_pair[1], noise, f, True)


def _sweep_task(args) -> KeyRatePoint:
    loss_db, m_phases, fixed, noise, f = args
    try:
        return optimize_point(loss_db, m_phases, fixed=fixed, noise=noise, f=f)
    except Exception as exc:  # record the failure, keep the sweep going
        return KeyRatePoint(
            loss_db=loss_db,
            eta=10.0 ** (-loss_db / 10.0),
            m_phases=m_phases,
            mu_opt=INTENSITY_FLOOR,
            beta1_opt=INTENSITY_FLOOR,
            e_ph_same=1.0,
            e_ph_diff=1.0,
            e_bit=0.0,
            p_succ=0.0,
            rate=0.0,
            certified=False,
            diagnostics=f"{type(exc).__name__}: {exc}",
        )


def sweep(
    loss_grid,
    m_list,
    noise: NoiseParams | None = None,
    f: float = DEFAULT_F,
    workers: int = 1,
    fixed: tuple[float, float] | None = None,
) -> list[KeyRatePoint]:
    """Evaluate every (loss, phase count) pair, optionally across processes.

    Per-point failures are recorded in the returned points' diagnostics
    rather than aborting the sweep.  Results are sorted by (loss, phase
    count) — the unlimited marker last — regardless of completion order.
    """
    if noise is None:
        noise = NoiseParams()
    losses = [float(loss) for loss in loss_grid]
    phase_counts = list(m_list)
    if not losses or not phase_counts:
        raise ValueError("loss grid and phase-count list must both be nonempty")
    for loss in losses:
        if loss < 0:
            raise ValueError(f"loss must be >= 0 dB, got {loss}")
    for m in phase_counts:
        _check_phase_count(m)
    tasks = [(loss, m, fixed, noise, f) for loss in losses for m in phase_counts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_sweep_task, tasks))
    else:
        points = [_sweep_task(task) for task in tasks]
    points.sort(key=lambda p: (p.loss_db, p.m_phases))
    return points
