"""Honest-channel simulation: the observables a benign middle node would report.

Charlie sits at the midpoint, so each arm transmits with amplitude factor
eta^{1/4}; his 50:50 beamsplitter routes constructive light to detector C and
destructive light to detector D.  Misalignment leaks a fraction e_mis of each
port's intensity into the other, and both threshold detectors fire spuriously
with probability p_dark.  A round succeeds when exactly one detector clicks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ChannelParams:
    """Channel and detector parameters for one loss point."""

    eta: float
    e_mis: float = 0.02
    p_dark: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"transmittance eta must lie in (0, 1], got {self.eta}")
        if not 0.0 <= self.e_mis <= 0.5:
            raise ValueError(f"misalignment rate must lie in [0, 0.5], got {self.e_mis}")
        if not 0.0 <= self.p_dark < 1.0:
            raise ValueError(f"dark-count probability must lie in [0, 1), got {self.p_dark}")


@dataclass(frozen=True)
class NoiseParams:
    """Channel parameters without the transmittance, for loss sweeps."""

    e_mis: float = 0.02
    p_dark: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 <= self.e_mis <= 0.5:
            raise ValueError(f"misalignment rate must lie in [0, 0.5], got {self.e_mis}")
        if not 0.0 <= self.p_dark < 1.0:
            raise ValueError(f"dark-count probability must lie in [0, 1), got {self.p_dark}")

    def at_loss(self, loss_db: float) -> ChannelParams:
        if loss_db < 0:
            raise ValueError(f"loss must be >= 0 dB, got {loss_db}")
        return ChannelParams(eta=10.0 ** (-loss_db / 10.0), e_mis=self.e_mis, p_dark=self.p_dark)


@dataclass(frozen=True)
class KeyModeStats:
    """Key-mode success statistics; degenerate marks p_succ = 0 rounds."""

    p_succ: float
    p_same_given_succ: float
    p_diff_given_succ: float
    e_bit: float
    degenerate: bool = False


@dataclass(frozen=True)
class ObservedStats:
    """Everything the protocol measures: key-mode statistics plus test-mode gains.

    q_same[beta] and q_diff[beta] are the success probabilities when both users
    send intensity beta with equal / opposite phases; both maps share the same
    key set (the test intensities plus vacuum).
    """

    p_succ: float
    p_same_given_succ: float
    p_diff_given_succ: float
    e_bit: float
    q_same: dict[float, float]
    q_diff: dict[float, float]
    degenerate: bool = False


def click_probabilities(
    alpha_a: complex, alpha_b: complex, ch: ChannelParams
) -> tuple[float, float]:
    """Probabilities that only detector C / only detector D clicks.

    Amplitudes are the source amplitudes; each arm scales them by eta^{1/4}.
    """
    scale = ch.eta**0.25
    aa = scale * alpha_a
    ab = scale * alpha_b
    i_c = abs(aa + ab) ** 2 / 2.0
    i_d = abs(aa - ab) ** 2 / 2.0
    # misalignment mixes the port intensities
    ic_eff = (1.0 - ch.e_mis) * i_c + ch.e_mis * i_d
    id_eff = (1.0 - ch.e_mis) * i_d + ch.e_mis * i_c
    # click probability 1 - (1-p_dark) e^{-I}, written via expm1 so the
    # dark-count floor survives when I is tiny (no 1 - (1 - small) cancellation)
    p_c = ch.p_dark - (1.0 - ch.p_dark) * math.expm1(-ic_eff)
    p_d = ch.p_dark - (1.0 - ch.p_dark) * math.expm1(-id_eff)
    return p_c * (1.0 - p_d), p_d * (1.0 - p_c)


def key_mode_stats(mu: float, ch: ChannelParams) -> KeyModeStats:
    """Success rate, branch split and bit-error rate of the key mode.

    Averages over the four equiprobable sign pairs (+-sqrt(mu), +-sqrt(mu)).
    An error is a D-only click on equal signs or a C-only click on opposite
    signs (Bob flips his bit on D clicks during sifting).
    """
    if mu <= 0:
        raise ValueError(f"signal intensity must be > 0, got {mu}")
    amp = math.sqrt(mu)
    total = same = err = 0.0
    for sign_a in (1.0, -1.0):
        for sign_b in (1.0, -1.0):
            p_c, p_d = click_probabilities(sign_a * amp, sign_b * amp, ch)
            total += 0.25 * (p_c + p_d)
            if sign_a == sign_b:
                same += 0.25 * (p_c + p_d)
                err += 0.25 * p_d
            else:
                err += 0.25 * p_c
    if total <= 0.0:
        return KeyModeStats(0.0, 0.5, 0.5, 0.0, degenerate=True)
    return KeyModeStats(
        p_succ=total,
        p_same_given_succ=same / total,
        p_diff_given_succ=1.0 - same / total,
        e_bit=err / total,
    )


def test_mode_gains(beta: float, ch: ChannelParams) -> tuple[float, float]:
    """Success probabilities for equal-phase and opposite-phase test pairs.

    Phase-independent by symmetry of the model, so evaluated at phase 0.
    """
    if beta < 0:
        raise ValueError(f"intensity must be >= 0, got {beta}")
    amp = math.sqrt(beta)
    p_c, p_d = click_probabilities(amp, amp, ch)
    q_same = p_c + p_d
    p_c, p_d = click_probabilities(amp, -amp, ch)
    q_diff = p_c + p_d
    return q_same, q_diff


def exact_yield(n: int, ch: ChannelParams) -> float:
    """Click yield of the n-photon symmetric test state.

    Each photon independently reaches the correct port with probability
    q = sqrt(eta)(1 - e_mis), the wrong port with r = sqrt(eta) e_mis, and is
    lost otherwise; exactly-one-detector outcomes are summed in closed form.
    The opposite-phase state has the same yield by port symmetry.
    """
    if not isinstance(n, int) or n < 0:
        raise ValueError(f"photon number must be an integer >= 0, got {n!r}")
    root_eta = math.sqrt(ch.eta)
    q = root_eta * (1.0 - ch.e_mis)
    r = root_eta * ch.e_mis
    nd = 1.0 - ch.p_dark
    pow_lost = (1.0 - root_eta) ** n
    # (1-x)^n - nd*(1-eta^.5)^n regrouped as [(1-x)^n - (1-eta^.5)^n] +
    # p_dark*(1-eta^.5)^n, so the dark-count floor is added, not recovered by
    # subtracting near-equal terms; at n = 0 this is exactly 2 p_dark (1-p_dark)
    only_d = nd * (((1.0 - r) ** n - pow_lost) + ch.p_dark * pow_lost)
    only_c = nd * (((1.0 - q) ** n - pow_lost) + ch.p_dark * pow_lost)
    return only_c + only_d


def observe(mu: float, test_intensities: tuple[float, ...], ch: ChannelParams) -> ObservedStats:
    """Assemble the full observable record for one channel configuration.

    test_intensities are the non-vacuum test settings; vacuum is always added.
    """
    km = key_mode_stats(mu, ch)
    q_same: dict[float, float] = {}
    q_diff: dict[float, float] = {}
    for beta in (0.0,) + tuple(float(b) for b in test_intensities):
        qs, qd = test_mode_gains(beta, ch)
        q_same[beta] = qs
        q_diff[beta] = qd
    return ObservedStats(
        p_succ=km.p_succ,
        p_same_given_succ=km.p_same_given_succ,
        p_diff_given_succ=km.p_diff_given_succ,
        e_bit=km.e_bit,
        q_same=q_same,
        q_diff=q_diff,
        degenerate=km.degenerate,
    )
