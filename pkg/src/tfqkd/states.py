"""Photon-number statistics of discretely phase-randomised coherent pulse pairs.

A pulse pair with per-pair intensity ``beta`` on each side carries a total
Poisson photon number of mean ``2*beta``.  Randomising the common phase over
``M`` equally spaced values collapses the pair into mixtures of states labelled
by the photon number modulo M; everything downstream (gain decompositions,
fidelity bounds, parity decompositions of the key-mode states) reduces to the
three quantities computed here: the Poisson pmf, its mod-M lumped weights, and
the pairwise fidelity of the lumped states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

# Series controls: stop once the next term drops below REL_TAIL relative to the
# accumulated sum; MAX_TERMS guards pathological inputs.
REL_TAIL = 1e-18
MAX_TERMS = 10_000

# Direct factorial evaluation is exact and fast up to here; beyond, the log
# domain avoids overflow without changing results at double precision.
_LOG_DOMAIN_N = 20


def poisson_pmf(n: int, beta: float) -> float:
    """Probability of n total photons in a pair of intensity-beta pulses.

    The combined field is Poissonian with mean 2*beta.
    """
    if not isinstance(n, (int, np.integer)):
        raise ValueError(f"photon number must be an integer, got {n!r}")
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    if beta < 0:
        raise ValueError(f"intensity must be >= 0, got {beta}")
    if beta == 0.0:
        return 1.0 if n == 0 else 0.0
    lam = 2.0 * beta
    if n <= _LOG_DOMAIN_N:
        return math.exp(-lam) * lam**n / math.factorial(n)
    return math.exp(-lam + n * math.log(lam) - float(gammaln(n + 1)))


@dataclass(frozen=True)
class ModMWeights:
    """Weights of the photon-number residues mod M for one intensity.

    weights[n] = sum_l P(M*l + n | beta); the entries sum to 1.
    """

    m_phases: int
    intensity: float
    weights: np.ndarray


def _check_m(m_phases: int) -> None:
    """Protocol-level check: sifting on opposite phases needs an even count."""
    if not isinstance(m_phases, (int, np.integer)) or m_phases < 2 or m_phases % 2 != 0:
        raise ValueError(
            f"phase count must be an even integer >= 2 so that every phase has its "
            f"opposite (theta + pi) in the set; got {m_phases!r}"
        )


def _check_m_positive(m_phases: int) -> None:
    """Residue-arithmetic check: any positive modulus is meaningful."""
    if not isinstance(m_phases, (int, np.integer)) or m_phases < 1:
        raise ValueError(f"phase count must be a positive integer, got {m_phases!r}")


@lru_cache(maxsize=4096)
def _mod_weights_tuple(m_phases: int, beta: float) -> tuple[float, ...]:
    if beta == 0.0:
        return (1.0,) + (0.0,) * (m_phases - 1)
    w = [0.0] * m_phases
    total = 0.0
    mode = int(2.0 * beta) + 1
    for k in range(MAX_TERMS):
        p = poisson_pmf(k, beta)
        w[k % m_phases] += p
        total += p
        if k >= max(m_phases, mode) and p < REL_TAIL * total:
            break
    return tuple(w)


def mod_m_weights(m_phases: int, beta: float) -> ModMWeights:
    """Lumped Poisson weights per photon-number residue mod M."""
    _check_m_positive(m_phases)
    if beta < 0:
        raise ValueError(f"intensity must be >= 0, got {beta}")
    w = np.array(_mod_weights_tuple(m_phases, float(beta)))
    return ModMWeights(m_phases=int(m_phases), intensity=float(beta), weights=w)


@lru_cache(maxsize=65536)
def _fidelity_pair(n: int, m_phases: int, beta1: float, beta2: float) -> tuple[float, float]:
    """(F, 1-F) between the residue-n lumped states of two intensities.

    1-F is accumulated directly in Hellinger form, h = 0.5*sum (sqrt(w1_l) -
    sqrt(w2_l))^2 over the conditional weights, so it stays accurate when the
    states nearly coincide (1 - F = h*(2 - h) has no cancellation).
    """
    if beta1 == 0.0 or beta2 == 0.0:
        if n != 0:
            # a vacuum pulse pair has no population on nonzero residues
            raise ValueError(
                f"residue {n} undefined against vacuum; only residue 0 exists at intensity 0"
            )
        if beta1 == beta2 == 0.0:
            return 1.0, 0.0
        b = beta1 if beta1 > 0.0 else beta2
        w = _mod_weights_tuple(m_phases, b)[0]
        frac = poisson_pmf(0, b) / w
        return frac, max(1.0 - frac, 0.0)
    w1 = _mod_weights_tuple(m_phases, beta1)[n]
    w2 = _mod_weights_tuple(m_phases, beta2)[n]
    amp = 0.0
    h = 0.0
    mode = max(2.0 * beta1, 2.0 * beta2)
    for l in range(MAX_TERMS):
        k = m_phases * l + n
        c1 = poisson_pmf(k, beta1) / w1
        c2 = poisson_pmf(k, beta2) / w2
        amp += math.sqrt(c1 * c2)
        h += 0.5 * (math.sqrt(c1) - math.sqrt(c2)) ** 2
        if k > mode and c1 < REL_TAIL and c2 < REL_TAIL:
            break
    f = min(amp * amp, 1.0)
    return f, max(h * (2.0 - h), 0.0)


def fidelity(n: int, m_phases: int, beta1: float, beta2: float) -> float:
    """Fidelity between the residue-n states of intensities beta1 and beta2.

    F = [sum_l sqrt(P(Ml+n|b1) P(Ml+n|b2) / (w_n(b1) w_n(b2)))]^2, symmetric in
    the two intensities and equal to 1 when they coincide.
    """
    _check_m_positive(m_phases)
    if not isinstance(n, (int, np.integer)) or not 0 <= n < m_phases:
        raise ValueError(f"residue must satisfy 0 <= n < {m_phases}, got {n!r}")
    if beta1 < 0 or beta2 < 0:
        raise ValueError("intensities must be >= 0")
    return _fidelity_pair(int(n), int(m_phases), float(beta1), float(beta2))[0]


def fidelity_complement(n: int, m_phases: int, beta1: float, beta2: float) -> float:
    """1 - fidelity, computed without cancellation (used for sqrt(1-F) bounds)."""
    _check_m_positive(m_phases)
    if not isinstance(n, (int, np.integer)) or not 0 <= n < m_phases:
        raise ValueError(f"residue must satisfy 0 <= n < {m_phases}, got {n!r}")
    if beta1 < 0 or beta2 < 0:
        raise ValueError("intensities must be >= 0")
    return _fidelity_pair(int(n), int(m_phases), float(beta1), float(beta2))[1]


@dataclass(frozen=True)
class ParityCoeffVectors:
    """Even/odd-parity coefficient vectors of the phase-locked signal pair.

    even[n] = sqrt(w_n) on even residues (0 elsewhere), odd[n] likewise on odd
    residues; their squared norms are the even/odd Poisson parity weights
    (1 + e^{-4 mu})/2 and (1 - e^{-4 mu})/2.
    """

    m_phases: int
    intensity: float
    even: np.ndarray
    odd: np.ndarray

    @property
    def even_norm_sq(self) -> float:
        return float(self.even @ self.even)

    @property
    def odd_norm_sq(self) -> float:
        return float(self.odd @ self.odd)


def parity_coeffs(m_phases: int, mu: float) -> ParityCoeffVectors:
    """Coefficients of the key-mode pair state on the mod-M residue basis, split by parity."""
    _check_m(m_phases)
    if mu <= 0:
        raise ValueError(f"signal intensity must be > 0, got {mu}")
    w = _mod_weights_tuple(m_phases, float(mu))
    even = np.zeros(m_phases)
    odd = np.zeros(m_phases)
    for n in range(m_phases):
        if n % 2 == 0:
            even[n] = math.sqrt(w[n])
        else:
            odd[n] = math.sqrt(w[n])
    return ParityCoeffVectors(m_phases=int(m_phases), intensity=float(mu), even=even, odd=odd)


def binary_entropy(x: float) -> float:
    """Shannon binary entropy h(x) in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)
