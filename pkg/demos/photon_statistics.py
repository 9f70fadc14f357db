"""Photon-number statistics behind discrete phase randomization.

Randomizing the global phase over M discrete values lumps the emitted
coherent state into M mixture components, one per photon-number residue
mod M.  This demo prints the residue weights, shows how close neighbouring
lumped states are (their pairwise fidelity), and evaluates the even/odd
parity split that the key mode works with.

Run: python3 demos/photon_statistics.py
"""

from tfqkd import fidelity, mod_m_weights, parity_coeffs, poisson_pmf


def main() -> None:
    beta = 0.06

    print(f"Poisson photon-number distribution at per-arm intensity {beta}")
    print("(both arms together radiate mean photon number 2*beta)")
    for n in range(5):
        print(f"  P(n={n}) = {poisson_pmf(n, beta):.6e}")
    print()

    for m in (4, 8):
        w = mod_m_weights(m, beta).weights
        print(f"residue weights mod M={m} at intensity {beta}:")
        print("  " + "  ".join(f"w_{n}={w[n]:.3e}" for n in range(m)))
        print(f"  sum = {w.sum():.15f}")
    print()

    print("fidelity of the residue-0 lumped states for two nearby intensities")
    print("(high fidelity means the test mode can barely distinguish them,")
    print(" which is what makes the yield constraints powerful):")
    for b1, b2 in ((0.06, 0.05), (0.06, 0.02), (0.06, 0.005)):
        f0 = fidelity(0, 8, b1, b2)
        print(f"  M=8, intensities ({b1}, {b2}): F = {f0:.12f}")
    print()

    mu = 0.06
    coeffs = parity_coeffs(4, mu)
    print(f"even/odd parity split of the key-mode pair at mu={mu} (M=4):")
    print(f"  |even|^2 = {coeffs.even_norm_sq:.12f}")
    print(f"  |odd|^2  = {coeffs.odd_norm_sq:.12f}")
    print(f"  sum      = {coeffs.even_norm_sq + coeffs.odd_norm_sq:.12f}")


if __name__ == "__main__":
    main()
