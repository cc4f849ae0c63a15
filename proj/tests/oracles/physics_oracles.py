"""High-precision reference values for the physics-core unit tests.

Run with `python3 physics_oracles.py`; the printed values are frozen into
tests/unit/test_physics.cpp and tests/unit/test_simulator.cpp.
"""
from mpmath import mp, mpf, mpc, pi, sqrt, binomial, rf, factorial

mp.dps = 40

HBAR = mpf("1.054571817e-34")

# Standard-model column of the reference parameter table.
KAPPA0 = mpf(860)
KAPPA_EXT = mpf(6770)
KAPPA_TLS = mpf(3950)
A_C = mpf("1.414")
BETA = mpf("0.3")
F0 = mpf("4.11e9")


def tls_rate(amp):
    return KAPPA_TLS / (1 + (amp / A_C) ** 2) ** BETA


def taylor(order):
    # Σ c_n |a|^(n-1) = π [κ0 + κext + κTLS (1 + |a|²/a_c²)^(-β)]
    out = []
    for n in range(1, order + 1):
        if n % 2 == 0:
            out.append(mpf(0))
            continue
        m = (n - 1) // 2
        coef = binomial(-BETA, m) * pi * KAPPA_TLS / A_C ** (2 * m)
        if m == 0:
            coef += pi * (KAPPA0 + KAPPA_EXT)
        out.append(coef)
    return out


def photon_number(z0, zr, ql, qc, p_in, fr):
    return (z0 / zr) * (ql ** 2 / qc) * 2 * p_in / (HBAR * (2 * pi * fr) ** 2)


def drive_for_photons(n):
    total = KAPPA0 + KAPPA_EXT + KAPPA_TLS
    return sqrt(n) * pi * total / sqrt(2 * pi * KAPPA_EXT)


def linear_transmission(detuning_hz):
    total = KAPPA0 + KAPPA_EXT + KAPPA_TLS
    return 1 - 2 * pi * KAPPA_EXT / (mpc(0, 2 * pi * detuning_hz) + pi * total)


if __name__ == "__main__":
    print("tls_rate(10) =", mp.nstr(tls_rate(mpf(10)), 20))
    for i, c in enumerate(taylor(7), start=1):
        print(f"c_{i} =", mp.nstr(c, 20))
    n = photon_number(mpf(50), mpf(50), mpf("3e5"), mpf("6e5"), mpf("1e-15"), F0)
    print("photon_number =", mp.nstr(n, 20))
    print("drive_for_photons(1e3) =", mp.nstr(drive_for_photons(mpf(1000)), 20))
    s = linear_transmission(mpf(50))
    print("S(+50 Hz) =", mp.nstr(s.real, 20), mp.nstr(s.imag, 20))
