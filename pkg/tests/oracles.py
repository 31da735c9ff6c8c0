"""Reference values computed independently of the package.

High-precision mpmath arithmetic, hand-written elimination and brute-force
scans. Nothing here imports omx.
"""
import mpmath as mp

mp.mp.dps = 40

TWO_PI = 2 * mp.pi
GAMMA_M = TWO_PI * 20e3
KAPPA = TWO_PI * 30e6
OMEGA_M = TWO_PI * 101e6


def coupling_for(c, gamma=GAMMA_M, kappa=KAPPA):
    return mp.sqrt(c * gamma * kappa) / 2


def resonant_steady_state(c1, c2, eta1, eta2, s_in=1, gamma=GAMMA_M, kappa1=KAPPA, kappa2=KAPPA):
    """Hand elimination of the resonant steady state.

    0 = -k1/2 a1 - i G1 b + sqrt(ke1) s
    0 = -k2/2 a2 - i G2 b
    0 = -g/2 b - i (G1 a1 + G2 a2)
    """
    g1 = coupling_for(c1, gamma, kappa1)
    g2 = coupling_for(c2, gamma, kappa2)
    ke1 = eta1 * kappa1
    # a1 = (2/k1)(sqrt(ke1) s - i G1 b), a2 = -(2i/k2) G2 b
    # -g/2 b - i G1 (2/k1) sqrt(ke1) s - (2 G1^2/k1) b - (2 G2^2/k2) b = 0
    denom = gamma / 2 + 2 * g1**2 / kappa1 + 2 * g2**2 / kappa2
    b = -1j * g1 * (2 / kappa1) * mp.sqrt(ke1) * s_in / denom
    a1 = (2 / kappa1) * (mp.sqrt(ke1) * s_in - 1j * g1 * b)
    a2 = -(2j / kappa2) * g2 * b
    return a1, a2, b


def resonant_efficiency(c1, c2, eta1, eta2):
    a1, a2, b = resonant_steady_state(c1, c2, eta1, eta2)
    return abs(mp.sqrt(eta2 * KAPPA) * a2) ** 2


def brute_force_argmax_c1(c2, eta=1.0, c_max=20.0, step=1e-3):
    best, arg = -1.0, 0.0
    n = int(round(c_max / step))
    for i in range(n + 1):
        c1 = i * step
        v = eta * eta * 4 * c1 * c2 / (1 + c1 + c2) ** 2
        if v > best:
            best, arg = v, c1
    return arg
