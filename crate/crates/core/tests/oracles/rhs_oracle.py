"""Straight-line transcription of the mode equations, evaluated in 50-digit
arithmetic. Prints the seeded states and their derivatives as Rust literals.

    db/dt = (-i w_b - k_b) b - i g |m|^2
    da/dt = (i D_a - k_a) a - (G + i g_c) m
    dm/dt = (i D_m - k_m) m - (G + i g_c) a - i g (b + b*) m + W

Units: w_b = 1.
"""
import random
import mpmath as mp

mp.mp.dps = 50

P = dict(
    delta_a=1.0,
    delta_m=0.9,
    kappa_a=5.0982,
    kappa_m=0.049037,
    kappa_b=1.3135e-5,
    g_mb=8.6515e-10,
    j_am=1.3,
    g_coh=0.2,
    drive=8.9747e6,
)


def deriv(a, m, b, p):
    I = mp.mpc(0, 1)
    G = mp.mpf(p["j_am"]) + I * mp.mpf(p["g_coh"])
    g = mp.mpf(p["g_mb"])
    db = (-I - mp.mpf(p["kappa_b"])) * b - I * g * (m.conjugate() * m)
    da = (I * mp.mpf(p["delta_a"]) - mp.mpf(p["kappa_a"])) * a - G * m
    dm = (
        (I * mp.mpf(p["delta_m"]) - mp.mpf(p["kappa_m"])) * m
        - G * a
        - I * g * (b + b.conjugate()) * m
        + mp.mpf(p["drive"])
    )
    return da, dm, db


def c(z):
    return "c({!r}, {!r})".format(float(z.real), float(z.imag))


rng = random.Random(20240611)
for _ in range(4):
    a = complex(rng.uniform(-1e7, 1e7), rng.uniform(-1e7, 1e7))
    m = complex(rng.uniform(-5e8, 5e8), rng.uniform(-5e8, 5e8))
    b = complex(rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3))
    da, dm, db = deriv(mp.mpc(a), mp.mpc(m), mp.mpc(b), P)
    print(
        "    ([{}, {}, {}], [{}, {}, {}]),".format(
            c(mp.mpc(a)), c(mp.mpc(m)), c(mp.mpc(b)), c(da), c(dm), c(db)
        )
    )
