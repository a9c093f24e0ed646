"""High-precision reference values for the recovery constants.

Writes crates/core/tests/data/constants_grid.csv: a 50-point (delta, q)
grid with rho/C0/C1 for the general and n <= 4s l1 regimes, rho_q, q0 and
the lq constants, all evaluated with mpmath at 60 significant digits.
Empty fields mark points outside a regime's domain.
"""

import csv
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/data/constants_grid.csv"

T_GENERAL = (77 - mp.sqrt(1337)) / 82
T_SPECIAL = 4 * mp.sqrt(2) - 5


def c1_from(d, c0):
    return 2 / mp.sqrt(1 - d) * (1 + c0 / mp.sqrt(2))


def general(d):
    if not d < T_GENERAL:
        return None
    rho = mp.sqrt(4 * (1 + 5 * d - 4 * d**2) / ((1 - d) * (32 - 25 * d)))
    c0 = 4 / (1 - rho) * mp.sqrt(2 * (2 - d) / ((1 - d) * (32 - 25 * d)))
    return rho, c0, c1_from(d, c0)


def special(d):
    if not d < T_SPECIAL:
        return None
    rho = mp.sqrt((1 + d) ** 2 / (8 * (1 - d)))
    c0 = mp.sqrt(2) / ((1 - rho) * mp.sqrt(1 - d))
    return rho, c0, c1_from(d, c0)


def rho_q(d, q):
    pen = q / mp.power(2, 2 / q) * mp.power((2 - q) / (2 - d), 2 / q - 1)
    return mp.sqrt((d + pen) / (1 - d))


def q_zero(d):
    if rho_q(d, mp.mpf(1)) < 1:
        return mp.mpf(1)
    # rho_q increases in q on (0, 1]; bracket the crossing
    return mp.findroot(lambda q: rho_q(d, q) - 1, (mp.mpf("1e-6"), mp.mpf(1)), solver="anderson")


def lq(d, q):
    if not d < mp.mpf(1) / 2:
        return None
    q0 = q_zero(d)
    ok = rho_q(d, q) < 1 if q0 >= 1 else q < q0
    if not ok:
        return None
    rho = rho_q(d, q)
    inner = ((2 - d) * mp.power(2 - q, (2 - q) / q) * q + mp.power(2, 2 / q) * d) / (1 - d)
    c0 = mp.power(2, 1 / q - 1) / mp.power(1 - mp.power(rho, q), 1 / q) * mp.sqrt(inner)
    return c0, c1_from(d, c0)


def s(x):
    return "" if x is None else mp.nstr(x, 25, min_fixed=-1, max_fixed=-1)


def main():
    deltas = [mp.mpf(i) * mp.mpf("0.048") for i in range(10)]  # 0 .. 0.432
    qs = [mp.mpf(x) for x in ("0.1", "0.3", "0.5", "0.8", "1")]
    rows = []
    for d in deltas:
        for q in qs:
            g = general(d)
            sp = special(d)
            l = lq(d, q)
            q0 = q_zero(d)
            rows.append([
                s(d), s(q),
                *(s(v) for v in (g or (None,) * 3)),
                *(s(v) for v in (sp or (None,) * 3)),
                s(rho_q(d, q)), s(q0),
                *(s(v) for v in (l or (None,) * 2)),
            ])
    with OUT.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta", "q", "rho_general", "c0_general", "c1_general",
                    "rho_special", "c0_special", "c1_special", "rho_q", "q0", "c0_q", "c1_q"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
