"""Independent oracle for the frozen pair-correlation constant.

For 2 <= q < r <= 500 and Delta_q = 1/(20 q), computes the exact measure of
A_q* ∩ A_r* by integer overlap counting, the bound term
phi(q) Delta_q phi(r) Delta_r exp(sum_{p | lcm(q,r), p > M} 1/p) with
M = 2 max(Delta_q, Delta_r) lcm(q, r), and reports the largest ratio, every
pair attaining it, and the best ratio among the remaining pairs.
"""
from fractions import Fraction
from math import gcd

from mpmath import mp, mpf, exp

mp.dps = 50
N = 20
R = 500


def primes_of(n):
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def phi(n):
    out = n
    for p in primes_of(n):
        out = out // p * (p - 1)
    return out


def overlap(q, r):
    # Scale by N q r: centres N r a and N q b, radii r and q.
    total = 0
    for a in range(1, q):
        if gcd(a, q) != 1:
            continue
        ca = N * r * a
        lo = (ca - q - r) // (N * q)
        hi = -((-(ca + q + r)) // (N * q))
        for b in range(lo, hi + 1):
            if b < 1 or b >= r or gcd(b, r) != 1:
                continue
            cb = N * q * b
            ov = min(ca + r, cb + q) - max(ca - r, cb - q)
            if ov > 0:
                total += ov
    return Fraction(total, N * q * r)


results = []
for q in range(2, R):
    for r in range(q + 1, R + 1):
        meas = overlap(q, r)
        if meas == 0:
            continue
        lcm = q * r // gcd(q, r)
        m = Fraction(2 * lcm, N * q)
        s = sum(Fraction(1, p) for p in primes_of(lcm) if p > m)
        pv = Fraction(phi(q) * phi(r), N * N * q * r) * exp(mpf(s.numerator) / s.denominator)
        ratio = mpf(meas.numerator) / meas.denominator / pv
        results.append((ratio, q, r, meas))

top = max(res[0] for res in results)
tied = [res for res in results if top - res[0] < mpf(10) ** -30]
rest = max(res[0] for res in results if top - res[0] >= mpf(10) ** -30)
for ratio, q, r, meas in tied:
    print(f"argmax q={q} r={r} exact_meas={meas.numerator}/{meas.denominator}")
print(f"ratio={mp.nstr(top, 40)}")
print(f"runner_up={mp.nstr(rest, 40)}")
