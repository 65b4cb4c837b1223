# Independent oracle computations for the geometry tests.
# Uses only bisection + high-precision quadrature on F(r) = 1 - 2M/r + r^2/l^2,
# never the closed-form tortoise map, so frozen values are implementation-independent.
import mpmath as mp

mp.mp.dps = 50


def F(r, M, l):
    return 1 - 2 * M / r + r**2 / l**2


def horizon(M, l):
    # bisection: F < 0 at small r>0, F > 0 at large r
    lo, hi = mp.mpf("1e-12"), mp.mpf(10) * (M + l)
    assert F(lo, M, l) < 0 and F(hi, M, l) > 0
    for _ in range(400):
        mid = (lo + hi) / 2
        if F(mid, M, l) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def kappa(M, l):
    rh = horizon(M, l)
    return (2 * M / rh**2 + 2 * rh / l**2) / 2


def x_of_r_quad(r, M, l):
    # x(r) = -int_r^inf dr'/F(r'), normalized so x -> 0 at the conformal boundary
    return -mp.quad(lambda s: 1 / F(s, M, l), [r, mp.inf])


def report(M, l):
    M, l = mp.mpf(M), mp.mpf(l)
    rh = horizon(M, l)
    k = kappa(M, l)
    print(f"M={M} l={l}")
    print("  r_h   =", mp.nstr(rh, 22))
    print("  kappa =", mp.nstr(k, 22))
    print("  alpha1=", mp.nstr(1 / (2 * k), 22))
    C = l**2 * (3 * rh**2 + 2 * l**2) / ((3 * rh**2 + l**2) * mp.sqrt(3 * rh**2 + 4 * l**2))
    print("  C     =", mp.nstr(C, 22))
    for r in [rh * mp.mpf("1.01"), 2 * rh, 5 * rh, 20 * rh]:
        print(f"  x(r={mp.nstr(r,8)}) =", mp.nstr(x_of_r_quad(r, M, l), 22))


report(1, 1)
report(2, 1.5)
report(1, 4)  # 2ml small regime geometry (m enters elsewhere)
# difference oracle example for quad test
M, l = mp.mpf(1), mp.mpf(1)
d = mp.quad(lambda s: 1 / F(s, M, l), [2, 5])
print("int_2^5 dr/F (M=l=1) =", mp.nstr(d, 22))
