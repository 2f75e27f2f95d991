"""
Residue classes of a long parity-like count
===========================================

Fix some positions of a random bit string and count the ones among the
positions of ``I`` modulo ``m``.  Once enough positions of ``I`` stay free,
every remainder has conditional measure close to ``1/m``, no matter what
was fixed.
"""

from fractions import Fraction

from klbet import ModuloSet, Restriction, interval, measure_modulo_given_restriction, xi_approx

# forty positions, counted modulo 4
I = interval(1, 40)
m = 4

# fix the first eight positions to ones: 32 free positions remain
r = Restriction({p: 1 for p in range(1, 9)})
for o in range(m):
    x = measure_modulo_given_restriction(ModuloSet(I, m, o), r)
    print(o, x, float(x))

# with u = 32 free positions the guaranteed closeness is m / sqrt(u) = 0.707...
# so every class is 3/4-approximately 1/m; in fact they are much closer
ok = all(
    xi_approx(measure_modulo_given_restriction(ModuloSet(I, m, o), r), Fraction(1, m), Fraction(3, 4))
    for o in range(m)
)
print("3/4-approximately 1/m:", ok)

# with only two free positions the classes are far from uniform
r2 = Restriction({p: 0 for p in range(1, 39)})
print([measure_modulo_given_restriction(ModuloSet(I, m, o), r2) for o in range(m)])
