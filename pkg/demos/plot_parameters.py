"""
Parameters of the full-size chooser
===================================

For each ``k`` the chooser plays with ``m = 4**(k+4)`` remainders against
``n = 4 + log2 m`` strategies.  Its sets must add up to less than ``2**-k``
in measure.  The position count ``ell`` is far beyond anything a game can
touch, so only the arithmetic is checked here.
"""

from fractions import Fraction

from klbet import params_from_k

for k in range(6):
    p = params_from_k(k)
    total = (8 * p.n + 1) * Fraction(4, 3) / p.m
    print(f"k={k}: m={p.m} n={p.n} log2(ell)={p.ell.bit_length() - 1} "
          f"choices<={p.max_choices} total<={float(total):.3g} < 2^-k={2.0 ** -k:.3g}")
