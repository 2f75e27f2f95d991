"""
Savings turn an all-in doubler into a conservative strategy
===========================================================

A strategy that keeps betting everything on zeros reaches capital ``2**d``
on one branch and drops to zero right after.  Banking half of every win
that lifts the playing capital past 2 keeps the rest of the path close to
the best capital seen so far.
"""

from klbet import BettingStrategy, capital_report, check_conservative, with_savings

B = BettingStrategy.initial()
for d in range(6):
    s = "0" * d
    B = B.define_bet(s, d + 1, B.node(s).mass, 0)

S = with_savings(B)

# capital and running maximum along the winning branch and just off it
print("node      c    cbar | savings c   cbar")
orig, sav = capital_report(B), capital_report(S)
for d in range(7):
    for s in ("0" * d, "0" * (d - 1) + "1" if d else None):
        if s is None:
            continue
        c, cb = orig[s]
        c2, cb2 = sav[s]
        print(f"{s or '(root)':8} {str(c):>4} {str(cb):>6} | {str(c2):>9} {str(cb2):>6}")

print("original conservative:", check_conservative(B))
print("savings conservative: ", check_conservative(S))
