"""
A desk-scale game against the parity chaser
===========================================

The chooser works on ``m = 4``, ``phi = 256`` and the first 262 positions.
The parity chaser splits evenly on the positions of the current set and,
once a single position is left free, bets everything on the bit that
completes the chosen remainder.  The chooser answers with a new set
when enough of the gambler's capital has become slim.
"""

import json
from pathlib import Path

from klbet import ChooserParams, make_gambler, run_game

params = ChooserParams.from_json(json.loads((Path(__file__).parent / "desk_params.json").read_text()))
tr = run_game(params, make_gambler("parity-chaser"), 10_000)

# one line per chosen set
for e in tr.emissions:
    s = e["set"]
    print(f"set {e['index']} at turn {e['turn']}: |I| = {s['I_size']}, remainder {s['o']}, "
          f"measure {e['measure']}, earning {e['earn']}")

v = tr.verdict
print("turns:", len(tr.turns), " winner:", v["winner"])
print("total measure", v["chosen_measure_total"], "within", v["measure_budget"])
print("surviving part of the last set:", v["surviving_subset_measure"],
      ">= threshold", v["residue_threshold"], "->", v["residue_met"])
print("earning bound at the end holds:", v["kl_eta_final"]["holds"], "slack", v["kl_eta_final"]["slack"])
