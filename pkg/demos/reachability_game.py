"""Eloise's winning region of a small pushdown game, next to the explicit attractor."""

from pathlib import Path

from hopdr.applications.games import Prg, attractor_oracle, totalize, winning_region
from hopdr.automata import parse_automaton, universe_membership
from hopdr.systems import parse_system
from hopdr.universe import get_universe

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

sf = parse_system((FIXTURES / "game_system.txt").read_text())
game = totalize(Prg(sf.pds(), dict(sf.owners), parse_automaton((FIXTURES / "game_target.aut").read_text())))
region = winning_region(game)

universe = get_universe(2, sf.alphabet, (2, 2), sf.bottom)
symbolic = universe_membership(region, universe, game.pds.controls)
explicit = attractor_oracle(game, universe)
for j, p in enumerate(sf.controls):
    wins = [str(universe.store(i)) for i in range(len(universe)) if symbolic.mask[j, i]]
    print(f"{p} ({sf.owners[p]}): Eloise wins from {len(wins)} of {len(universe)} stores, e.g. {wins[:3]}")
same = (symbolic.mask == explicit.low.mask) | explicit.undetermined
print("matches the attractor wherever the bound decides:", bool(same.all()))
