"""Saturate a target automaton into Pre* and query it, checking against the bounded oracle."""

from pathlib import Path

from hopdr.automata import parse_automaton, render_automaton, universe_membership
from hopdr.saturation import pre_star
from hopdr.stores import parse_configuration
from hopdr.systems import oracle_pre_star, parse_system
from hopdr.universe import get_universe

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

system = parse_system((FIXTURES / "allops_system.txt").read_text()).apds()
targets = parse_automaton((FIXTURES / "allops_a0.aut").read_text())

result, trace = pre_star(system, targets, trace=True)
print(render_automaton(result))
print(f"fixed point at generation {trace.fixpoint_generation}, "
      f"{trace.frozen_iterations} rounds of frozen saturation")

for text in ["p1 [[a b][a]]", "p1 [[a][a b][a]]", "p2 [[a]]", "p1 [[b]]"]:
    c = parse_configuration(text, 2)
    print(f"{text:20} {'in' if result.accepts_config(c.control, c.store) else 'not in'} Pre*")

universe = get_universe(2, system.alphabet, (2, 2))
oracle = oracle_pre_star(system, targets, universe)
mine = universe_membership(result, universe, system.controls).mask
settled = ~oracle.undetermined
print(f"agreement with the oracle on {int(settled.sum())} settled configurations:",
      bool((mine[settled] == oracle.low.mask[settled]).all()))
