"""Check a few alternation-free formulas on a labelled system."""

from pathlib import Path

from hopdr.applications.mucalc import mu_check, parse_formula
from hopdr.automata import parse_automaton
from hopdr.stores import parse_configuration
from hopdr.systems import parse_system

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

sf = parse_system((FIXTURES / "mu_system.txt").read_text())
valuation = {"X": parse_automaton((FIXTURES / "mu_valuation.aut").read_text())}
formulas = {
    "eventually rho": "(mu Y (or (prop rho) (dia Y)))",
    "never rho": "(nu Z (and (not (prop rho)) (box Z)))",
    "X or a pi-path": "(or X (mu Y (and (prop pi) (dia Y))))",
}
configs = ["p1 [[a _bot]]", "p1 [[_bot]]", "p2 [[_bot]]", "p3 [[a _bot]]"]
regions = {name: mu_check(sf.pds(), sf.labels, valuation, parse_formula(text)) for name, text in formulas.items()}

print(f"{'':16}" + "".join(f"{name:>18}" for name in formulas))
for text in configs:
    c = parse_configuration(text, 2)
    row = "".join(f"{str(A.accepts_config(c.control, c.store)):>18}" for A in regions.values())
    print(f"{text:16}{row}")
