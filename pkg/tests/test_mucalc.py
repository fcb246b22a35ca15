import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_path, load_automaton, load_system
from hopdr.applications.games import ABELARD, ELOISE
from hopdr.applications.mucalc import (
    FALSE,
    TRUE,
    And,
    Box,
    Dia,
    Mu,
    Not,
    NProp,
    Nu,
    Or,
    Prop,
    Var,
    check_alternation_free,
    closure,
    free_vars,
    mu_check,
    mu_game,
    mu_oracle,
    negate,
    parse_formula,
    pnf,
    render_formula,
    size,
)
from hopdr.automata import complement, universe_membership, without_nabla
from hopdr.errors import MissingBottomSymbol, NotAllMu, NotAlternationFree, NotMonotone, ParseError
from hopdr.generators import random_formula, random_pds
from hopdr.stores import parse_configuration
from hopdr.systems import Pds
from hopdr.universe import get_universe


def C(text):
    return parse_configuration(text, 2)


def fixture():
    sf = load_system("mu_system.txt")
    return sf.pds(), sf.labels, {"X": load_automaton("mu_valuation.aut")}


def formula(name):
    return parse_formula(fixture_path(name).read_text())


# -- syntax ----------------------------------------------------------------

def test_parse_and_render_round_trip():
    text = "(mu Y (or (prop rho) (dia Y)))"
    assert render_formula(parse_formula(text)) == text


def test_parse_nary_or_folds_left():
    assert parse_formula("(or (prop a) (prop b) (prop c))") == Or(Or(Prop("a"), Prop("b")), Prop("c"))


@pytest.mark.parametrize("text", ["(or (prop a))", "(mu X", "(frob X)", "(prop a) x", "(mu nu X)", "[x]", "prop"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_formula(text)


def test_pnf_pushes_negation_into_a_disjunction():
    f = Not(Or(Prop("pi"), Not(Prop("pi'"))))
    assert pnf(f) == And(NProp("pi"), Prop("pi'"))


def test_pnf_dualizes_modalities_and_fixpoints():
    f = parse_formula("(not (mu X (or (prop a) (dia X))))")
    assert pnf(f) == Nu("X", And(NProp("a"), Box(Var("X"))))


@settings(max_examples=100)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_pnf_is_idempotent(seed, depth):
    f = pnf(random_formula(random.Random(seed), depth))
    assert pnf(f) == f


def test_pnf_keeps_negated_propositions():
    assert pnf(NProp("a")) == NProp("a")
    assert pnf(Not(NProp("a"))) == Prop("a")


def test_pnf_rejects_odd_negation_of_bound_variable():
    with pytest.raises(NotMonotone):
        pnf(parse_formula("(mu X (not X))"))


def test_pnf_renames_repeated_binders():
    f = pnf(parse_formula("(and (mu X (dia X)) (mu X (box X)))"))
    binders = [g.var for g in (f.left, f.right)]
    assert len(set(binders)) == 2


def test_negate_is_an_involution():
    f = pnf(parse_formula("(mu X (or (prop a) (and (box X) (dia (prop b)))))"))
    assert negate(negate(f)) == f


def test_closure_of_reachability():
    f = Mu("X", Or(Prop("pi"), Dia(Var("X"))))
    assert closure(f) == {f, Or(Prop("pi"), Dia(f)), Prop("pi"), Dia(f)}


@settings(max_examples=60)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_closure_is_no_larger_than_the_formula(seed, depth):
    f = pnf(random_formula(random.Random(seed), depth))
    assert len(closure(f)) <= size(f)


def test_alternation_check_rejects_dependent_nu():
    with pytest.raises(NotAlternationFree):
        check_alternation_free(Mu("X", Nu("Y", And(Var("X"), Var("Y")))))


def test_alternation_check_accepts_independent_nu():
    check_alternation_free(Mu("X", Or(Var("X"), Nu("Y", And(Prop("a"), Box(Var("Y")))))))


def test_free_vars():
    assert free_vars(parse_formula("(or X (mu Y (and Y Z)))")) == {"X", "Z"}


# -- product game ----------------------------------------------------------

def test_game_for_a_proposition_has_no_moves():
    sys_, labels, _ = fixture()
    mg = mu_game(sys_, labels, {}, Prop("pi"))
    assert mg.game.pds.commands == ()
    assert mg.game.target.accepts_config(mg.names[("p1", Prop("pi"))], C("p1 [[a _bot]]").store)
    assert not mg.game.target.accepts_config(mg.names[("p2", Prop("pi"))], C("p2 [[a _bot]]").store)


def test_disjunction_node_is_eloise_with_one_push_per_symbol_and_branch():
    sys_, labels, _ = fixture()
    f = Or(Prop("pi"), Prop("rho"))
    mg = mu_game(sys_, labels, {}, f)
    here = mg.names[("p1", f)]
    cmds = [c for c in mg.game.pds.commands if c.control == here]
    assert mg.game.owners[here] == ELOISE
    assert len(cmds) == 2 * len(sys_.alphabet)
    assert all(c.op.word == (c.symbol,) for c in cmds)


def test_box_node_is_abelard_with_one_command_per_move():
    sys_, labels, _ = fixture()
    f = Box(Prop("rho"))
    mg = mu_game(sys_, labels, {}, f)
    here = mg.names[("p1", f)]
    assert mg.game.owners[here] == ABELARD
    assert len([c for c in mg.game.pds.commands if c.control == here]) == \
        len([c for c in sys_.commands if c.control == "p1"])


def test_game_rejects_greatest_fixpoints():
    sys_, labels, _ = fixture()
    with pytest.raises(NotAllMu):
        mu_game(sys_, labels, {}, Nu("X", Var("X")))


def test_game_needs_a_bottom_symbol():
    with pytest.raises(MissingBottomSymbol):
        mu_game(Pds(2, ("p",), ("a",), ()), {}, {}, Prop("pi"))


# -- model checking --------------------------------------------------------

def holds(A, text):
    c = C(text)
    return A.accepts_config(c.control, c.store)


@pytest.mark.parametrize("text,expected", [
    ("p3 [[_bot]]", True),
    ("p1 [[a _bot]]", True),   # p2 [[b a _bot]], push2, then pop2 to p3
    ("p2 [[a _bot]]", True),
    ("p2 [[_bot]]", False),
    ("p1 [[_bot]]", False),
])
def test_eventually_rho(text, expected):
    sys_, labels, val = fixture()
    assert holds(mu_check(sys_, labels, val, formula("mu_ef.txt")), text) == expected


@pytest.mark.parametrize("text,expected", [
    ("p2 [[_bot]]", True),
    ("p1 [[_bot]]", True),
    ("p3 [[a _bot]]", False),
    ("p1 [[a _bot]]", False),
])
def test_always_not_rho(text, expected):
    sys_, labels, val = fixture()
    assert holds(mu_check(sys_, labels, val, formula("mu_ag.txt")), text) == expected


@pytest.mark.parametrize("text,expected", [
    ("p2 [[_bot]]", True),
    ("p1 [[b _bot]]", True),
    ("p1 [[a _bot]]", False),
    ("p3 [[a _bot]]", False),
])
def test_free_variable_read_from_valuation(text, expected):
    sys_, labels, val = fixture()
    assert holds(mu_check(sys_, labels, val, formula("mu_free.txt")), text) == expected


def test_normal_form_input_gives_the_same_region():
    sys_, labels, val = fixture()
    f = formula("mu_ag.txt")
    U = get_universe(2, sys_.alphabet, (3, 3), sys_.bottom)
    a = universe_membership(mu_check(sys_, labels, val, f), U, sys_.controls)
    b = universe_membership(mu_check(sys_, labels, val, pnf(f)), U, sys_.controls)
    assert a == b


def test_missing_valuation_rejected():
    sys_, labels, _ = fixture()
    with pytest.raises(ValueError):
        mu_check(sys_, labels, {}, Var("X"))


def test_nu_true_holds_everywhere():
    sys_, labels, val = fixture()
    U = get_universe(2, sys_.alphabet, (2, 2), sys_.bottom)
    A = mu_check(sys_, labels, val, Nu("X", TRUE))
    assert universe_membership(A, U, sys_.controls).mask.all()


def test_false_holds_nowhere():
    sys_, labels, val = fixture()
    U = get_universe(2, sys_.alphabet, (2, 2), sys_.bottom)
    assert not universe_membership(mu_check(sys_, labels, val, FALSE), U, sys_.controls).mask.any()


def test_nu_root_is_complement_of_its_negation():
    sys_, labels, val = fixture()
    f = pnf(formula("mu_ag.txt"))
    U = get_universe(2, sys_.alphabet, (3, 3), sys_.bottom)
    direct = universe_membership(mu_check(sys_, labels, val, f), U, sys_.controls)
    via = universe_membership(without_nabla(complement(mu_check(sys_, labels, val, negate(f)))), U, sys_.controls)
    assert direct == via


def test_nested_nu_under_mu():
    sys_, labels, val = fixture()
    f = parse_formula("(mu Y (or (nu Z (and (not (prop rho)) (box Z))) (dia Y)))")
    U = get_universe(2, sys_.alphabet, (3, 3), sys_.bottom)
    got = universe_membership(mu_check(sys_, labels, val, f), U, sys_.controls).mask
    res = mu_oracle(sys_, labels, val, f, U)
    assert ((got == res.low.mask) | res.undetermined).all()


@pytest.mark.parametrize("seed", range(6))
def test_random_formulas_match_the_oracle(seed):
    rng = random.Random(seed)
    pds = random_pds(rng, bottom=True, max_symbols=2, min_commands=3)
    labels = {p: frozenset(x for x in ("pi", "rho") if rng.random() < 0.5) for p in pds.controls}
    f = random_formula(rng, 2)
    U = get_universe(2, pds.alphabet, (2, 2), pds.bottom)
    got = universe_membership(mu_check(pds, labels, {}, f), U, pds.controls).mask
    res = mu_oracle(pds, labels, {}, f, U)
    assert ((got == res.low.mask) | res.undetermined).all()
    assert not (res.low.mask & ~got).any() and not (got & ~res.high.mask).any()
