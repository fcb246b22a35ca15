import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import load_automaton, load_system
from hopdr.automata import (
    minimal_sets,
    finite_language,
    parse_automaton,
    render_automaton,
    universe_membership,
)
from hopdr.errors import OrderUnsupported
from hopdr.generators import random_apds, random_automaton
from hopdr.saturation import (
    BaseRef,
    IdentifierGeneration,
    IdentRef,
    PushTriple,
    Ref,
    Saturation,
    minimal_masks,
    normalize_a0,
    normalize_with_specials,
    pre_star,
    sim_equal,
    substitute,
)
from hopdr.stores import Configuration, PopL, PushL, PushW, parse_configuration
from hopdr.systems import Apds, ApdsCommand, oracle_pre_star
from hopdr.universe import get_universe

GOLDEN = Path(__file__).parent / "golden"


def C(text, order=2):
    return parse_configuration(text, order)


def region(A, U, controls):
    return universe_membership(A, U, controls)


# -- normalisation ---------------------------------------------------------

def test_normalize_splits_initial_with_incoming_edge():
    A = parse_automaton(
        "order 2\nalphabet a\nlevel 1\nstate x final\nedge x a -> {x}\n"
        "level 2\nstate q\nstate f final\nedge q @x -> {f}\nedge f @x -> {q}\ntop\ninitial p=q\n")
    N = normalize_a0(A)
    q = N.initial("p")
    assert not any(q in tgt for _, _, tgt in N.top.edges)
    assert q not in N.top.finals


def test_normalize_preserves_membership():
    A = load_automaton("allops_a0.aut")
    N = normalize_a0(A)
    U = get_universe(2, A.alphabet, (3, 3))
    assert region(A, U, A.controls) == region(N, U, A.controls)


def test_normalize_adds_special_states():
    N, qeps, qstar = normalize_with_specials(load_automaton("allops_a0.aut"))
    assert qeps in N.top.finals and not any(src == qeps for src, _, _ in N.top.edges)
    assert qstar in N.top.finals
    [(_, lab, tgt)] = [e for e in N.top.edges if e[0] == qstar]
    assert tgt == {qstar}


def test_normalize_order_one_has_no_specials():
    A = parse_automaton("order 1\nalphabet a\nlevel 1\nstate q\nstate f final\nedge q a -> {f}\ntop\ninitial p=q\n")
    _, qeps, qstar = normalize_with_specials(A)
    assert qeps is None and qstar is None


# -- renumbering and generation equality -----------------------------------

def test_substitute_renumbers_matching_generation():
    assert substitute(IdentRef(1, "q", ("o",)), 2, 1) == IdentRef(2, "q", ("o",))


def test_substitute_leaves_other_generations():
    assert substitute(IdentRef(0, "q", ("o",)), 2, 1) == IdentRef(0, "q", ("o",))


def test_substitute_leaves_base_designators():
    assert substitute(Ref(BaseRef("b1")), 5, 4) == Ref(BaseRef("b1"))


def test_substitute_inside_push_triples_and_sets():
    S = frozenset({PushTriple("a", ("b",), IdentRef(1, "q", ("o",))), Ref(BaseRef("b2"))})
    assert substitute(S, 2, 1) == frozenset({PushTriple("a", ("b",), IdentRef(2, "q", ("o",))), Ref(BaseRef("b2"))})


def test_sim_equal_is_reflexive_on_allops_generations():
    _, tr = pre_star(load_system("allops_system.txt").apds(), load_automaton("allops_a0.aut"), trace=True)
    for g in tr.generations:
        assert sim_equal(g, g)


def test_sim_equal_detects_a_missing_element_set():
    a = IdentifierGeneration(1, {("q", frozenset({"o"})): frozenset({frozenset({Ref(BaseRef("b"))})})})
    b = IdentifierGeneration(2, {("q", frozenset({"o"})): frozenset()})
    assert not sim_equal(a, b)


def test_sim_equal_needs_equal_keys():
    a = IdentifierGeneration(1, {("q", frozenset({"o"})): frozenset()})
    b = IdentifierGeneration(2, {})
    assert not sim_equal(a, b)


@given(st.lists(st.integers(0, 2 ** 16 - 1), max_size=60))
def test_minimal_masks_agree_with_minimal_sets(masks):
    as_set = lambda m: frozenset(i for i in range(16) if m >> i & 1)
    assert {as_set(m) for m in minimal_masks(masks)} == minimal_sets(as_set(m) for m in masks)


# -- goldens ---------------------------------------------------------------

def test_allops_trace_golden():
    _, tr = pre_star(load_system("allops_system.txt").apds(), load_automaton("allops_a0.aut"), trace=True)
    assert tr.render() == (GOLDEN / "allops_trace.txt").read_text()
    assert tr.fixpoint_generation == 2


def test_allops_result_golden():
    A = pre_star(load_system("allops_system.txt").apds(), load_automaton("allops_a0.aut"))
    assert render_automaton(A) == (GOLDEN / "allops_prestar.aut").read_text()


@pytest.mark.parametrize("case", range(1, 6))
def test_worked_cases_golden(case):
    system = "branch_undef_system.txt" if case == 5 else "branch_system.txt"
    A = pre_star(load_system(system).apds(), load_automaton(f"branch_case{case}.aut"))
    assert render_automaton(A) == (GOLDEN / f"branch_case{case}_prestar.aut").read_text()


def test_allops_self_loop_on_the_pop_edge():
    A = pre_star(load_system("allops_system.txt").apds(), load_automaton("allops_a0.aut"))
    lvl1 = A.level(1)
    loops = [(src, a) for src, a, tgt in lvl1.edges if tgt == {src} and src.startswith("g")]
    assert loops


# -- behaviour -------------------------------------------------------------

def test_no_commands_gives_the_targets_back():
    A0 = load_automaton("allops_a0.aut")
    sys_ = Apds(2, A0.controls, ("a", "b"), ())
    A = pre_star(sys_, A0)
    U = get_universe(2, ("a", "b"), (3, 3))
    assert region(A, U, A0.controls) == region(A0, U, A0.controls)


def test_order_three_is_unsupported():
    sys_ = Apds(3, ("p",), ("a",), ())
    A0 = finite_language(3, ("a",), ("p",), [])
    with pytest.raises(OrderUnsupported):
        pre_star(sys_, A0)


def test_order_mismatch_rejected():
    with pytest.raises(ValueError):
        pre_star(Apds(1, ("p",), ("a",), ()), load_automaton("allops_a0.aut"))


def test_engine_requires_order_two():
    A0 = finite_language(1, ("a",), ("p",), [])
    with pytest.raises(ValueError):
        Saturation(Apds(1, ("p",), ("a",), ()), A0)


def test_undefined_target_reached_by_pop():
    sf = load_system("tiny_system.txt")
    A = pre_star(sf.apds(), load_automaton("tiny_targets.aut"))
    assert A.accepts_config("q", C("q [[b]]").store)
    assert A.accepts_config("p", C("p [[a]]").store)
    assert not A.accepts_config("p", C("p [[b]]").store)


def test_order_one_alternating_saturation():
    cmd = ApdsCommand("p", "a", frozenset({(PushW(("b",)), "q"), (PushW(()), "r")}))
    sys_ = Apds(1, ("p", "q", "r"), ("a", "b"), (cmd,))
    target = finite_language(1, ("a", "b"), ("p", "q", "r"), [C("q [b b]", 1), C("r [b]", 1)])
    A = pre_star(sys_, target)
    assert A.accepts_config("p", C("p [a b]", 1).store)
    assert not A.accepts_config("p", C("p [a a]", 1).store)


def test_order_one_systems_reject_higher_operations():
    with pytest.raises(ValueError):
        Apds(1, ("p",), ("a",), (ApdsCommand("p", "a", frozenset({(PushL(2), "p")})),))


def _seeded(seed):
    rng = random.Random(seed)
    sys_ = random_apds(rng, max_symbols=2)
    A0 = random_automaton(rng, 2, sys_.alphabet, sys_.controls, states_per_level=2, edges_per_level=3)
    return sys_, A0


@pytest.mark.parametrize("seed", range(25))
def test_matches_the_bounded_oracle(seed):
    sys_, A0 = _seeded(seed)
    U = get_universe(2, sys_.alphabet, (2, 2))
    res = oracle_pre_star(sys_, A0, U)
    m = region(pre_star(sys_, A0), U, sys_.controls).mask
    assert ((m == res.low.mask) | res.undetermined).all()
    assert not (res.low.mask & ~m).any() and not (m & ~res.high.mask).any()


@pytest.mark.parametrize("seed", range(10))
def test_result_contains_the_targets(seed):
    sys_, A0 = _seeded(100 + seed)
    U = get_universe(2, sys_.alphabet, (2, 2))
    m0 = region(A0, U, sys_.controls)
    m = region(pre_star(sys_, A0), U, sys_.controls)
    assert not (m0.mask & ~m.mask).any()
    assert not (m0.nabla & ~m.nabla).any()


@pytest.mark.parametrize("seed", range(10))
def test_intermediate_automata_grow(seed):
    sys_, A0 = _seeded(200 + seed)
    _, tr = pre_star(sys_, A0, trace=True)
    counts = tr.level1_edge_counts
    assert counts == sorted(counts)
    for before, after in zip(tr.skeletons, tr.skeletons[1:]):
        assert {(s, t) for s, _, t in before} <= {(s, t) for s, _, t in after}


def test_push_then_pop_round_trip_is_found():
    cmds = (
        ApdsCommand("p", "a", frozenset({(PushL(2), "q")})),
        ApdsCommand("q", "a", frozenset({(PopL(2), "r")})),
    )
    sys_ = Apds(2, ("p", "q", "r"), ("a",), cmds)
    target = finite_language(2, ("a",), ("p", "q", "r"), [C("r [[a]]")])
    A = pre_star(sys_, target)
    assert A.accepts_config("p", C("p [[a]]").store)
    assert A.accepts_config("q", C("q [[a][a]]").store)
    assert not A.accepts_config("q", C("q [[a]]").store)


def test_result_is_deterministic_text():
    sys_, A0 = _seeded(3)
    assert render_automaton(pre_star(sys_, A0)) == render_automaton(pre_star(sys_, A0))


def test_configuration_type_used_by_members():
    A = pre_star(load_system("allops_system.txt").apds(), load_automaton("allops_a0.aut"))
    U = get_universe(2, ("a", "b"), (2, 2))
    for c in region(A, U, A.controls).configurations():
        assert isinstance(c, Configuration)
