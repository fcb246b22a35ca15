import random

import pytest

from conftest import load_automaton, load_system
from hopdr.applications.games import (
    ABELARD,
    ELOISE,
    Prg,
    attractor_oracle,
    game_to_apds,
    totalize,
    winning_region,
)
from hopdr.automata import universal_automaton, universe_membership, with_controls
from hopdr.errors import MissingBottomSymbol
from hopdr.generators import random_automaton, random_pds
from hopdr.stores import parse_configuration
from hopdr.systems import Pds
from hopdr.universe import get_universe


def C(text):
    return parse_configuration(text, 2)


def fixture_game():
    sf = load_system("game_system.txt")
    return Prg(sf.pds(), dict(sf.owners), load_automaton("game_target.aut"))


def test_owners_must_cover_controls():
    g = fixture_game()
    with pytest.raises(ValueError):
        Prg(g.pds, {"p1": ELOISE}, g.target)


def test_owner_values_checked():
    g = fixture_game()
    with pytest.raises(ValueError):
        Prg(g.pds, {p: "X" for p in g.pds.controls}, g.target)


def test_totalize_needs_bottom():
    pds = Pds(2, ("p",), ("a",), ())
    g = Prg(pds, {"p": ELOISE}, universal_automaton(2, ("a",), ("p",)))
    with pytest.raises(MissingBottomSymbol):
        totalize(g)


def test_totalize_gives_every_pair_a_move():
    t = totalize(fixture_game())
    have = {(c.control, c.symbol) for c in t.pds.commands}
    assert have == {(p, a) for p in t.pds.controls for a in t.pds.alphabet}
    assert t.owners["lose_E"] == ELOISE and t.owners["lose_A"] == ABELARD


def test_totalize_makes_abelard_sink_a_target():
    t = totalize(fixture_game())
    assert t.target.accepts_config("lose_A", C("lose_A [[a _bot]]").store)
    assert not t.target.accepts_config("lose_E", C("lose_E [[a _bot]]").store)


def test_game_to_apds_groups_abelard_moves():
    apds, stuck = game_to_apds(totalize(fixture_game()))
    [joint] = [c for c in apds.commands if c.control == "p2" and c.symbol == "a"]
    assert len(joint.moves) == 2
    assert all(len(c.moves) == 1 for c in apds.commands if c.control != "p2")
    assert stuck.nabla == {"p2", "lose_A"}


@pytest.mark.parametrize("text,expected", [
    ("p1 [[a _bot]]", True),          # Eloise rewrites to b under p3
    ("p2 [[a _bot]]", True),          # Abelard's pop2 is undefined, so he is stuck
    ("p2 [[a _bot][a _bot]]", False),  # Abelard escapes to p4
    ("p2 [[b _bot]]", True),          # no Abelard move on b
    ("p1 [[_bot]]", True),
    ("p1 [[b _bot]]", False),         # Eloise stuck
    ("p4 [[a _bot]]", False),
])
def test_fixture_winning_region(text, expected):
    R = winning_region(totalize(fixture_game()))
    c = C(text)
    assert R.accepts_config(c.control, c.store) == expected


def test_region_has_no_abelard_undefined_configurations():
    t = totalize(fixture_game())
    R = winning_region(t)
    assert not set(R.nabla) & set(t.controls_of(ABELARD))


def test_all_target_game_is_won_everywhere():
    g = fixture_game()
    everything = universal_automaton(2, g.pds.alphabet, g.pds.controls)
    R = winning_region(totalize(Prg(g.pds, g.owners, everything)))
    U = get_universe(2, g.pds.alphabet, (2, 2), g.pds.bottom)
    assert universe_membership(R, U, g.pds.controls).mask.all()


@pytest.mark.parametrize("seed", range(15))
def test_matches_the_attractor(seed):
    rng = random.Random(seed)
    pds = random_pds(rng, bottom=True, max_symbols=2, min_commands=1)
    owners = {p: rng.choice([ELOISE, ABELARD]) for p in pds.controls}
    target = random_automaton(rng, 2, pds.alphabet, pds.controls, nabla_prob=0.2)
    t = totalize(Prg(pds, owners, target))
    U = get_universe(2, pds.alphabet, (2, 2), pds.bottom)
    res = attractor_oracle(t, U)
    got = universe_membership(with_controls(winning_region(t), t.pds.controls), U, t.pds.controls)
    assert ((got.mask == res.low.mask) | res.undetermined).all()
    assert not (res.low.mask & ~got.mask).any() and not (got.mask & ~res.high.mask).any()
