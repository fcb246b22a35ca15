import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopdr.errors import ParseError, TopOfEmpty
from hopdr.stores import (
    POP1,
    UNDEF,
    Configuration,
    PopL,
    PushL,
    PushW,
    Store,
    apply,
    parse_configuration,
    parse_store,
    render_store,
    top,
)

SYMS = ["a", "b", "c"]


def S(text, order=2):
    return parse_store(text, order)


def contents(order):
    if order == 1:
        return st.lists(st.sampled_from(SYMS), max_size=3).map(tuple)
    return st.lists(contents(order - 1), min_size=1, max_size=3).map(tuple)


stores = st.integers(1, 3).flatmap(lambda n: contents(n).map(lambda c: Store(n, c)))


def ops_for(order):
    words = st.lists(st.sampled_from(SYMS), max_size=2).map(lambda w: PushW(tuple(w)))
    if order == 1:
        return words
    return st.one_of(words, st.integers(2, order).map(PushL), st.integers(2, order).map(PopL))


# -- top -------------------------------------------------------------------

def test_top_level_one_is_first_symbol():
    assert top(1, S("[[a b][c]]")) == "a"


def test_top_level_two_is_first_one_store():
    assert top(2, S("[[a b][c]]")) == parse_store("[a b]", 1)


def test_top_of_empty_one_store_raises():
    with pytest.raises(TopOfEmpty):
        top(1, S("[[ ][c]]"))


# -- apply -----------------------------------------------------------------

def test_push2_duplicates_top_one_store():
    assert apply(PushL(2), S("[[a][b]]")) == S("[[a][a][b]]")


def test_pop2_on_single_entry_is_undefined():
    assert apply(PopL(2), S("[[a]]")) is UNDEF


def test_empty_push_word_pops_one_symbol():
    assert POP1 == PushW(())
    assert apply(PushW(()), S("[[a b][c]]")) == S("[[b][c]]")


def test_pushw_replaces_top_symbol():
    assert apply(PushW(("c", "a")), S("[[a b]]")) == S("[[c a b]]")


def test_pushw_on_empty_one_store_is_undefined():
    assert apply(PushW(("a",)), S("[[][b]]")) is UNDEF


def test_level_outside_order_rejected():
    with pytest.raises(ValueError):
        apply(PushL(3), S("[[a]]"))


def test_order_three_push_and_pop():
    s = parse_store("[[[a][b]][[c]]]", 3)
    assert apply(PushL(3), s) == parse_store("[[[a][b]][[a][b]][[c]]]", 3)
    assert apply(PopL(3), s) == parse_store("[[[c]]]", 3)
    assert apply(PushL(2), s) == parse_store("[[[a][a][b]][[c]]]", 3)


@given(stores, st.data())
def test_push_then_pop_is_identity(s, data):
    if s.order < 2:
        return
    level = data.draw(st.integers(2, s.order))
    assert apply(PopL(level), apply(PushL(level), s)) == s


@given(stores, st.data())
def test_push_keeps_lower_tops(s, data):
    if s.order < 2:
        return
    k = data.draw(st.integers(2, s.order))
    pushed = apply(PushL(k), s)
    for level in range(1, k):
        try:
            expected = top(level, s)
        except TopOfEmpty:
            with pytest.raises(TopOfEmpty):
                top(level, pushed)
            continue
        assert top(level, pushed) == expected


def test_apply_results_are_valid_stores():
    rng = random.Random(0)
    for _ in range(10_000):
        order = rng.randint(1, 3)

        def gen(level):
            if level == 1:
                return tuple(rng.choice(SYMS) for _ in range(rng.randint(0, 3)))
            return tuple(gen(level - 1) for _ in range(rng.randint(1, 3)))

        s = Store(order, gen(order))
        choices = [PushW(tuple(rng.choice(SYMS) for _ in range(rng.randint(0, 2))))]
        if order > 1:
            choices += [PushL(rng.randint(2, order)), PopL(rng.randint(2, order))]
        r = apply(rng.choice(choices), s)
        if r is not UNDEF:
            assert isinstance(r, Store) and r.order == order
            Store(r.order, r.content)  # revalidates


# -- parsing ---------------------------------------------------------------

def test_parse_two_one_stores():
    s = S("[[a b][a]]")
    assert s.order == 2 and len(s) == 2
    assert s.children()[0] == parse_store("[a b]", 1)


def test_parse_empty_one_store_inside_order_two():
    s = S("[[]]")
    assert s.content == ((),)


def test_parse_depth_mismatch_is_an_error():
    with pytest.raises(ParseError):
        parse_store("[[a]]", 3)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as err:
        parse_store("[[a b]", 2)
    assert err.value.position is not None


def test_parse_undef_literal():
    assert parse_store("UNDEF", 2) is UNDEF


def test_empty_order_two_store_rejected():
    with pytest.raises(ParseError):
        parse_store("[]", 2)


@given(stores)
def test_render_parse_round_trip(s):
    assert parse_store(render_store(s), s.order) == s


@settings(max_examples=50)
@given(stores)
def test_configuration_round_trip(s):
    c = Configuration("p1", s)
    assert parse_configuration(str(c), s.order) == c


def test_configuration_with_undefined_store():
    c = parse_configuration("p5 UNDEF", 2)
    assert c.control == "p5" and c.store is UNDEF
    assert str(c) == "p5 UNDEF"
