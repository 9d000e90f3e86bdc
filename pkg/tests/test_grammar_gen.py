import pytest

from asrfair.errors import DepthExceeded, GrammarError, MissingSlot, ParseError, UnreachableNonterminal
from asrfair.grammar_gen import (
    SLOT,
    default_grammar_path,
    derives,
    generate,
    load_grammar,
    parse_grammar,
    serialize_grammar,
)

SMALL = """
# tiny
<S> -> <NAME> likes <SLOT> <PLURAL>
<NAME> -> Ashley | "Mary Ann"
<PLURAL> -> smoothies
"""


def test_parse_small_grammar():
    g = parse_grammar(SMALL)
    assert g.start == "<S>"
    assert g.productions["<NAME>"] == (("Ashley",), ("Mary Ann",))
    assert g.productions["<S>"] == (("<NAME>", "likes", SLOT, "<PLURAL>"),)


def test_repeated_lhs_appends():
    g = parse_grammar("<S> -> a <SLOT>\n<S> -> b <SLOT>")
    assert g.productions["<S>"] == (("a", SLOT), ("b", SLOT))


@pytest.mark.parametrize("text,error", [
    ("<S> a <SLOT>", ParseError),
    ("<S> -> a | | <SLOT>", ParseError),
    ("<S> -> a \"b <SLOT>", ParseError),
    ("S -> a <SLOT>", ParseError),
    ("<S> -> a b", MissingSlot),
    ("<S> -> <X> <SLOT>", UnreachableNonterminal),
    ("", ParseError),
])
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_grammar(text)


def test_serialize_round_trip():
    g = parse_grammar(SMALL)
    assert parse_grammar(serialize_grammar(g)) == g
    bundled = load_grammar(default_grammar_path())
    assert parse_grammar(serialize_grammar(bundled)) == bundled


def test_ashley_example():
    g = parse_grammar(SMALL)
    sentences = generate(g, "smart", 5, seed=0)
    assert set(sentences) <= {"Ashley likes smart smoothies", "Mary Ann likes smart smoothies"}
    assert derives(g, "Ashley likes smart smoothies", "smart")
    assert not derives(g, "Ashley likes smoothies", "smart")
    assert not derives(g, "Ashley likes smart smart smoothies", "smart")


@pytest.mark.parametrize("name,word", [("adjective", "nice"), ("noun", "brother"), ("adjective", "ice cream")])
def test_bundled_grammars(name, word):
    g = load_grammar(default_grammar_path(name))
    sentences = generate(g, word, 50, seed=3)
    assert len(sentences) == 50
    for s in sentences:
        tokens, target = s.split(), word.split()
        assert sum(tokens[i:i + len(target)] == target for i in range(len(tokens))) == 1
        assert derives(g, s, word)


def test_target_already_in_terminals_is_redrawn():
    g = parse_grammar("<S> -> <SLOT> <T>\n<T> -> cake | rice")
    assert set(generate(g, "cake", 20, seed=1)) == {"cake rice"}
    with pytest.raises(GrammarError):
        generate(parse_grammar("<S> -> <SLOT> cake"), "cake", 1, max_attempts=10)


def test_deterministic_under_seed():
    g = load_grammar(default_grammar_path())
    assert generate(g, "tall", 20, seed=7) == generate(g, "tall", 20, seed=7)
    assert generate(g, "tall", 20, seed=7) != generate(g, "tall", 20, seed=8)


def test_rejects_multiple_slots():
    g = parse_grammar("<S> -> <SLOT> | <SLOT> and <SLOT>")
    assert generate(g, "x", 10) == ["x"] * 10


def test_recursive_grammar_depth():
    g = parse_grammar("<S> -> <S> <S> | <SLOT>")
    with pytest.raises((DepthExceeded, GrammarError)):
        generate(g, "x", 3, max_depth=0, max_attempts=5)


def test_derives_with_unit_cycles():
    g = parse_grammar("<S> -> <A> | <SLOT> end\n<A> -> <S> | go <SLOT>")
    assert derives(g, "go x", "x")
    assert derives(g, "x end", "x")
    assert not derives(g, "x", "x")
    assert not derives(g, "", "x")


def test_invalid_generation_args():
    g = parse_grammar(SMALL)
    with pytest.raises(ValueError):
        generate(g, "", 1)
    with pytest.raises(ValueError):
        generate(g, "x", 0)
