"""Context-free grammars for carrier sentences around a target word.

File format, one production per line::

    # comment
    <S> -> <NAME> likes <SLOT> <NOUN> | <NAME> loves <SLOT> of <NOUN>
    <NAME> -> Ashley | Karen | "Mary Ann"

Nonterminals are written in angle brackets, terminals are bare words or
double-quoted phrases, and ``<SLOT>`` marks where the target word goes.
The first production's left-hand side is the start symbol. Repeated
left-hand sides append alternatives.
"""

from __future__ import annotations

import random
import re
import shlex
from dataclasses import dataclass

from .errors import DepthExceeded, GrammarError, MissingSlot, ParseError, UnreachableNonterminal

SLOT = "<SLOT>"
_NT = re.compile(r"^<[^<>\s]+>$")


def is_nonterminal(symbol: str) -> bool:
    return bool(_NT.match(symbol))


@dataclass(frozen=True)
class Grammar:
    start: str
    productions: dict  # nonterminal -> tuple of alternatives (tuples of symbols)
    slot: str = SLOT

    def __post_init__(self):
        prods = {k: tuple(tuple(alt) for alt in v) for k, v in self.productions.items()}
        object.__setattr__(self, "productions", prods)
        if self.start not in prods:
            raise UnreachableNonterminal(f"start symbol {self.start} has no productions")
        mentions_slot = False
        for lhs, alts in prods.items():
            if not alts:
                raise ParseError(f"{lhs} has no alternatives")
            for alt in alts:
                if not alt:
                    raise ParseError(f"{lhs} has an empty alternative")
                for sym in alt:
                    if sym == self.slot:
                        mentions_slot = True
                    elif is_nonterminal(sym) and sym not in prods:
                        raise UnreachableNonterminal(f"{sym} (used by {lhs}) is never defined")
        if not mentions_slot:
            raise MissingSlot(f"grammar never uses {self.slot}")

    def __eq__(self, other):
        return (isinstance(other, Grammar) and self.start == other.start
                and self.slot == other.slot and self.productions == other.productions)

    def __hash__(self):
        return hash((self.start, self.slot, tuple(sorted(self.productions.items()))))


def parse_grammar(text: str) -> Grammar:
    productions: dict[str, list] = {}
    start = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "->" not in line:
            raise ParseError(f"line {lineno}: expected 'NONTERM -> alternatives'")
        lhs, rhs = (part.strip() for part in line.split("->", 1))
        if not is_nonterminal(lhs) or lhs == SLOT:
            raise ParseError(f"line {lineno}: left-hand side {lhs!r} is not a nonterminal")
        try:
            symbols = shlex.split(rhs, comments=False, posix=True)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        alts, cur = [], []
        for sym in symbols:
            if sym == "|":
                alts.append(cur)
                cur = []
            else:
                cur.append(sym)
        alts.append(cur)
        if any(not a for a in alts):
            raise ParseError(f"line {lineno}: empty alternative")
        productions.setdefault(lhs, []).extend(alts)
        if start is None:
            start = lhs
    if start is None:
        raise ParseError("grammar has no productions")
    return Grammar(start, productions)


def load_grammar(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return parse_grammar(fh.read())


def _render_symbol(sym: str) -> str:
    if is_nonterminal(sym) or re.fullmatch(r"[^\s|\"'#]+", sym):
        return sym
    return '"' + sym.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_grammar(grammar: Grammar) -> str:
    order = [grammar.start] + sorted(k for k in grammar.productions if k != grammar.start)
    lines = []
    for lhs in order:
        alts = " | ".join(" ".join(_render_symbol(s) for s in alt) for alt in grammar.productions[lhs])
        lines.append(f"{lhs} -> {alts}")
    return "\n".join(lines) + "\n"


def _expand(grammar, symbol, rng, depth, max_depth, out):
    if depth > max_depth:
        raise DepthExceeded(f"expansion deeper than {max_depth}")
    alt = grammar.productions[symbol][rng.randrange(len(grammar.productions[symbol]))]
    for sym in alt:
        if sym == grammar.slot:
            out.append(None)
        elif is_nonterminal(sym):
            _expand(grammar, sym, rng, depth + 1, max_depth, out)
        else:
            out.append(sym)


def generate(grammar: Grammar, target_word: str, n: int, seed=0, max_depth=50, max_attempts=1000):
    """Sample ``n`` sentences with the slot filled by ``target_word``.

    Alternatives are chosen uniformly. Derivations whose slot count is not
    exactly one, or whose terminals already contain the target word, are
    redrawn.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    target = target_word.strip()
    if not target:
        raise ValueError("target word must be non-empty")
    rng = random.Random(f"{seed}\0{target}")
    target_tokens = target.split()
    sentences = []
    attempts = 0
    while len(sentences) < n:
        attempts += 1
        if attempts > max_attempts * n:
            raise GrammarError(f"could not derive sentences with exactly one slot for {target!r}")
        parts: list = []
        _expand(grammar, grammar.start, rng, 0, max_depth, parts)
        if parts.count(None) != 1:
            continue
        filled = " ".join(target if p is None else p for p in parts)
        if _count_sub(filled.split(), target_tokens) != 1:
            continue
        sentences.append(filled)
    return sentences


def _count_sub(tokens, sub):
    k = len(sub)
    return sum(tokens[i:i + k] == sub for i in range(len(tokens) - k + 1))


def derives(grammar: Grammar, sentence: str, target_word: str) -> bool:
    """True when ``sentence`` is in the grammar's language with the slot read as ``target_word``."""
    tokens = sentence.split()
    slot_tokens = tuple(target_word.split())
    done: dict = {}
    active: set = set()

    # each helper returns (derivable, tainted); a negative answer reached
    # while cutting a unit-production cycle is tainted and not memoized
    def seq(symbols, i, j):
        if not symbols:
            return i == j, False
        first, rest = symbols[0], symbols[1:]
        tainted = False
        # every symbol covers at least one token
        for mid in range(i + 1, j - len(rest) + 1):
            ok, t1 = sym(first, i, mid)
            tainted |= t1
            if ok:
                ok, t2 = seq(rest, mid, j)
                tainted |= t2
                if ok:
                    return True, False
        return False, tainted

    def sym(s, i, j):
        if s == grammar.slot:
            return tuple(tokens[i:j]) == slot_tokens, False
        if not is_nonterminal(s):
            return tuple(tokens[i:j]) == tuple(s.split()), False
        key = (s, i, j)
        if key in done:
            return done[key], False
        if key in active:
            return False, True
        active.add(key)
        ok, tainted = False, False
        for alt in grammar.productions[s]:
            ok, t = seq(alt, i, j)
            tainted |= t
            if ok:
                tainted = False
                break
        active.discard(key)
        if ok or not tainted:
            done[key] = ok
        return ok, tainted

    return len(tokens) > 0 and sym(grammar.start, 0, len(tokens))[0]


def default_grammar_path(name="adjective"):
    from importlib.resources import files

    return files("asrfair.data").joinpath(f"{name}.grammar")
