import math
import random
from collections import Counter
from pathlib import Path

import pytest

from qgen import dsl, grammar


def test_sample_deterministic_given_seed():
    a = [p.text for p in grammar.sample_many(123, 20)]
    b = [p.text for p in grammar.sample_many(123, 20)]
    assert a == b


def test_samples_typecheck_and_respect_cap():
    for seed in range(300):
        p = grammar.sample(seed, max_functions=6)
        assert p.function_count <= 6
        assert p.answer_type in ("B", "N", "C", "O", "L")


def test_first_rule_frequency():
    # A has 5 productions chosen uniformly; count programs whose answer
    # sort resolves to B over many draws
    rng = random.Random(4)
    n = 10_000
    draws = sum(1 for _ in range(n) if grammar.sample(rng).answer_type == "B")
    # orientation programs subsume... no: answer_type B occurs iff the
    # first rule was A -> B, so this estimates exactly that choice
    p = 1 / 5
    sd = math.sqrt(p * (1 - p) / n)
    assert abs(draws / n - p) < max(0.02, 3 * sd)


def test_sampling_error_when_cap_unreachable():
    # max_functions=1 still admits literals, so force failures via attempts=0
    with pytest.raises(ValueError):
        grammar.sample(0, max_functions=0)


def test_log_q_is_negative_complexity_convention():
    p = dsl.parse("(size Blue)")
    # A -> N (1/5), N -> (size S) (1/20), S -> Blue (1/3)
    expected = math.log(1 / 5) + math.log(1 / 20) + math.log(1 / 3)
    assert abs(grammar.log_q(p) - expected) < 1e-12


def test_log_q_scope_guard_changes_choice_counts():
    # y is selectable only inside a location lambda: L has 39 options there
    p = dsl.parse("(any (map (λ y (= (color y) Blue)) (coloredTiles Red)))")
    lq = grammar.log_q(p)
    expected = (
        math.log(1 / 5)    # A -> B
        + math.log(1 / 16)  # B -> (any setB)
        + math.log(1 / 2)   # setB -> (map fyB setL)
        + 0.0               # fyB -> (λ y B)
        + math.log(1 / 16)  # B -> (= C C)
        + math.log(1 / 3)   # C -> (color L)
        + math.log(1 / 39)  # L -> y   (y in scope)
        + math.log(1 / 3)   # C -> S
        + math.log(1 / 3)   # S -> Blue
        + math.log(1 / 7)   # setL -> (coloredTiles C)
        + math.log(1 / 3)   # C -> S
        + math.log(1 / 3)   # S -> Red
    )
    assert abs(lq - expected) < 1e-12


def test_log_q_deeper_program_strictly_lower():
    p1 = dsl.parse("(size Blue)")
    p2 = dsl.parse("(size Blue)")
    wrapped = dsl.parse("(+ (size Blue) 0)")
    assert grammar.log_q(wrapped) < grammar.log_q(p1)
    assert grammar.log_q(p1) == grammar.log_q(p2)


def test_log_q_rejects_underivable():
    p = dsl.Program(dsl.parse_raw("(draw Blue)"))
    with pytest.raises(dsl.QgenError):
        grammar.log_q(p)


def test_enumeration_cap1_hand_count():
    # literals: 2 bool + 11 num + 4 color + 2 orient + 36 loc      =  55
    # B apps with literal args: not 2, and 4, or 4, =BB 4, =NN 121,
    #   =OO 4, =CC 16, >NN 121, <NN 121, touch 9                   = 406
    # N apps: +NN 121, +BB 4, -NN 121, size 3, row 36, col 36      = 321
    # C apps: color 36;  O apps: orient 3                          =  39
    e1 = grammar.enumerate_programs(1)
    assert len(e1) == 55 + 406 + 321 + 39
    texts = {p.text for p, _ in e1}
    assert {"(size Blue)", "(size Red)", "(size Purple)", "(orient Blue)"} <= texts


def test_enumeration_monotone_in_cap(universe2):
    e1 = {p.text for p, _ in grammar.enumerate_programs(1)}
    e2 = {p.text for p, _ in universe2}
    assert e1 <= e2
    assert len(e2) > len(e1)


def test_enumeration_duplicate_free(universe2):
    texts = [p.text for p, _ in universe2]
    assert len(texts) == len(set(texts))


def test_enumeration_all_typecheck(universe2):
    for p, _ in random.Random(1).sample(universe2, 500):
        assert p.answer_type in ("B", "N", "C", "O", "L")


def test_enumeration_refuses_large_cap():
    with pytest.raises(ValueError):
        grammar.enumerate_programs(5)


def test_enumeration_logq_matches_log_q(universe2):
    for p, lq in random.Random(2).sample(universe2, 300):
        assert abs(grammar.log_q(p) - lq) < 1e-12


def test_truncation_mass_matches_monte_carlo(universe2):
    """sum of q over the <=2-function set vs the single-attempt acceptance
    rate of 2-capped sampling (each attempt is one unconditioned
    derivation), within 3 standard errors."""
    mass = sum(math.exp(lq) for _, lq in universe2)
    rng = random.Random(77)
    n = 30_000
    hits = 0
    for _ in range(n):
        try:
            grammar.sample(rng, max_functions=2, max_attempts=1)
            hits += 1
        except grammar.SamplingError:
            pass
    freq = hits / n
    sd = math.sqrt(mass * (1 - mass) / n)
    assert abs(freq - mass) < 3 * sd


def test_sampler_frequencies_match_q(universe2):
    """Empirical frequencies of capped draws match exp(log q) renormalized
    over the <=2-function universe. Checked at 4 sigma for programs with
    expected count >= 30; a literal 3-sigma test over all 43k programs
    would trip on ~0.3% of them by chance."""
    mass = sum(math.exp(lq) for _, lq in universe2)
    n = 60_000
    rng = random.Random(31)
    counts = Counter(grammar.sample(rng, max_functions=2).text for _ in range(n))
    checked = 0
    for p, lq in universe2:
        expect = math.exp(lq) / mass
        if expect * n < 30:
            continue
        sd = math.sqrt(n * expect * (1 - expect))
        assert abs(counts[p.text] - n * expect) < 4 * sd, p.text
        checked += 1
    assert checked >= 20


def test_board_referential_flag_matches_rule_marking(universe2):
    # flagged iff the derivation uses a board-marked rule
    board_heads = {"touch", "size", "color", "orient", "coloredTiles"}
    for p, _ in random.Random(3).sample(universe2, 400):
        uses = any(h in p.text for h in ("touch ", "size ", "color ", "orient ", "coloredTiles "))
        assert p.board_referential == uses


def test_rule_table_doc_in_sync():
    path = Path(__file__).resolve().parent.parent / "docs" / "rule_table.txt"
    assert path.exists()
    assert path.read_text(encoding="utf-8") == grammar.rule_table_text()


def test_rule_table_board_flags():
    flagged = {
        p.head
        for prods in grammar.RULES.values()
        for p in prods
        if p.board
    }
    assert flagged == {"touch", "size", "color", "orient", "coloredTiles"}


def test_corpus_programs_derivable():
    path = Path(__file__).resolve().parent.parent / "data" / "demo" / "corpus.jsonl"
    import json

    for line in path.read_text().splitlines():
        p = dsl.parse(json.loads(line)["program"])
        assert math.isfinite(grammar.log_q(p))
