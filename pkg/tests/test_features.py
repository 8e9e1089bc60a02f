import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgen import domain, dsl, features, grammar
from qgen.features import FEATURE_NAMES, FeatureCache, eig, feature_matrix, feature_vector


def eig_oracle(program, belief):
    """Termwise expected-gain sum: for each answer d, p(d) times the
    entropy drop from the prior belief to the posterior given d. Coded
    against the tree-walk evaluator, independent of the partition path."""
    answers = [dsl.evaluate(program, belief.board(k)) for k in range(len(belief))]
    w = belief.weights
    h_prior = -sum(float(x) * math.log2(x) for x in w if x > 0)
    total = 0.0
    for d in set(answers):
        members = [k for k, a in enumerate(answers) if a == d]
        p_d = float(sum(w[k] for k in members))
        post = [float(w[k]) / p_d for k in members]
        h_post = -sum(x * math.log2(x) for x in post if x > 0)
        total += p_d * (h_prior - h_post)
    return total


def test_eig_tautology_zero(belief_small):
    assert eig(dsl.parse("(> (size Blue) (size Blue))"), belief_small) == 0.0


def test_eig_balanced_binary_split(space):
    # uniform 4-board belief split 2 + 2 by blue size
    sizes = space.arrays.sizes[:, 0]
    two = np.nonzero(sizes == 2)[0][:2]
    three = np.nonzero(sizes == 3)[0][:2]
    idx = np.sort(np.concatenate([two, three]))
    belief = domain.Belief(space, idx, np.full(4, 0.25))
    p = dsl.parse("(= (size Blue) 2)")
    assert abs(eig(p, belief) - 1.0) < 1e-12


def test_eig_matches_termwise_oracle_mini_domain(mini_belief):
    """Sampled programs on the miniature single-ship domain; the fast
    partition-entropy path must equal the termwise sum to 1e-9 bits."""
    rng_seeds = iter(range(10_000))
    programs = []
    while len(programs) < 20:
        p = grammar.sample(next(rng_seeds), max_functions=8)
        programs.append(p)
    for p in programs:
        assert abs(eig(p, mini_belief) - eig_oracle(p, mini_belief)) < 1e-9


def test_eig_size_blue_mini_domain(mini_belief):
    # blue size is 2 or 3; counts 12 vs 6 of 18
    p = dsl.parse("(size Blue)")
    expected = -(12 / 18) * math.log2(12 / 18) - (6 / 18) * math.log2(6 / 18)
    assert abs(eig(p, mini_belief) - expected) < 1e-12


def test_eig_bounded_by_belief_entropy(belief_small):
    h = domain.entropy(belief_small)
    for seed in range(40):
        p = grammar.sample(seed, max_functions=8)
        g = eig(p, belief_small)
        assert -1e-12 <= g <= h + 1e-9


def test_eig_bounded_by_log_answer_count(belief_small):
    for text in ["(size Blue)", "(topleft (coloredTiles Red))", "(touch Blue Red)"]:
        p = dsl.parse(text)
        part = dsl.answer_partition(p, belief_small)
        assert eig(p, belief_small) <= math.log2(len(part)) + 1e-9


def test_non_board_programs_have_zero_eig(belief_small):
    for text in ["(+ 1 1)", "(= 2 3)", "(row 4C)", "True", "(topleft (set 1A ... 6F))"]:
        p = dsl.parse(text)
        assert not p.board_referential
        assert eig(p, belief_small) == 0.0


def test_feature_vector_plus_one_one(belief_small):
    fv = feature_vector(dsl.parse("(+ 1 1)"), belief_small)
    assert fv.relevance == 0.0
    assert fv.type_number == 1.0
    assert fv.eig == 0.0 and fv.eig_zero == 1.0
    assert fv.complexity > 0


def test_feature_vector_known_size_zero_eig(space, prior_belief, board_g1):
    # Blue fully revealed: (size Blue) refers to the board but gains nothing
    ctx = domain.reveal_context(board_g1, ["1A", "1B", "1C", "1D", "2A", "2C"], "blue-known")
    belief = domain.condition(prior_belief, ctx)
    fv = feature_vector(dsl.parse("(size Blue)"), belief)
    assert fv.relevance == 1.0
    assert fv.eig == pytest.approx(0.0, abs=1e-12)
    assert fv.eig_zero == 1.0


def test_feature_vector_orientation_counts_as_boolean(belief_small):
    fv = feature_vector(dsl.parse("(orient Red)"), belief_small)
    assert fv.type_boolean == 1.0
    assert fv.type_number == fv.type_color == fv.type_location == 0.0


def test_exactly_one_type_flag(belief_small):
    for seed in range(60):
        p = grammar.sample(seed, max_functions=6)
        fv = feature_vector(p, belief_small)
        flags = [fv.type_boolean, fv.type_number, fv.type_color, fv.type_location]
        assert sum(flags) == 1.0


def test_complexity_is_negative_log_q(belief_small):
    for seed in range(30):
        p = grammar.sample(seed, max_functions=6)
        fv = feature_vector(p, belief_small)
        assert fv.complexity == pytest.approx(-grammar.log_q(p))
        assert fv.complexity >= 0


def test_context_independence_of_static_features(prior_belief, belief_small):
    for text in ["(size Blue)", "(touch Red Purple)", "(+ 1 1)",
                 "(bottomright (coloredTiles Water))"]:
        p = dsl.parse(text)
        a = feature_vector(p, prior_belief)
        b = feature_vector(p, belief_small)
        assert a.complexity == b.complexity
        assert (a.type_boolean, a.type_number, a.type_color, a.type_location) == \
            (b.type_boolean, b.type_number, b.type_color, b.type_location)
        assert a.relevance == b.relevance


def test_matrix_row_equals_feature_vector(belief_small):
    programs = [grammar.sample(s, max_functions=6) for s in range(15)]
    mat = feature_matrix(programs, belief_small)
    for row, p in zip(mat, programs):
        assert np.allclose(row, feature_vector(p, belief_small).as_array())


def test_matrix_order_preserving(belief_small):
    programs = [grammar.sample(s, max_functions=6) for s in range(20)]
    mat = feature_matrix(programs, belief_small)
    perm = np.random.default_rng(0).permutation(20)
    mat_perm = feature_matrix([programs[i] for i in perm], belief_small)
    assert np.array_equal(mat[perm], mat_perm)


def test_matrix_cache_on_off_identical(belief_small):
    programs = [grammar.sample(s, max_functions=6) for s in range(25)]
    cold = feature_matrix(programs, belief_small, cache=None)
    cache = FeatureCache()
    warm1 = feature_matrix(programs, belief_small, cache=cache)
    warm2 = feature_matrix(programs, belief_small, cache=cache)  # all hits
    assert np.array_equal(cold, warm1)
    assert np.array_equal(warm1, warm2)


def test_matrix_threaded_identical(belief_small):
    programs = [grammar.sample(s, max_functions=6) for s in range(150)]
    serial = feature_matrix(programs, belief_small, threads=1)
    threaded = feature_matrix(programs, belief_small, threads=4)
    assert np.array_equal(serial, threaded)


def test_invalid_answers_form_partition_cell(space, prior_belief):
    # Invalid is informative when only some hypotheses produce it
    p = dsl.parse("(topleft (intersection (coloredTiles Blue) (coloredTiles Red)))")
    part = dsl.answer_partition(p, prior_belief)
    assert dsl.INVALID in part
    assert abs(sum(part.values()) - 1.0) < 1e-9
    assert eig(p, prior_belief) > 0


def test_persistence_roundtrip(tmp_path, belief_small):
    programs = [grammar.sample(s, max_functions=6) for s in range(12)]
    mat = feature_matrix(programs, belief_small)
    path = tmp_path / "features.tsv"
    features.save_feature_matrix(path, programs, mat)
    texts, loaded = features.load_feature_matrix(path)
    assert texts == [p.text for p in programs]
    assert np.array_equal(loaded, mat)


def test_eig_zero_flag_tolerance(belief_small):
    fv = feature_vector(dsl.parse("(size Blue)"), belief_small)
    assert (fv.eig <= features.EIG_ZERO_TOL) == bool(fv.eig_zero)
