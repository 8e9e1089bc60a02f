import numpy as np
import pytest

from qgen import domain
from qgen.domain import Belief, ShipPlacement, condition, entropy, prior


def test_placement_counts_formula():
    # both orientations x 6 lanes x (7 - n) anchors
    for size in (2, 3, 4):
        assert len(domain.enumerate_placements(size)) == 2 * 6 * (7 - size)


def test_placement_counts_examples():
    assert len(domain.enumerate_placements(2)) == 60
    assert len(domain.enumerate_placements(4)) == 36


def test_placement_size_out_of_range():
    with pytest.raises(ValueError):
        domain.enumerate_placements(7)
    with pytest.raises(ValueError):
        domain.enumerate_placements(1)


def test_placements_in_bounds_and_width_one():
    for size in (2, 3, 4):
        for p in domain.enumerate_placements(size):
            tiles = p.tiles()
            assert len(tiles) == size
            assert all(1 <= r <= 6 and 1 <= c <= 6 for r, c in tiles)
            rows = {r for r, _ in tiles}
            cols = {c for _, c in tiles}
            assert min(len(rows), len(cols)) == 1  # 1-wide straight run


def test_board_rejects_overlap():
    with pytest.raises(ValueError):
        domain.Board(
            (
                ShipPlacement(3, "H", 1, 1, "Blue"),
                ShipPlacement(2, "V", 1, 2, "Red"),  # 1B collides with Blue
                ShipPlacement(4, "V", 2, 5, "Purple"),
            )
        )


def test_board_grid_roundtrip(board_g1):
    grid = board_g1.to_grid()
    assert domain.Board.from_grid(grid) == board_g1
    assert board_g1.color_at(1, 1) == "Blue"
    assert board_g1.color_at(3, 5) == "Red"
    assert board_g1.color_at(6, 6) == "Water"


def test_enumeration_boards_valid(space):
    # spot-check invariants on a deterministic sample of the space
    idx = np.linspace(0, len(space) - 1, 25, dtype=int)
    for i in idx:
        board = space.board(int(i))
        masks = [s.tile_mask() for s in board.ships]
        assert (masks[0] & masks[1]) == 0
        assert (masks[0] & masks[2]) == 0
        assert (masks[1] & masks[2]) == 0


def test_enumeration_all_size4_slice(space):
    # brute force over the 36^3 size-(4,4,4) candidates
    placements4 = domain.enumerate_placements(4)
    masks = [p.tile_mask() for p in placements4]
    expected = sum(
        1
        for mb in masks
        for mr in masks
        if not mb & mr
        for mp in masks
        if not (mb | mr) & mp
    )
    sizes = space.arrays.sizes
    got = int(((sizes == 4).all(axis=1)).sum())
    assert got == expected


def test_prior_normalization(space, prior_belief):
    assert abs(prior_belief.weights.sum() - 1.0) < 1e-9
    tri = space.size_triple_index()
    masses = np.bincount(tri, weights=prior_belief.weights, minlength=27)
    assert np.all(np.abs(masses - 1 / 27) < 1e-9)


def test_prior_equal_weight_within_triple(space, prior_belief):
    tri = space.size_triple_index()
    pick = np.nonzero(tri == tri[0])[0][:50]
    w = prior_belief.weights[pick]
    assert np.all(np.abs(w - w[0]) < 1e-15)


def test_prior_rejects_empty(space):
    empty = domain.HypothesisSpace.from_boards([])
    with pytest.raises(ValueError):
        prior(empty)
    with pytest.raises(ValueError):
        Belief(space, np.array([], dtype=np.int64), np.array([]))


def test_condition_fully_hidden_is_identity(prior_belief):
    ctx = domain.Context.from_cells("hidden", [["?"] * 6 for _ in range(6)])
    post = condition(prior_belief, ctx)
    assert post is prior_belief


def test_condition_filters_revealed_tile(space, prior_belief):
    cells = [["?"] * 6 for _ in range(6)]
    cells[2][1] = "B"  # board row 3, column B
    ctx = domain.Context.from_cells("one-blue", cells)
    post = condition(prior_belief, ctx)
    tile = domain.loc_index(3, 2)
    assert np.all(post.space.arrays.tiles[post.indices, tile] == 1)
    assert abs(post.weights.sum() - 1.0) < 1e-9


def test_condition_idempotent(prior_belief, ctx_small):
    once = condition(prior_belief, ctx_small)
    twice = condition(once, ctx_small)
    assert np.array_equal(once.indices, twice.indices)
    assert np.allclose(once.weights, twice.weights)


def test_condition_near_fully_revealed_support(space, prior_belief, board_g1):
    # independent linear scan over the full space
    revealed = [i for i in range(36) if i % 2 == 0]  # half the board
    ctx = domain.reveal_context(board_g1, revealed, "near-full")
    post = condition(prior_belief, ctx)
    codes = board_g1.tile_codes()
    tiles = space.arrays.tiles
    expected = sum(
        1
        for k in range(len(space))
        if all(tiles[k, t] == codes[t] for t in revealed)
    )
    assert len(post) == expected


def test_condition_inconsistent_context_raises(space, prior_belief):
    cells = [["?"] * 6 for _ in range(6)]
    # a 6-tile blue run cannot exist (max ship size is 4)
    for c in range(6):
        cells[0][c] = "B"
    ctx = domain.Context.from_cells("impossible", cells)
    with pytest.raises(domain.InconsistentContextError):
        condition(prior_belief, ctx)


def test_entropy_uniform_and_singleton(space):
    idx = np.arange(8)
    b = Belief(space, idx, np.full(8, 1 / 8))
    assert abs(entropy(b) - 3.0) < 1e-12
    single = Belief(space, np.array([5]), np.array([1.0]))
    assert entropy(single) == 0.0


def test_entropy_of_prior_matches_grouped_oracle(space, prior_belief):
    # independent summation: group by size triple, sum within groups
    tri = space.size_triple_index()
    counts = np.bincount(tri, minlength=27).astype(float)
    # each triple has mass 1/27 spread uniformly over `counts` boards
    per_board = (1 / 27) / counts
    oracle = float(-(np.log2(per_board) * per_board * counts).sum())
    assert abs(entropy(prior_belief) - oracle) < 1e-9


def test_posterior_entropy_not_above_prior(prior_belief, ctx_small):
    post = condition(prior_belief, ctx_small)
    assert entropy(post) <= entropy(prior_belief) + 1e-12


def test_context_json_roundtrip(tmp_path, board_g1):
    ctx = domain.reveal_context(board_g1, ["1A", "3E", "6F"], "rt")
    path = tmp_path / "ctx.json"
    import json

    path.write_text(json.dumps(ctx.to_json_obj()))
    loaded = domain.Context.from_json(path)
    assert loaded == ctx
    assert loaded.n_revealed == 3


def test_context_rejects_bad_cells():
    cells = [["?"] * 6 for _ in range(6)]
    cells[0][0] = "X"
    with pytest.raises(ValueError):
        domain.Context.from_cells("bad", cells)


def test_reveal_context_matches_board(board_g2):
    ctx = domain.reveal_context(board_g2, ["4A", "1D", "6E", "2C"], "g2")
    idx, vals = ctx.revealed()
    codes = board_g2.tile_codes()
    assert np.array_equal(vals, codes[idx])
