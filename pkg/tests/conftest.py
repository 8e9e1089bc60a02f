import numpy as np
import pytest

from qgen import domain, grammar


def make_board(spec):
    ships = tuple(
        domain.ShipPlacement(size, orient, row, col, color)
        for color, size, orient, row, col in spec
    )
    return domain.Board(ships)


# Golden board 1: mixed orientations, Blue touches Purple, Red touches nothing.
G1_SPEC = (("Blue", 3, "H", 1, 1), ("Red", 2, "V", 2, 5), ("Purple", 4, "V", 2, 2))
# Golden board 2: all horizontal, no ships touch.
G2_SPEC = (("Blue", 2, "H", 6, 5), ("Red", 4, "H", 4, 1), ("Purple", 3, "H", 1, 4))


@pytest.fixture(scope="session")
def board_g1():
    return make_board(G1_SPEC)


@pytest.fixture(scope="session")
def board_g2():
    return make_board(G2_SPEC)


@pytest.fixture(scope="session")
def space():
    return domain.enumerate_hypotheses()


@pytest.fixture(scope="session")
def prior_belief(space):
    return domain.prior(space)


@pytest.fixture(scope="session")
def ctx_small(board_g1):
    """A context with a modest posterior support, for fast EIG sweeps."""
    tiles = ["1A", "1B", "2B", "2E", "3C", "4B", "5E", "6A", "6F", "3E",
             "1F", "2C", "4D", "5B"]
    return domain.reveal_context(board_g1, tiles, "tiny")


@pytest.fixture(scope="session")
def belief_small(prior_belief, ctx_small):
    return domain.condition(prior_belief, ctx_small)


@pytest.fixture(scope="session")
def mini_belief():
    """Effectively a 3x3 single-ship domain: the Blue ship roams rows 1-3,
    columns A-C (sizes 2 and 3); Red and Purple are pinned far away, so
    only Blue carries uncertainty. Fully enumerable: 18 hypotheses."""
    red = domain.ShipPlacement(2, "V", 4, 6, "Red")
    purple = domain.ShipPlacement(3, "H", 6, 1, "Purple")
    boards = []
    for size in (2, 3):
        for orient in ("H", "V"):
            for row in range(1, 4):
                for col in range(1, 4):
                    end_r = row + (size - 1 if orient == "V" else 0)
                    end_c = col + (size - 1 if orient == "H" else 0)
                    if end_r > 3 or end_c > 3:
                        continue
                    blue = domain.ShipPlacement(size, orient, row, col, "Blue")
                    boards.append(domain.Board((blue, red, purple)))
    mini = domain.HypothesisSpace.from_boards(boards)
    n = len(mini)
    return domain.Belief(mini, np.arange(n), np.full(n, 1.0 / n))


@pytest.fixture(scope="session")
def universe2():
    """The exact enumerable universe at a 2-function cap, with log q."""
    return grammar.enumerate_programs(2)
