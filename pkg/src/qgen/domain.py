"""Battleship world model: placements, boards, hypothesis space, beliefs.

Coordinates: rows 1-6 count top to bottom, columns A-F left to right, so
"3B" is row 3, column B. Row-major tile indices 0..35 are used internally.

Every type here is immutable after construction and all operations are
pure functions, so they are safe to call from parallel workers. Entropy
and information quantities are measured in bits (log base 2) throughout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

GRID = 6
N_TILES = GRID * GRID
COLUMNS = "ABCDEF"
SHIP_COLORS = ("Blue", "Red", "Purple")
SHIP_SIZES = (2, 3, 4)
WATER = "Water"

# Packed tile codes shared with the evaluation kernels.
COLOR_CODES = {"Water": 0, "Blue": 1, "Red": 2, "Purple": 3}
CODE_COLORS = {code: name for name, code in COLOR_CODES.items()}
HIDDEN = -1

_GRID_CHARS = {"W": 0, "B": 1, "R": 2, "P": 3, "?": HIDDEN}
_CODE_CHARS = {0: "W", 1: "B", 2: "R", 3: "P", HIDDEN: "?"}

# Unordered ship pairs, indexing the packed touch table.
TOUCH_PAIRS = ((0, 1), (0, 2), (1, 2))


class InconsistentContextError(ValueError):
    """No hypothesis is compatible with a context's revealed tiles."""


def loc_index(row: int, col: int) -> int:
    """Row-major tile index for 1-based (row, column)."""
    return (row - 1) * GRID + (col - 1)


def loc_name(index: int) -> str:
    return f"{index // GRID + 1}{COLUMNS[index % GRID]}"


def parse_loc(token: str) -> int | None:
    """Tile index for a token like "3B", or None if not a location."""
    if len(token) == 2 and token[0] in "123456" and token[1] in COLUMNS:
        return loc_index(int(token[0]), COLUMNS.index(token[1]) + 1)
    return None


@dataclass(frozen=True, slots=True)
class ShipPlacement:
    """One ship: a straight 1-wide run of `size` tiles anchored top-left."""

    size: int
    orientation: str  # "H" or "V"
    row: int  # anchor tile, 1-based
    col: int
    color: str | None = None  # None while color-agnostic

    def __post_init__(self):
        if self.size not in SHIP_SIZES:
            raise ValueError(f"ship size must be one of {SHIP_SIZES}, got {self.size}")
        if self.orientation not in ("H", "V"):
            raise ValueError(f"orientation must be 'H' or 'V', got {self.orientation!r}")
        if self.color is not None and self.color not in SHIP_COLORS:
            raise ValueError(f"unknown ship color {self.color!r}")
        end_row = self.row + (self.size - 1 if self.orientation == "V" else 0)
        end_col = self.col + (self.size - 1 if self.orientation == "H" else 0)
        if not (1 <= self.row and end_row <= GRID and 1 <= self.col and end_col <= GRID):
            raise ValueError(f"placement {self} does not fit on the {GRID}x{GRID} grid")

    def tiles(self) -> tuple[tuple[int, int], ...]:
        if self.orientation == "H":
            return tuple((self.row, self.col + k) for k in range(self.size))
        return tuple((self.row + k, self.col) for k in range(self.size))

    def tile_indices(self) -> tuple[int, ...]:
        return tuple(loc_index(r, c) for r, c in self.tiles())

    def tile_mask(self) -> int:
        mask = 0
        for idx in self.tile_indices():
            mask |= 1 << idx
        return mask

    @property
    def code(self) -> int:
        """Canonical integer encoding; sort key for deterministic orders."""
        orient_bit = 0 if self.orientation == "H" else 1
        return ((self.size - 2) * 2 + orient_bit) * N_TILES + loc_index(self.row, self.col)


def enumerate_placements(size: int) -> list[ShipPlacement]:
    """Every in-bounds color-agnostic placement of a `size`-tile ship.

    Count is 2 * 6 * (7 - size): both orientations, 6 lanes, 7 - size anchors.
    """
    if size not in SHIP_SIZES:
        raise ValueError(f"ship size must be one of {SHIP_SIZES}, got {size}")
    out = []
    for orientation in ("H", "V"):
        for row in range(1, GRID + 1):
            for col in range(1, GRID + 1):
                try:
                    out.append(ShipPlacement(size, orientation, row, col))
                except ValueError:
                    continue
    return sorted(out, key=lambda p: p.code)


@dataclass(frozen=True)
class Board:
    """A fully specified world state: one Blue, Red, Purple ship each.

    `ships` is ordered (Blue, Red, Purple). Tiles not covered by a ship
    are Water.
    """

    ships: tuple[ShipPlacement, ShipPlacement, ShipPlacement]

    def __post_init__(self):
        colors = tuple(s.color for s in self.ships)
        if colors != SHIP_COLORS:
            raise ValueError(f"ships must be (Blue, Red, Purple) in order, got {colors}")
        masks = [s.tile_mask() for s in self.ships]
        if (masks[0] & masks[1]) or (masks[0] & masks[2]) or (masks[1] & masks[2]):
            raise ValueError("ship placements overlap")

    def ship(self, color: str) -> ShipPlacement:
        return self.ships[SHIP_COLORS.index(color)]

    def tile_codes(self) -> np.ndarray:
        """Row-major (36,) uint8 array of COLOR_CODES values."""
        codes = np.zeros(N_TILES, dtype=np.uint8)
        for ship in self.ships:
            for idx in ship.tile_indices():
                codes[idx] = COLOR_CODES[ship.color]
        return codes

    def color_at(self, row: int, col: int) -> str:
        return CODE_COLORS[int(self.tile_codes()[loc_index(row, col)])]

    def tile_colors(self) -> dict[tuple[int, int], str]:
        codes = self.tile_codes()
        return {
            (r, c): CODE_COLORS[int(codes[loc_index(r, c)])]
            for r in range(1, GRID + 1)
            for c in range(1, GRID + 1)
        }

    def canonical_code(self) -> tuple[int, int, int]:
        return tuple(s.code for s in self.ships)

    def to_grid(self) -> list[list[str]]:
        codes = self.tile_codes()
        return [
            [_CODE_CHARS[int(codes[loc_index(r, c)])] for c in range(1, GRID + 1)]
            for r in range(1, GRID + 1)
        ]

    @classmethod
    def from_grid(cls, grid: list[list[str]]) -> "Board":
        """Reconstruct a Board from a fully revealed 6x6 grid of B/R/P/W."""
        if len(grid) != GRID or any(len(row) != GRID for row in grid):
            raise ValueError("grid must be 6x6")
        by_color: dict[str, list[tuple[int, int]]] = {c: [] for c in SHIP_COLORS}
        for r0, row in enumerate(grid):
            for c0, cell in enumerate(row):
                if cell == "W":
                    continue
                if cell == "?":
                    raise ValueError("board grid may not contain hidden tiles")
                if cell not in ("B", "R", "P"):
                    raise ValueError(f"unknown grid cell {cell!r}")
                color = {"B": "Blue", "R": "Red", "P": "Purple"}[cell]
                by_color[color].append((r0 + 1, c0 + 1))
        ships = []
        for color in SHIP_COLORS:
            tiles = sorted(by_color[color])
            if not tiles:
                raise ValueError(f"board has no {color} ship")
            rows = {r for r, _ in tiles}
            cols = {c for _, c in tiles}
            if len(rows) == 1 and len(cols) == len(tiles):
                orientation = "H"
                contiguous = cols == set(range(min(cols), min(cols) + len(tiles)))
            elif len(cols) == 1 and len(rows) == len(tiles):
                orientation = "V"
                contiguous = rows == set(range(min(rows), min(rows) + len(tiles)))
            else:
                raise ValueError(f"{color} tiles do not form a 1-wide line")
            if not contiguous:
                raise ValueError(f"{color} tiles are not contiguous")
            ships.append(
                ShipPlacement(len(tiles), orientation, tiles[0][0], tiles[0][1], color)
            )
        return cls(tuple(ships))

    @classmethod
    def from_json(cls, path: str | Path) -> "Board":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls.from_grid(payload["grid"])


@dataclass(frozen=True)
class Context:
    """A partially revealed board: the evidence that conditions the belief."""

    id: str
    grid: tuple  # 6 tuples of 6 ints: COLOR_CODES values or HIDDEN

    @classmethod
    def from_cells(cls, id: str, cells: list[list[str]]) -> "Context":
        if len(cells) != GRID or any(len(row) != GRID for row in cells):
            raise ValueError("context grid must be 6x6")
        rows = []
        for row in cells:
            try:
                rows.append(tuple(_GRID_CHARS[cell] for cell in row))
            except KeyError as exc:
                raise ValueError(f"unknown context cell {exc.args[0]!r}") from None
        return cls(id=str(id), grid=tuple(rows))

    @classmethod
    def from_json(cls, path: str | Path) -> "Context":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls.from_cells(payload["id"], payload["grid"])

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "grid": [[_CODE_CHARS[v] for v in row] for row in self.grid],
        }

    def revealed(self) -> tuple[np.ndarray, np.ndarray]:
        """(tile indices, color codes) of the revealed cells."""
        idx, vals = [], []
        for r in range(GRID):
            for c in range(GRID):
                v = self.grid[r][c]
                if v != HIDDEN:
                    idx.append(r * GRID + c)
                    vals.append(v)
        return np.asarray(idx, dtype=np.int64), np.asarray(vals, dtype=np.uint8)

    @property
    def n_revealed(self) -> int:
        return sum(1 for row in self.grid for v in row if v != HIDDEN)

    def digest(self) -> str:
        body = json.dumps(self.to_json_obj(), sort_keys=True).encode()
        return hashlib.sha256(body).hexdigest()[:16]


def reveal_context(board: Board, tiles: list[int] | list[str], id: str) -> Context:
    """Context exposing the given tiles (indices or names) of `board`."""
    codes = board.tile_codes()
    grid = [[HIDDEN] * GRID for _ in range(GRID)]
    for t in tiles:
        idx = parse_loc(t) if isinstance(t, str) else int(t)
        if idx is None or not 0 <= idx < N_TILES:
            raise ValueError(f"bad tile {t!r}")
        grid[idx // GRID][idx % GRID] = int(codes[idx])
    return Context(id=str(id), grid=tuple(tuple(row) for row in grid))


@dataclass(frozen=True)
class BoardArrays:
    """Packed per-board arrays consumed by the evaluation kernels."""

    tiles: np.ndarray  # (K, 36) uint8 color codes
    sizes: np.ndarray  # (K, 3) uint8
    orients: np.ndarray  # (K, 3) uint8, 0 = H, 1 = V
    touches: np.ndarray  # (K, 3) uint8 per TOUCH_PAIRS

    def __len__(self):
        return self.tiles.shape[0]


def _placement_tables(placements: list[ShipPlacement]):
    n = len(placements)
    tiles = np.zeros((n, N_TILES), dtype=np.uint8)
    sizes = np.empty(n, dtype=np.uint8)
    orients = np.empty(n, dtype=np.uint8)
    masks = np.empty(n, dtype=np.uint64)
    for i, p in enumerate(placements):
        for idx in p.tile_indices():
            tiles[i, idx] = 1
        sizes[i] = p.size
        orients[i] = 0 if p.orientation == "H" else 1
        masks[i] = p.tile_mask()
    # Orthogonal adjacency between placements (diagonal does not count).
    grid = tiles.reshape(n, GRID, GRID).astype(bool)
    nbrs = np.zeros_like(grid)
    nbrs[:, :-1, :] |= grid[:, 1:, :]
    nbrs[:, 1:, :] |= grid[:, :-1, :]
    nbrs[:, :, :-1] |= grid[:, :, 1:]
    nbrs[:, :, 1:] |= grid[:, :, :-1]
    flat_n = nbrs.reshape(n, N_TILES)
    flat_g = grid.reshape(n, N_TILES)
    adjacency = (flat_n[:, None, :] & flat_g[None, :, :]).any(axis=2)
    return tiles, sizes, orients, masks, adjacency


class HypothesisSpace:
    """All boards under consideration, as packed arrays plus lazy Board views.

    Acts as an immutable sequence of Board. The full 6x6 space holds about
    1.6 million boards, so Board objects are materialized on demand while
    bulk operations run on the packed arrays.
    """

    def __init__(self, placements: list[ShipPlacement], ids: np.ndarray):
        self.placements = list(placements)
        self.ids = np.ascontiguousarray(ids, dtype=np.int16)
        tiles, sizes, orients, masks, adjacency = _placement_tables(self.placements)
        self._placement_tiles = tiles
        self._placement_masks = masks
        k = self.ids.shape[0]
        packed_tiles = np.zeros((k, N_TILES), dtype=np.uint8)
        for ship_i in range(3):
            packed_tiles += tiles[self.ids[:, ship_i]] * np.uint8(ship_i + 1)
        packed_sizes = sizes[self.ids]
        packed_orients = orients[self.ids]
        packed_touch = np.empty((k, 3), dtype=np.uint8)
        for pair_i, (a, b) in enumerate(TOUCH_PAIRS):
            packed_touch[:, pair_i] = adjacency[self.ids[:, a], self.ids[:, b]]
        self.arrays = BoardArrays(packed_tiles, packed_sizes, packed_orients, packed_touch)
        self._posterior_cache: dict[tuple[str, str], np.ndarray] = {}

    # -- sequence protocol ------------------------------------------------
    def __len__(self):
        return self.ids.shape[0]

    def board(self, i: int) -> Board:
        ships = tuple(
            replace(self.placements[self.ids[i, ship_i]], color=SHIP_COLORS[ship_i])
            for ship_i in range(3)
        )
        return Board(ships)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self.board(j) for j in range(*i.indices(len(self)))]
        return self.board(int(i))

    def __iter__(self):
        for i in range(len(self)):
            yield self.board(i)

    # -- derived data ------------------------------------------------------
    def canonical_codes(self) -> np.ndarray:
        """(K, 3) placement codes (Blue, Red, Purple); rows are unique."""
        codes = np.asarray([p.code for p in self.placements], dtype=np.int32)
        return codes[self.ids]

    def size_triple_index(self) -> np.ndarray:
        """(K,) index 0..26 encoding the (Blue, Red, Purple) size triple."""
        s = self.arrays.sizes.astype(np.int64) - 2
        return s[:, 0] * 9 + s[:, 1] * 3 + s[:, 2]

    def subset_arrays(self, indices: np.ndarray) -> BoardArrays:
        a = self.arrays
        return BoardArrays(
            np.ascontiguousarray(a.tiles[indices]),
            np.ascontiguousarray(a.sizes[indices]),
            np.ascontiguousarray(a.orients[indices]),
            np.ascontiguousarray(a.touches[indices]),
        )

    @classmethod
    def from_boards(cls, boards: list[Board]) -> "HypothesisSpace":
        """Pack an explicit list of boards (deduplicated, order preserved)."""
        placements: list[ShipPlacement] = []
        index: dict[int, int] = {}
        rows = []
        seen = set()
        for b in boards:
            code = b.canonical_code()
            if code in seen:
                continue
            seen.add(code)
            row = []
            for ship in b.ships:
                geom = replace(ship, color=None)
                key = geom.code
                if key not in index:
                    index[key] = len(placements)
                    placements.append(geom)
                row.append(index[key])
            rows.append(row)
        return cls(placements, np.asarray(rows, dtype=np.int16).reshape(-1, 3))


_FULL_SPACE: HypothesisSpace | None = None


def enumerate_hypotheses(force_rebuild: bool = False) -> HypothesisSpace:
    """The full hypothesis space: every non-overlapping (Blue, Red, Purple)
    triple with sizes independently in {2, 3, 4}.

    Deterministic order: lexicographic in (Blue, Red, Purple) placement
    codes. The result is cached process-wide (it is immutable).
    """
    global _FULL_SPACE
    if _FULL_SPACE is not None and not force_rebuild:
        return _FULL_SPACE
    from . import kernels

    placements = [p for size in SHIP_SIZES for p in enumerate_placements(size)]
    placements.sort(key=lambda p: p.code)
    masks = np.asarray([p.tile_mask() for p in placements], dtype=np.uint64)
    ids = kernels.enumerate_triples(masks)
    _FULL_SPACE = HypothesisSpace(placements, ids)
    return _FULL_SPACE


class Belief:
    """A probability distribution over boards of one HypothesisSpace.

    `indices` points into the space; `weights` are nonnegative and sum to 1.
    Instances are treated as immutable; the packed support arrays are
    materialized lazily and cached.
    """

    def __init__(self, space: HypothesisSpace, indices: np.ndarray, weights: np.ndarray,
                 key: str | None = None):
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if indices.size == 0:
            raise ValueError("belief support may not be empty")
        if indices.size != weights.size:
            raise ValueError("indices and weights must align")
        if np.unique(indices).size != indices.size:
            raise ValueError("belief support must be deduplicated")
        if (weights < 0).any():
            raise ValueError("belief weights must be nonnegative")
        total = weights.sum()
        if not np.isclose(total, 1.0, atol=1e-9):
            raise ValueError(f"belief weights must sum to 1, got {total}")
        self.space = space
        self.indices = indices
        self.weights = weights
        self._arrays: BoardArrays | None = None
        self._key = key

    def __len__(self):
        return self.indices.size

    @property
    def boards(self):
        return [self.space.board(i) for i in self.indices]

    def board(self, k: int) -> Board:
        return self.space.board(int(self.indices[k]))

    @property
    def arrays(self) -> BoardArrays:
        if self._arrays is None:
            self._arrays = self.space.subset_arrays(self.indices)
        return self._arrays

    @property
    def key(self) -> str:
        """Stable identifier used by feature/partition caches."""
        if self._key is None:
            h = hashlib.sha256()
            h.update(self.indices.tobytes())
            h.update(self.weights.tobytes())
            self._key = h.hexdigest()[:16]
        return self._key


def prior(space: HypothesisSpace) -> Belief:
    """The ideal observer's prior: uniform over the 27 size triples, then
    uniform over configurations within each triple."""
    if len(space) == 0:
        raise ValueError("empty hypothesis space")
    tri = space.size_triple_index()
    counts = np.bincount(tri, minlength=27).astype(np.float64)
    weights = 1.0 / (27.0 * counts[tri])
    weights /= weights.sum()
    return Belief(space, np.arange(len(space), dtype=np.int64), weights, key="prior")


def condition(belief: Belief, context: Context) -> Belief:
    """Restrict `belief` to boards matching every revealed tile, renormalized."""
    idx, vals = context.revealed()
    if idx.size == 0:
        return belief
    cache = belief.space._posterior_cache
    cache_key = (context.id, context.digest())
    full = belief.indices.size == len(belief.space) and belief._key == "prior"
    if full and cache_key in cache:
        keep = cache[cache_key]
    else:
        tiles = belief.space.arrays.tiles[belief.indices][:, idx]
        mask = (tiles == vals[None, :]).all(axis=1)
        keep = np.nonzero(mask)[0]
        if full:
            cache[cache_key] = keep
    if keep.size == 0:
        raise InconsistentContextError(
            f"context {context.id!r} is inconsistent with every hypothesis"
        )
    new_idx = belief.indices[keep]
    w = belief.weights[keep]
    w = w / w.sum()
    return Belief(belief.space, new_idx, w, key=f"{belief.key}|ctx:{cache_key[0]}:{cache_key[1]}")


def entropy(belief: Belief) -> float:
    """Shannon entropy of the belief, in bits."""
    w = belief.weights[belief.weights > 0]
    return max(0.0, float(-(w * np.log2(w)).sum()))


def load_context(path: str | Path, space: HypothesisSpace | None = None) -> Context:
    """Load a context file, optionally validating consistency against `space`."""
    ctx = Context.from_json(path)
    if space is not None:
        condition(prior(space), ctx)  # raises InconsistentContextError
    return ctx
