"""Random cut tree with dynamic insert/delete and displacement scoring.

The tree recursively partitions a point set with axis-parallel cuts: the
cut dimension is chosen with probability proportional to the side lengths
of the current bounding box and the cut value uniformly within that side.
Exact duplicate points collapse into a single leaf with a multiplicity
counter. Every mutation maintains bounding boxes, distinct-leaf counts and
the cached model complexity (sum of distinct-leaf depths) along the root
path only, so inserts and deletes cost O(depth).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

__all__ = [
    "Point",
    "Leaf",
    "Branch",
    "InsertReceipt",
    "DeleteReceipt",
    "RandomCutTree",
    "as_point",
    "create_tree",
]

Point = tuple  # tuple[float, ...]; the exact-equality key for one location


def as_point(coords, dim: Optional[int] = None) -> Point:
    """Normalize ``coords`` to a tuple of finite floats.

    Raises ValueError on an empty vector, a non-finite coordinate, or a
    dimension other than ``dim`` (when given).
    """
    pt = tuple(float(c) for c in coords)
    if not pt:
        raise ValueError("a point needs at least one coordinate")
    if dim is not None and len(pt) != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {len(pt)}")
    for c in pt:
        if not math.isfinite(c):
            raise ValueError(f"non-finite coordinate in point {pt!r}")
    return pt


class Leaf:
    """Leaf holding one distinct point and its duplicate count."""

    __slots__ = ("point", "multiplicity", "parent")

    def __init__(self, point: Point, multiplicity: int = 1, parent: "Branch | None" = None):
        self.point = point
        self.multiplicity = multiplicity
        self.parent = parent

    def __repr__(self) -> str:
        return f"Leaf({self.point}, n={self.multiplicity})"


class Branch:
    """Internal node: one axis-parallel cut plus cached subtree summaries.

    ``leaf_count`` counts distinct leaves below (duplicates not counted);
    ``bmin``/``bmax`` are the componentwise bounds of all leaf points below.
    """

    __slots__ = ("cut_dim", "cut_value", "left", "right", "parent", "leaf_count", "bmin", "bmax")

    def __init__(self, cut_dim, cut_value, left=None, right=None, parent=None,
                 leaf_count=0, bmin=None, bmax=None):
        self.cut_dim = cut_dim
        self.cut_value = cut_value
        self.left = left
        self.right = right
        self.parent = parent
        self.leaf_count = leaf_count
        self.bmin = bmin
        self.bmax = bmax

    def __repr__(self) -> str:
        return f"Branch(dim={self.cut_dim}, value={self.cut_value:.6g}, leaves={self.leaf_count})"


@dataclass(slots=True)
class InsertReceipt:
    """Outcome of one insertion.

    ``depth`` is the depth of the (new or duplicate) leaf, ``displaced_count``
    the number of distinct leaves pushed one level down, ``displacement`` the
    resulting model-complexity increase.
    """

    leaf: Leaf
    depth: int
    displaced_count: int
    displacement: int


@dataclass(slots=True)
class DeleteReceipt:
    """Outcome of one deletion; ``removed`` is False for a multiplicity decrement."""

    displacement: int
    removed: bool


class RandomCutTree:
    """Random cut tree over points of a fixed dimension.

    Attributes:
        dim: point dimension, or None until the first point arrives.
        seed: integer the tree's generator was seeded with.
        root: root node (Branch, Leaf, or None for an empty tree).
    """

    def __init__(self, dim: Optional[int] = None, seed: int = 0):
        if dim is not None and dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed
        self.root: Branch | Leaf | None = None
        self._rng = random.Random(seed)
        self._leaves: dict[Point, Leaf] = {}
        self._mc = 0

    # ------------------------------------------------------------------ #
    # queries
    # ------------------------------------------------------------------ #

    @property
    def distinct_count(self) -> int:
        """Number of distinct points (leaves) in the tree."""
        return len(self._leaves)

    def model_complexity(self) -> int:
        """Sum of depths of all distinct leaves (root depth 0)."""
        return self._mc

    def find_leaf(self, point) -> Optional[Leaf]:
        """Return the leaf holding exactly ``point``, or None. O(1) expected."""
        return self._leaves.get(as_point(point, self.dim))

    def leaf_depth(self, leaf: Leaf) -> int:
        """Number of edges between ``leaf`` and the root."""
        depth = 0
        node = leaf.parent
        while node is not None:
            depth += 1
            node = node.parent
        return depth

    def points(self) -> Iterator[Point]:
        """Distinct points currently stored, in insertion order."""
        return iter(self._leaves)

    def iter_nodes(self) -> Iterator[tuple[Branch | Leaf, int]]:
        """Preorder (node, depth) pairs, left child before right."""
        if self.root is None:
            return
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            if node.__class__ is Branch:
                stack.append((node.right, depth + 1))
                stack.append((node.left, depth + 1))

    def iter_leaves(self) -> Iterator[tuple[Leaf, int]]:
        """(leaf, depth) pairs in preorder."""
        for node, depth in self.iter_nodes():
            if node.__class__ is Leaf:
                yield node, depth

    def snapshot(self) -> tuple:
        """Flat preorder description of the full structure.

        Two trees are node-for-node identical (cuts, boxes, counts, points,
        multiplicities) iff their snapshots compare equal.
        """
        out = []
        for node, _ in self.iter_nodes():
            if node.__class__ is Branch:
                out.append(("B", node.cut_dim, node.cut_value, node.bmin, node.bmax, node.leaf_count))
            else:
                out.append(("L", node.point, node.multiplicity))
        return tuple(out)

    # ------------------------------------------------------------------ #
    # mutation
    # ------------------------------------------------------------------ #

    def insert_point(self, point, rng: Optional[random.Random] = None) -> InsertReceipt:
        """Insert ``point``, keeping the tree a valid random cut tree sample.

        A candidate cut over the box enlarged with the new point is drawn at
        each node from the root; the first candidate that separates the point
        from the existing box is spliced in as a new branch, otherwise the
        descent follows the node's existing cut. Exact duplicates increment
        the leaf multiplicity and displace nothing.

        ``rng`` overrides the tree's own generator (used for scoring with
        externally derived randomness). Returns an InsertReceipt.
        """
        x = as_point(point, self.dim)
        if self.dim is None:
            self.dim = len(x)
        existing = self._leaves.get(x)
        if existing is not None:
            existing.multiplicity += 1
            return InsertReceipt(existing, self.leaf_depth(existing), 0, 0)
        if self.root is None:
            leaf = Leaf(x)
            self.root = leaf
            self._leaves[x] = leaf
            return InsertReceipt(leaf, 0, 0, 0)
        if rng is None:
            rng = self._rng
        rand = rng.random

        node = self.root
        depth = 0
        while True:
            node_is_branch = node.__class__ is Branch
            if node_is_branch:
                bmin = node.bmin
                bmax = node.bmax
                # a point inside the box cannot be separated here (the
                # enlarged box is the box itself), so the candidate draw
                # would be discarded anyway: descend straight away
                extends = False
                for lo, hi, xi in zip(bmin, bmax, x):
                    if xi < lo or xi > hi:
                        extends = True
                        break
                if not extends:
                    if x[node.cut_dim] <= node.cut_value:
                        node = node.left
                    else:
                        node = node.right
                    depth += 1
                    continue
            else:
                bmin = bmax = node.point
            # span of the box enlarged to include x
            total = 0.0
            for lo, hi, xi in zip(bmin, bmax, x):
                if xi < lo:
                    lo = xi
                elif xi > hi:
                    hi = xi
                total += hi - lo
            target = rand() * total
            cut_dim = -1
            cut = 0.0
            i = 0
            fb_dim = -1
            fb_lo = fb_hi = 0.0
            for lo, hi, xi in zip(bmin, bmax, x):
                if xi < lo:
                    lo = xi
                elif xi > hi:
                    hi = xi
                w = hi - lo
                if target < w:
                    cut_dim = i
                    cut = lo + target
                    break
                if w > 0.0:
                    fb_dim = i
                    fb_lo = lo
                    fb_hi = hi
                target -= w
                i += 1
            if cut_dim < 0:
                # round-off pushed the draw past the final span
                cut_dim = fb_dim
                cut = fb_lo + 0.5 * (fb_hi - fb_lo)
            if cut < bmin[cut_dim]:
                new_on_left = True
                break
            if cut >= bmax[cut_dim]:
                new_on_left = False
                break
            if not node_is_branch:
                raise RuntimeError("cut failed to separate a distinct point at a leaf")
            if x[node.cut_dim] <= node.cut_value:
                node = node.left
            else:
                node = node.right
            depth += 1

        # splice a new branch where the search stopped
        parent = node.parent
        leaf = Leaf(x)
        displaced = node.leaf_count if node.__class__ is Branch else 1
        if new_on_left:
            branch = Branch(cut_dim, cut, left=leaf, right=node)
        else:
            branch = Branch(cut_dim, cut, left=node, right=leaf)
        branch.leaf_count = displaced + 1
        nmin = []
        nmax = []
        for lo, hi, xi in zip(bmin, bmax, x):
            nmin.append(xi if xi < lo else lo)
            nmax.append(xi if xi > hi else hi)
        branch.bmin = tuple(nmin)
        branch.bmax = tuple(nmax)
        leaf.parent = branch
        node.parent = branch
        branch.parent = parent
        if parent is None:
            self.root = branch
        elif parent.left is node:
            parent.left = branch
        else:
            parent.right = branch

        # root-path maintenance: counts always, boxes until x is contained
        anc = parent
        box_open = True
        while anc is not None:
            anc.leaf_count += 1
            if box_open:
                amin = anc.bmin
                amax = anc.bmax
                grew = False
                for lo, hi, xi in zip(amin, amax, x):
                    if xi < lo or xi > hi:
                        grew = True
                        break
                if grew:
                    anc.bmin = tuple(xi if xi < lo else lo for lo, xi in zip(amin, x))
                    anc.bmax = tuple(xi if xi > hi else hi for hi, xi in zip(amax, x))
                else:
                    box_open = False
            anc = anc.parent

        delta = depth + 1 + displaced
        self._mc += delta
        self._leaves[x] = leaf
        return InsertReceipt(leaf, depth + 1, displaced, delta)

    def delete_point(self, point) -> DeleteReceipt:
        """Remove one occurrence of ``point``.

        A multiplicity above one is just decremented; otherwise the leaf's
        parent is spliced out and the sibling subtree takes its place, with
        boxes and counts repaired along the root path. Raises KeyError when
        the point is absent.
        """
        x = as_point(point, self.dim)
        leaf = self._leaves.get(x)
        if leaf is None:
            raise KeyError(f"point {x!r} is not in the tree")
        if leaf.multiplicity > 1:
            leaf.multiplicity -= 1
            return DeleteReceipt(0, False)
        del self._leaves[x]
        parent = leaf.parent
        if parent is None:
            self.root = None
            return DeleteReceipt(0, True)

        depth = 1
        anc = parent.parent
        while anc is not None:
            depth += 1
            anc = anc.parent
        sibling = parent.right if parent.left is leaf else parent.left
        displaced = sibling.leaf_count if sibling.__class__ is Branch else 1

        grand = parent.parent
        sibling.parent = grand
        if grand is None:
            self.root = sibling
        elif grand.left is parent:
            grand.left = sibling
        else:
            grand.right = sibling

        anc = grand
        box_open = True
        while anc is not None:
            anc.leaf_count -= 1
            if box_open:
                left = anc.left
                right = anc.right
                if left.__class__ is Branch:
                    lmin, lmax = left.bmin, left.bmax
                else:
                    lmin = lmax = left.point
                if right.__class__ is Branch:
                    rmin, rmax = right.bmin, right.bmax
                else:
                    rmin = rmax = right.point
                nmin = tuple(a if a < b else b for a, b in zip(lmin, rmin))
                nmax = tuple(a if a > b else b for a, b in zip(lmax, rmax))
                if nmin == anc.bmin and nmax == anc.bmax:
                    box_open = False
                else:
                    anc.bmin = nmin
                    anc.bmax = nmax
            anc = anc.parent

        delta = depth + displaced
        self._mc -= delta
        return DeleteReceipt(delta, True)

    # ------------------------------------------------------------------ #
    # displacement scores
    # ------------------------------------------------------------------ #

    def displacement_on_insert(self, point, rng: Optional[random.Random] = None) -> int:
        """Model-complexity increase of one random insertion of ``point``.

        Implemented as insert, record the delta, delete: the delete splice
        exactly undoes the insertion so the structure is unchanged. Exact
        duplicates score 0.
        """
        receipt = self.insert_point(point, rng=rng)
        self.delete_point(point)
        return receipt.displacement

    def displacement_of_member(self, point) -> int:
        """Model-complexity drop if the distinct leaf at ``point`` were removed.

        Equals leaf depth plus the distinct-leaf count of its sibling subtree;
        deterministic and non-mutating. Raises KeyError when absent.
        """
        x = as_point(point, self.dim)
        leaf = self._leaves.get(x)
        if leaf is None:
            raise KeyError(f"point {x!r} is not in the tree")
        parent = leaf.parent
        if parent is None:
            return 0
        sibling = parent.right if parent.left is leaf else parent.left
        displaced = sibling.leaf_count if sibling.__class__ is Branch else 1
        return self.leaf_depth(leaf) + displaced


def create_tree(points: Sequence, seed: int, dim: Optional[int] = None) -> RandomCutTree:
    """Build a random cut tree over ``points``, deterministically for ``seed``.

    Duplicate points collapse into multiplicity leaves. An empty ``points``
    yields an empty tree. Raises ValueError on mixed dimensions or non-finite
    coordinates.
    """
    pts = [as_point(p) for p in points]
    if pts:
        d = len(pts[0])
        for p in pts:
            if len(p) != d:
                raise ValueError(f"dimension mismatch: expected {d}, got {len(p)}")
        if dim is not None and dim != d:
            raise ValueError(f"expected points of dimension {dim}, got {d}")
    else:
        d = dim
    tree = RandomCutTree(dim=d, seed=seed)
    if not pts:
        return tree

    X = np.asarray(pts, dtype=np.float64)
    distinct, counts = np.unique(X, axis=0, return_counts=True)
    rng = tree._rng
    leaves = tree._leaves

    # preorder build with an explicit stack; left pushed last so the draw
    # order is parent, full left subtree, full right subtree
    ROOT, LEFT, RIGHT = 0, 1, 2
    stack: list = [(None, ROOT, np.arange(len(distinct)), 0)]
    while stack:
        parent, side, idx, depth = stack.pop()
        if idx.size == 1:
            i = int(idx[0])
            node: Branch | Leaf = Leaf(tuple(map(float, distinct[i])), int(counts[i]), parent)
            tree._mc += depth
            leaves[node.point] = node
        else:
            rows = distinct[idx]
            mins = rows.min(axis=0)
            maxs = rows.max(axis=0)
            spans = maxs - mins
            target = rng.random() * float(spans.sum())
            cut_dim = -1
            fb_dim = -1
            for i, w in enumerate(spans):
                if target < w:
                    cut_dim = i
                    break
                if w > 0.0:
                    fb_dim = i
                target -= w
            if cut_dim < 0:
                cut_dim = fb_dim
                cut = float(mins[fb_dim] + 0.5 * spans[fb_dim])
            else:
                cut = float(mins[cut_dim] + target)
            mask = rows[:, cut_dim] <= cut
            node = Branch(cut_dim, cut, parent=parent, leaf_count=int(idx.size),
                          bmin=tuple(map(float, mins)), bmax=tuple(map(float, maxs)))
            stack.append((node, RIGHT, idx[~mask], depth + 1))
            stack.append((node, LEFT, idx[mask], depth + 1))
        if side == ROOT:
            tree.root = node
        elif side == LEFT:
            parent.left = node
        else:
            parent.right = node
    return tree
