"""Core graph machinery: DAGs, partially directed graphs, layerings.

Nodes are dense 0-based indices; labels are metadata only.  All graph
types are immutable after construction, so queries are pure and safe to
call concurrently.
"""

from __future__ import annotations

import itertools
from collections import deque

from .errors import CycleError, InconsistencyError, LabelMismatchError

__all__ = [
    "Dag",
    "Pdag",
    "PartialOrdering",
    "SepsetMap",
    "apply_meek_rules",
    "orient_v_structures",
    "read_edgelist",
    "write_edgelist",
    "read_layering",
    "write_layering",
]


def _check_node(n_nodes, v):
    if not (0 <= v < n_nodes):
        raise ValueError(f"node index {v} out of range [0, {n_nodes})")


class Dag:
    """Directed acyclic graph over ``n_nodes`` indexed nodes.

    Parameters
    ----------
    n_nodes : int
        Number of nodes.
    edges : iterable of (int, int)
        Directed edges as ``(parent, child)`` pairs.
    labels : sequence of str, optional
        Per-node names.  Defaults to ``V0, V1, ...``.

    Raises
    ------
    CycleError
        If the edge set admits no topological sort.
    ValueError
        On self-loops or out-of-range indices.
    """

    def __init__(self, n_nodes, edges=(), labels=None):
        self.n_nodes = int(n_nodes)
        edge_set = set()
        for u, v in edges:
            u, v = int(u), int(v)
            _check_node(self.n_nodes, u)
            _check_node(self.n_nodes, v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            edge_set.add((u, v))
        self.edges = frozenset(edge_set)
        if labels is None:
            labels = [f"V{i}" for i in range(self.n_nodes)]
        if len(labels) != self.n_nodes:
            raise ValueError("labels must have one entry per node")
        self.labels = tuple(str(x) for x in labels)

        self._parents = [set() for _ in range(self.n_nodes)]
        self._children = [set() for _ in range(self.n_nodes)]
        for u, v in self.edges:
            self._parents[v].add(u)
            self._children[u].add(v)
        self._topo = self._topological_sort()

    def _topological_sort(self):
        indeg = [len(self._parents[v]) for v in range(self.n_nodes)]
        queue = deque(v for v in range(self.n_nodes) if indeg[v] == 0)
        order = []
        while queue:
            u = queue.popleft()
            order.append(u)
            for w in sorted(self._children[u]):
                indeg[w] -= 1
                if indeg[w] == 0:
                    queue.append(w)
        if len(order) < self.n_nodes:
            cycle = [v for v in range(self.n_nodes) if indeg[v] > 0]
            raise CycleError(cycle)
        return tuple(order)

    # -- basic queries ------------------------------------------------

    def parents(self, j):
        _check_node(self.n_nodes, j)
        return frozenset(self._parents[j])

    def children(self, j):
        _check_node(self.n_nodes, j)
        return frozenset(self._children[j])

    def adjacent(self, j):
        _check_node(self.n_nodes, j)
        return frozenset(self._parents[j] | self._children[j])

    def has_edge(self, u, v):
        return (u, v) in self.edges

    def is_adjacent(self, u, v):
        return (u, v) in self.edges or (v, u) in self.edges

    def topological_order(self):
        return self._topo

    def ancestors(self, nodes):
        """Return ``nodes`` together with all their strict ancestors."""
        out = set()
        stack = list(nodes)
        for v in stack:
            _check_node(self.n_nodes, v)
        while stack:
            v = stack.pop()
            if v in out:
                continue
            out.add(v)
            stack.extend(self._parents[v])
        return frozenset(out)

    def descendants(self, nodes):
        """Return ``nodes`` together with all their strict descendants."""
        out = set()
        stack = list(nodes)
        for v in stack:
            _check_node(self.n_nodes, v)
        while stack:
            v = stack.pop()
            if v in out:
                continue
            out.add(v)
            stack.extend(self._children[v])
        return frozenset(out)

    # -- d-separation -------------------------------------------------

    def is_dsep(self, i, j, s):
        """Check whether ``s`` d-separates nodes ``i`` and ``j``.

        Implemented by reachability on the moralized ancestral subgraph
        (Lauritzen): restrict to ancestors of ``{i, j} | s``, marry
        parents, drop directions, delete ``s``, and test connectivity.
        """
        s = frozenset(int(v) for v in s)
        i, j = int(i), int(j)
        _check_node(self.n_nodes, i)
        _check_node(self.n_nodes, j)
        for v in s:
            _check_node(self.n_nodes, v)
        if i == j:
            raise ValueError("i and j must be distinct")
        if i in s or j in s:
            raise ValueError("conditioning set must not contain i or j")

        anc = self.ancestors({i, j} | s)
        moral = {v: set() for v in anc}
        for v in anc:
            pars = self._parents[v] & anc
            for p in pars:
                moral[v].add(p)
                moral[p].add(v)
            for p, q in itertools.combinations(pars, 2):
                moral[p].add(q)
                moral[q].add(p)
        # BFS from i avoiding s
        seen = {i}
        queue = deque([i])
        while queue:
            u = queue.popleft()
            for w in moral[u]:
                if w in s or w in seen:
                    continue
                if w == j:
                    return False
                seen.add(w)
                queue.append(w)
        return True

    # -- derived structures -------------------------------------------

    def v_structures(self):
        """Unshielded colliders as triples ``(i, j, k)`` with ``i < k``."""
        out = set()
        for j in range(self.n_nodes):
            for i, k in itertools.combinations(sorted(self._parents[j]), 2):
                if not self.is_adjacent(i, k):
                    out.add((i, j, k))
        return frozenset(out)

    def skeleton(self):
        und = {(min(u, v), max(u, v)) for u, v in self.edges}
        return Pdag(self.n_nodes, directed_edges=(), undirected_edges=und, labels=self.labels)

    def cross_edges(self, ordering):
        """Edges whose endpoints lie in different layers of ``ordering``."""
        return frozenset(
            (u, v) for u, v in self.edges if u in ordering.before_set(v)
        )

    def within_edges(self, ordering):
        return self.edges - self.cross_edges(ordering)

    def __eq__(self, other):
        return (
            isinstance(other, Dag)
            and self.n_nodes == other.n_nodes
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.n_nodes, self.edges))

    def __repr__(self):
        return f"Dag(n_nodes={self.n_nodes}, edges={sorted(self.edges)})"


class Pdag:
    """Partially directed graph: disjoint directed and undirected edge sets."""

    def __init__(self, n_nodes, directed_edges=(), undirected_edges=(), labels=None):
        self.n_nodes = int(n_nodes)
        directed = set()
        for u, v in directed_edges:
            u, v = int(u), int(v)
            _check_node(self.n_nodes, u)
            _check_node(self.n_nodes, v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            directed.add((u, v))
        undirected = set()
        for e in undirected_edges:
            u, v = (int(x) for x in e)
            _check_node(self.n_nodes, u)
            _check_node(self.n_nodes, v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            undirected.add((min(u, v), max(u, v)))
        for u, v in directed:
            if (v, u) in directed:
                raise InconsistencyError((u, v), message=f"edge {(u, v)} directed both ways")
            if (min(u, v), max(u, v)) in undirected:
                raise ValueError(f"pair {(u, v)} is both directed and undirected")
        self.directed_edges = frozenset(directed)
        self.undirected_edges = frozenset(undirected)
        if labels is None:
            labels = [f"V{i}" for i in range(self.n_nodes)]
        self.labels = tuple(str(x) for x in labels)

    def is_adjacent(self, u, v):
        return (
            (u, v) in self.directed_edges
            or (v, u) in self.directed_edges
            or (min(u, v), max(u, v)) in self.undirected_edges
        )

    def adjacency_pairs(self):
        """All adjacent pairs as ``(min, max)`` tuples."""
        out = {(min(u, v), max(u, v)) for u, v in self.directed_edges}
        return frozenset(out | self.undirected_edges)

    def __eq__(self, other):
        return (
            isinstance(other, Pdag)
            and self.n_nodes == other.n_nodes
            and self.directed_edges == other.directed_edges
            and self.undirected_edges == other.undirected_edges
        )

    def __hash__(self):
        return hash((self.n_nodes, self.directed_edges, self.undirected_edges))

    def __repr__(self):
        return (
            f"Pdag(n_nodes={self.n_nodes}, directed={sorted(self.directed_edges)}, "
            f"undirected={sorted(self.undirected_edges)})"
        )


class PartialOrdering:
    """Ordered partition of nodes into layers, with optional extras.

    ``layers`` is an ordered list of disjoint node sets ``V1 < V2 < ...``;
    ``unordered`` holds nodes with no ordering information.  Together they
    must partition ``{0, ..., n_nodes - 1}``.  Optional per-node ``before``
    and ``after`` sets override the layer-derived order information for
    weaker kinds of partial orderings.
    """

    def __init__(self, layers, n_nodes=None, unordered=(), before=None, after=None):
        self.layers = tuple(frozenset(int(v) for v in layer) for layer in layers)
        self.unordered = frozenset(int(v) for v in unordered)
        counted = [v for layer in self.layers for v in layer] + list(self.unordered)
        if n_nodes is None:
            n_nodes = len(counted)
        self.n_nodes = int(n_nodes)
        if sorted(counted) != list(range(self.n_nodes)):
            raise ValueError("layers plus unordered must partition the node set")
        self._layer_of = {}
        for idx, layer in enumerate(self.layers):
            for v in layer:
                self._layer_of[v] = idx

        self.before = None if before is None else {int(j): frozenset(map(int, s)) for j, s in before.items()}
        self.after = None if after is None else {int(j): frozenset(map(int, s)) for j, s in after.items()}
        self._validate_overrides()

    def _validate_overrides(self):
        for name, table in (("before", self.before), ("after", self.after)):
            if table is None:
                continue
            for j, s in table.items():
                _check_node(self.n_nodes, j)
                if j in s:
                    raise ValueError(f"{name} set of node {j} contains the node itself")
        if self.before is None and self.after is None:
            return
        for j in range(self.n_nodes):
            b = self._override(self.before, j)
            a = self._override(self.after, j)
            if b & a:
                raise ValueError(f"before/after sets of node {j} overlap: {sorted(b & a)}")
            lj = self._layer_of.get(j)
            if lj is not None:
                derived_b = self._derived_before(lj)
                derived_a = self._derived_after(lj)
                if not b <= derived_b:
                    raise ValueError(f"before set of layered node {j} exceeds earlier layers")
                if not a <= derived_a:
                    raise ValueError(f"after set of layered node {j} exceeds later layers")

    @staticmethod
    def _override(table, j):
        if table is None or j not in table:
            return frozenset()
        return table[j]

    def _derived_before(self, layer_idx):
        out = set()
        for layer in self.layers[:layer_idx]:
            out |= layer
        return frozenset(out)

    def _derived_after(self, layer_idx):
        out = set()
        for layer in self.layers[layer_idx + 1:]:
            out |= layer
        return frozenset(out)

    @property
    def n_layers(self):
        return len(self.layers)

    def layer_of(self, v):
        """Layer index of ``v``, or None when ``v`` is unordered."""
        _check_node(self.n_nodes, v)
        return self._layer_of.get(v)

    def has_overrides(self):
        return self.before is not None or self.after is not None

    def before_set(self, j):
        """Nodes known to precede ``j`` (the set T< of node ``j``)."""
        _check_node(self.n_nodes, j)
        if self.has_overrides():
            return self._override(self.before, j)
        lj = self._layer_of.get(j)
        return frozenset() if lj is None else self._derived_before(lj)

    def after_set(self, j):
        """Nodes known to succeed ``j`` (the set T> of node ``j``)."""
        _check_node(self.n_nodes, j)
        if self.has_overrides():
            return self._override(self.after, j)
        lj = self._layer_of.get(j)
        return frozenset() if lj is None else self._derived_after(lj)

    def peer_set(self, j):
        """Nodes with no known order relative to ``j``."""
        _check_node(self.n_nodes, j)
        return frozenset(range(self.n_nodes)) - self.before_set(j) - self.after_set(j) - {j}

    def orders_before(self, u, v):
        """True when ``u`` is known to precede ``v``."""
        return u in self.before_set(v) or v in self.after_set(u)

    def to_before_after(self):
        """Per-node ``(before, after)`` tables, one entry per node."""
        return {j: (self.before_set(j), self.after_set(j)) for j in range(self.n_nodes)}

    def __eq__(self, other):
        return (
            isinstance(other, PartialOrdering)
            and self.layers == other.layers
            and self.unordered == other.unordered
            and self.before == other.before
            and self.after == other.after
        )

    def __repr__(self):
        parts = [f"layers={[sorted(l) for l in self.layers]}"]
        if self.unordered:
            parts.append(f"unordered={sorted(self.unordered)}")
        if self.has_overrides():
            parts.append("overrides=...")
        return "PartialOrdering(" + ", ".join(parts) + ")"


class SepsetMap:
    """Separating sets recorded during search, keyed by unordered pair."""

    def __init__(self):
        self._map = {}

    @staticmethod
    def _key(i, j):
        return (min(i, j), max(i, j))

    def record(self, i, j, sepset):
        key = self._key(i, j)
        sepset = frozenset(int(v) for v in sepset)
        if i in sepset or j in sepset:
            raise ValueError("separating set must not contain its endpoints")
        if key in self._map and self._map[key] != sepset:
            raise ValueError(f"pair {key} already has a different separating set")
        self._map[key] = sepset

    def get(self, i, j):
        return self._map.get(self._key(i, j))

    def __contains__(self, pair):
        return self._key(*pair) in self._map

    def items(self):
        return sorted(self._map.items())

    def __len__(self):
        return len(self._map)

    def __eq__(self, other):
        return isinstance(other, SepsetMap) and self._map == other._map


# -- orientation ------------------------------------------------------


class _OrientationState:
    """Mutable adjacency store used while orienting a Pdag."""

    def __init__(self, pdag):
        self.n_nodes = pdag.n_nodes
        self.labels = pdag.labels
        self.directed = set(pdag.directed_edges)
        self.undirected = set(pdag.undirected_edges)
        self._parents = [set() for _ in range(self.n_nodes)]
        self._children = [set() for _ in range(self.n_nodes)]
        self._neigh = [set() for _ in range(self.n_nodes)]
        for u, v in self.directed:
            self._parents[v].add(u)
            self._children[u].add(v)
        for u, v in self.undirected:
            self._neigh[u].add(v)
            self._neigh[v].add(u)

    def is_adjacent(self, u, v):
        return v in self._neigh[u] or v in self._children[u] or v in self._parents[u]

    def orient(self, u, v, on_conflict="error", context=None):
        """Turn edge u-v into u->v.  Returns True if anything changed."""
        if (u, v) in self.directed:
            return False
        if (v, u) in self.directed:
            if on_conflict != "ignore":
                raise InconsistencyError((u, v), triple=context)
            return False  # keep the existing orientation
        key = (min(u, v), max(u, v))
        if key not in self.undirected:
            raise ValueError(f"pair {(u, v)} is not adjacent")
        self.undirected.discard(key)
        self._neigh[u].discard(v)
        self._neigh[v].discard(u)
        self.directed.add((u, v))
        self._parents[v].add(u)
        self._children[u].add(v)
        return True

    def to_pdag(self):
        return Pdag(self.n_nodes, self.directed, self.undirected, labels=self.labels)


def orient_v_structures(skeleton, sepsets, on_conflict="error"):
    """Orient unshielded colliders of ``skeleton`` using recorded sepsets.

    For every unshielded triple i-j-k whose endpoints have a recorded
    separating set not containing j, orients i->j<-k.  Triples whose pair
    has no recorded sepset are left untouched.  Conflicting orientations
    raise :class:`InconsistencyError` unless ``on_conflict="ignore"``,
    in which case the earlier orientation wins.
    """
    state = _OrientationState(skeleton)
    triples = []
    for j in range(skeleton.n_nodes):
        nbrs = sorted(
            v for v in range(skeleton.n_nodes) if v != j and state.is_adjacent(j, v)
        )
        for i, k in itertools.combinations(nbrs, 2):
            if not state.is_adjacent(i, k):
                triples.append((i, j, k))
    for i, j, k in sorted(triples):
        sep = sepsets.get(i, k)
        if sep is None or j in sep:
            continue
        state.orient(i, j, on_conflict=on_conflict, context=(i, j, k))
        state.orient(k, j, on_conflict=on_conflict, context=(i, j, k))
    return state.to_pdag()


def apply_meek_rules(pdag, background_directed=(), on_conflict="error"):
    """Close ``pdag`` under Meek's orientation rules R1-R4.

    ``background_directed`` supplies known orientations (e.g. from a
    layering); each pair must already be adjacent in ``pdag``.  The edge
    scan is deterministic (lexicographic by (min, max) pair), adjacencies
    are never created or removed, and the result is maximal with respect
    to the inputs.

    Raises
    ------
    InconsistencyError
        If an edge is forced in both directions (unless
        ``on_conflict="ignore"``).
    """
    state = _OrientationState(pdag)
    for u, v in sorted(background_directed):
        if not state.is_adjacent(u, v):
            raise ValueError(f"background edge {(u, v)} is not an adjacency of the graph")
        state.orient(u, v, on_conflict=on_conflict)

    def rule_applies(a, b):
        # R1: x -> a - b with x, b nonadjacent  =>  a -> b
        for x in sorted(state._parents[a]):
            if x != b and not state.is_adjacent(x, b):
                return True
        # R2: a -> x -> b with a - b  =>  a -> b
        for x in sorted(state._children[a]):
            if b in state._children[x]:
                return True
        # R3: a - x -> b, a - y -> b, x and y nonadjacent  =>  a -> b
        cands = sorted(state._neigh[a] & state._parents[b])
        for x, y in itertools.combinations(cands, 2):
            if not state.is_adjacent(x, y):
                return True
        # R4: a ~ x (any edge), x -> y -> b, x and b nonadjacent  =>  a -> b
        for x in range(state.n_nodes):
            if x in (a, b) or not state.is_adjacent(a, x):
                continue
            if state.is_adjacent(x, b):
                continue
            for y in sorted(state._children[x] & state._parents[b]):
                if y != a:
                    return True
        return False

    changed = True
    while changed:
        changed = False
        for u, v in sorted(state.undirected):
            if rule_applies(u, v):
                state.orient(u, v, on_conflict=on_conflict)
                changed = True
            elif rule_applies(v, u):
                state.orient(v, u, on_conflict=on_conflict)
                changed = True
    return state.to_pdag()


# -- text formats -----------------------------------------------------


def write_edgelist(directed_edges, labels, undirected_edges=()):
    """Render edges in the tab-separated text format.

    One ``parent<TAB>child`` line per directed edge and
    ``a<TAB>b<TAB>u`` per undirected edge, sorted for determinism.
    """
    lines = []
    for u, v in sorted(directed_edges):
        lines.append(f"{labels[u]}\t{labels[v]}")
    for u, v in sorted((min(a, b), max(a, b)) for a, b in undirected_edges):
        lines.append(f"{labels[u]}\t{labels[v]}\tu")
    return "\n".join(lines) + ("\n" if lines else "")


def read_edgelist(text):
    """Parse the edge-list text format into label pairs.

    Returns ``(directed, undirected)`` lists of label tuples.
    """
    directed, undirected = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            directed.append((parts[0], parts[1]))
        elif len(parts) == 3 and parts[2] == "u":
            undirected.append((parts[0], parts[1]))
        else:
            raise ValueError(f"malformed edge-list line {lineno}: {raw!r}")
    return directed, undirected


def write_layering(ordering, labels):
    """Render a layering in the text format (one line per layer, top first)."""
    lines = []
    for layer in ordering.layers:
        lines.append(",".join(labels[v] for v in sorted(layer)))
    if ordering.unordered:
        lines.append("unordered:" + ",".join(labels[v] for v in sorted(ordering.unordered)))
    return "\n".join(lines) + "\n"


def read_layering(text, labels):
    """Parse a layering file against the given node labels.

    Raises
    ------
    LabelMismatchError
        If the file mentions labels absent from ``labels`` or misses some.
    """
    index = {lab: i for i, lab in enumerate(labels)}
    layers = []
    unordered = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("unordered:"):
            names = [x.strip() for x in line[len("unordered:"):].split(",") if x.strip()]
            unknown = [x for x in names if x not in index]
            if unknown:
                raise LabelMismatchError(unknown, "layering file mentions unknown labels")
            unordered.extend(index[x] for x in names)
            continue
        names = [x.strip() for x in line.split(",") if x.strip()]
        unknown = [x for x in names if x not in index]
        if unknown:
            raise LabelMismatchError(unknown, "layering file mentions unknown labels")
        layers.append({index[x] for x in names})
    seen = {v for layer in layers for v in layer} | set(unordered)
    missing = set(range(len(labels))) - seen
    if missing:
        raise LabelMismatchError(
            [labels[v] for v in missing], "layering file misses labels"
        )
    return PartialOrdering(layers, n_nodes=len(labels), unordered=unordered)
