"""Independent oracles shared across the test suite.

Everything here recomputes ground truth from first principles (path
enumeration, exhaustive DAG enumeration) so the library's own graph
machinery is never trusted to check itself.
"""

import itertools

from podag import Dag, PartialOrdering, Pdag, SepsetMap, apply_meek_rules, orient_v_structures
from podag.errors import PodagError
from podag.sem import GenConfig, generate_layered_dag


def brute_force_dsep(dag, i, j, s):
    """d-separation by enumerating all simple paths with the blocking rule.

    A path is active given S iff every collider on it (both path edges
    pointing in) is in S or has a descendant in S, and every non-collider
    is outside S.
    """
    s = set(s)
    neighbors = {v: sorted(dag.parents(v) | dag.children(v)) for v in range(dag.n_nodes)}
    descendants = {v: dag.descendants({v}) for v in range(dag.n_nodes)}

    def active(path):
        for a, b, c in zip(path, path[1:], path[2:]):
            collider = dag.has_edge(a, b) and dag.has_edge(c, b)
            if collider:
                if not (descendants[b] & s):
                    return False
            elif b in s:
                return False
        return True

    stack = [[i]]
    while stack:
        path = stack.pop()
        last = path[-1]
        for nxt in neighbors[last]:
            if nxt in path:
                continue
            new = path + [nxt]
            if nxt == j:
                if active(new):
                    return False  # d-connected
            else:
                stack.append(new)
    return True


def equivalence_class(dag):
    """All DAGs with the same skeleton and the same unshielded colliders."""
    skel = sorted({(min(u, v), max(u, v)) for u, v in dag.edges})
    want = dag.v_structures()
    members = []
    for bits in itertools.product((0, 1), repeat=len(skel)):
        edges = [(u, v) if b == 0 else (v, u) for (u, v), b in zip(skel, bits)]
        try:
            cand = Dag(dag.n_nodes, edges)
        except PodagError:
            continue
        if cand.v_structures() == want:
            members.append(cand)
    return members


def enumeration_maximal_pdag(dag, background=()):
    """Maximal PDAG by enumerating the background-consistent class members.

    An edge is directed in the maximal PDAG iff it takes the same
    direction in every equivalent DAG that contains every background
    edge; otherwise it stays undirected.
    """
    background = set(background)
    members = [
        m
        for m in equivalence_class(dag)
        if all((u, v) in m.edges for u, v in background)
    ]
    assert members, "background inconsistent with the equivalence class"
    skel = sorted({(min(u, v), max(u, v)) for u, v in dag.edges})
    directed, undirected = set(), set()
    for u, v in skel:
        if all((u, v) in m.edges for m in members):
            directed.add((u, v))
        elif all((v, u) in m.edges for m in members):
            directed.add((v, u))
        else:
            undirected.add((u, v))
    return Pdag(dag.n_nodes, directed, undirected, labels=dag.labels)


def oracle_maximal_pdag(dag, ordering):
    """Target graph: true skeleton + ordering background + v-structures + Meek."""
    skel = {(min(u, v), max(u, v)) for u, v in dag.edges}
    background = {(u, v) for u, v in dag.edges if ordering.orders_before(u, v)}
    bg_pairs = {(min(u, v), max(u, v)) for u, v in background}
    start = Pdag(dag.n_nodes, background, skel - bg_pairs, labels=dag.labels)
    seps = SepsetMap()
    for i in range(dag.n_nodes):
        for j in range(i + 1, dag.n_nodes):
            if dag.is_adjacent(i, j):
                continue
            found = None
            for target, other in ((j, i), (i, j)):
                pa = sorted(dag.parents(target) - {other})
                if dag.is_dsep(other, target, pa):
                    found = frozenset(pa)
                    break
            if found is None:
                rest = [v for v in range(dag.n_nodes) if v not in (i, j)]
                for size in range(len(rest) + 1):
                    for sub in itertools.combinations(rest, size):
                        if dag.is_dsep(i, j, sub):
                            found = frozenset(sub)
                            break
                    if found is not None:
                        break
            seps.record(i, j, found)
    return apply_meek_rules(orient_v_structures(start, seps))


def random_layered_instance(rng, n_lo=4, n_hi=11, layers_hi=6, epn_lo=0.8, epn_hi=2.2):
    """A feasible random (dag, ordering) pair; retries infeasible configs."""
    while True:
        n = int(rng.integers(n_lo, n_hi))
        layers = min(int(rng.integers(1, layers_hi)), n)
        cfg = GenConfig(
            n_nodes=n,
            expected_edges_per_node=float(rng.uniform(epn_lo, epn_hi)),
            layers=layers,
        )
        try:
            return generate_layered_dag(cfg, rng)
        except PodagError:
            continue


def random_bipartite_instance(rng, p_lo=2, p_hi=5, q_lo=2, q_hi=5, edge_prob=0.35):
    """Random two-layer DAG with explicit first/second layer sizes."""
    p = int(rng.integers(p_lo, p_hi))
    q = int(rng.integers(q_lo, q_hi))
    n = p + q
    edges = []
    for u in range(n):
        for v in range(max(u + 1, p), n):
            if u != v and rng.random() < edge_prob:
                edges.append((u, v))
    dag = Dag(n, edges)
    ordering = PartialOrdering([set(range(p)), set(range(p, n))], n_nodes=n)
    return dag, ordering


def toy_diamond():
    """Four-node graph 0->1, 0->2, 1->3, 2->3 (a diamond with one collider)."""
    return Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
