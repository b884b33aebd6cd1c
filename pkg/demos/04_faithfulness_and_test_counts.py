"""How much faithfulness does each algorithm need, and how many tests?

A constraint-based learner fails when some population partial
correlation it must detect is too close to zero.  The minimum nonzero
absolute partial correlation over an algorithm's tested tuples therefore
measures the faithfulness strength it requires: bigger is easier.  The
ordering-aware search tests far fewer, better-conditioned tuples than PC,
so it needs weaker faithfulness and less computation.
"""

import statistics

from podag.evaluation import faithfulness_report


def main():
    replicates = 30
    print(f"{replicates} random 20-node two-layer networks, d-separation oracle\n")
    rows = faithfulness_report(
        replicates=replicates, n_nodes=20, expected_edges_per_node=2.0, layers=2, seed=17
    )

    def series(algo, field):
        return [r[field] for r in rows if r["algorithm"] == algo]

    print(f"{'algorithm':>10} {'median rho*min':>16} {'median rho*min':>16} {'mean tests':>11}")
    print(f"{'':>10} {'(skeleton)':>16} {'(full run)':>16}")
    for algo in ("pc", "pc_plus", "podag"):
        sk = statistics.median(series(algo, "rho_min_skeleton"))
        fu = statistics.median(series(algo, "rho_min_full"))
        ct = statistics.mean(series(algo, "ci_tests"))
        print(f"{algo:>10} {sk:>16.4f} {fu:>16.4f} {ct:>11.0f}")

    wins = sum(
        1
        for a, b in zip(series("podag", "ci_tests"), series("pc", "ci_tests"))
        if a < b
    )
    print(f"\nordering-aware search used fewer tests than PC on {wins}/{replicates} replicates")


if __name__ == "__main__":
    main()
