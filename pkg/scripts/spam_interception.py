"""Compare how often the spammer wins trades with what the pairing rule predicts.

    python scripts/spam_interception.py [--seeds 1 2 3]

For each seed the interception scenario is simulated, the set of ripe pairs is
rebuilt from the log at every commit instant, and every branch of the greedy
matching is enumerated with exact fractions to get the expected spammer share.
"""

import argparse
from fractions import Fraction

from merkki.engine import run
from merkki.oracles import expected_commits, ripe_pairs_at_commits
from merkki.scenario import bundled_scenario

SPAMMER = 3


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="*", default=[5])
    args = ap.parse_args()

    sc = bundled_scenario("interception")
    print("seed\tcommits\tobserved\tenumerated")
    for seed in args.seeds:
        involving = total = Fraction(0)
        commits = spam = 0
        for _t, ripe, done in ripe_pairs_at_commits(run(sc, seed), sc.radio.hold_ms, sc.radio.tick_ms):
            i, n = expected_commits(ripe, SPAMMER)
            involving, total = involving + i, total + n
            commits += len(done)
            spam += sum(SPAMMER in c for c in done)
        print(f"{seed}\t{commits}\t{spam / commits:.3f}\t{float(involving / total):.3f}")


if __name__ == "__main__":
    main()
