"""Smoke test for the compiled `dicka` extension.

Build it and put it on the path first:

    cargo build -p dicka-py --release --features extension-module
    cp target/release/libdicka.so crates/python/python/dicka.so
    python3 crates/python/python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import dicka  # noqa: E402


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    ghz = dicka.isotropic_correlation(0.0)
    passed, worst = dicka.check_nosig(ghz)
    assert passed and worst < 1e-12
    close(dicka.parity_chsh_win_probability(ghz), (2 + math.sqrt(2)) / 4, 1e-12)
    close(dicka.bell_value_s(ghz), math.sqrt(2), 1e-12)

    # GHZ measured in sigma_z: three perfectly correlated bits, I = 2
    z = json.dumps({"num_parties": 3, "output_sizes": [2, 2, 2], "input_sizes": [1, 1, 1],
                    "table": [0.5, 0, 0, 0, 0, 0, 0, 0.5]})
    close(dicka.total_correlation(z), 2.0, 1e-12)

    close(dicka.convex_attack_bound(1.0), 0.0, 1e-9)
    close(dicka.convex_attack_bound(math.sqrt(2)), 1.0, 1e-6)
    close(dicka.dephasing_attack_bound(math.sqrt(2)), 1.0, 1e-6)
    close(dicka.diqkd_attack_bound(2.0), 0.0, 1e-6)

    rows = dicka.figure("fig3", 11)
    assert len(rows) == 11 and rows[-1][2] == 0.0

    bell = [[0.5, 0, 0, 0.5], [0, 0, 0, 0], [0, 0, 0, 0], [0.5, 0, 0, 0.5]]
    close(dicka.von_neumann_entropy(bell), 0.0, 1e-10)
    reduced = dicka.partial_trace(bell, [2, 2], [0])
    close(dicka.von_neumann_entropy(reduced), 1.0, 1e-10)

    cfg = {"device": json.loads(ghz), "num_rounds": 20000, "mu": 0.5, "rng_seed": 3}
    stats = json.loads(dicka.simulate(json.dumps(cfg)))
    assert not stats["aborted"]
    close(stats["empirical_win"], (2 + math.sqrt(2)) / 4, 0.02)

    try:
        dicka.check_nosig("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed correlation accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
