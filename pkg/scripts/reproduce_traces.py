"""Write E/R/L traces and gnuplot viewers for singularities inside, at and beyond the edge."""

import argparse
from pathlib import Path

from edge_logdet.cli import main


def run(out: Path, n: int, seed: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for two_theta in (1.0, 2.0, 2.2):
        target = out / f"trace_2theta_{two_theta:g}.csv"
        code = main(["trace", "--n", str(n), "--two-theta", str(two_theta), "--seed", str(seed), "--out", str(target)])
        if code:
            raise SystemExit(code)
        print(f"wrote {target} and {target.with_suffix('.gp').name}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("traces"))
    parser.add_argument("--n", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()
    run(args.out, args.n, args.seed)
