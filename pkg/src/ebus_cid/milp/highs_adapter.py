"""Solve an LP file with HiGHS and write the solution grammar.

Usage: ``python -m ebus_cid.milp.highs_adapter MODEL.lp OUT.sol [--time-limit S]``
"""

from __future__ import annotations

import argparse
import math
import sys


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("lp")
    p.add_argument("sol")
    p.add_argument("--time-limit", type=float, default=0.0)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)
    try:
        import highspy
    except ImportError:
        print("highspy is not installed", file=sys.stderr)
        return 4

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", args.threads)
    h.setOptionValue("random_seed", 0)
    if args.time_limit > 0:
        h.setOptionValue("time_limit", args.time_limit)
    if h.readModel(args.lp) == highspy.HighsStatus.kError:
        print(f"cannot read {args.lp}", file=sys.stderr)
        return 4
    h.run()
    ms = h.getModelStatus()
    S = highspy.HighsModelStatus
    info = h.getInfo()
    has_sol = info.primal_solution_status == 2  # kSolutionStatusFeasible
    if ms == S.kOptimal:
        status = "Optimal"
    elif ms == S.kInfeasible:
        status = "Infeasible"
    elif ms in (S.kUnbounded, S.kUnboundedOrInfeasible):
        status = "Unbounded" if ms == S.kUnbounded else "Infeasible"
    elif ms == S.kTimeLimit:
        status = "TimeLimit"
    else:
        print(f"HiGHS finished with status {h.modelStatusToString(ms)}", file=sys.stderr)
        return 4

    lines = [f"=status= {status}"]
    if has_sol and status in ("Optimal", "TimeLimit"):
        lines.append(f"=obj= {info.objective_function_value!r}")
        bound = getattr(info, "mip_dual_bound", math.nan)
        if math.isfinite(bound):
            lines.append(f"=bound= {bound!r}")
        lp = h.getLp()
        values = h.getSolution().col_value
        for name, v in zip(lp.col_names_, values):
            lines.append(f"{name} {float(v)!r}")
    with open(args.sol, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
