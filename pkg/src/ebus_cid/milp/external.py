"""Bridge to an external MILP solver run as a subprocess.

The command template receives ``{lp}`` (model path), ``{sol}`` (solution
path) and optionally ``{time}`` (time limit in seconds). The solver must
write a solution file in the grammar of :mod:`.lpformat`.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
import tempfile
import time
from pathlib import Path
from typing import Optional

from .lpformat import parse_solution_text, write_lp_text
from .model import MilpModel, SolveResult, SolverFailure

SOLVER_CMD_ENV = "EBUS_CID_SOLVER_CMD"


def default_solver_cmd() -> str:
    """Command from the environment, else the bundled HiGHS adapter."""
    env = os.environ.get(SOLVER_CMD_ENV)
    if env:
        return env
    return f"{shlex.quote(sys.executable)} -m ebus_cid.milp.highs_adapter {{lp}} {{sol}} --time-limit {{time}}"


def solve_external(
    m: MilpModel,
    cmd_template: Optional[str] = None,
    time_s: Optional[float] = None,
    workdir: Optional[str] = None,
) -> SolveResult:
    cmd_template = cmd_template or default_solver_cmd()
    if "{lp}" not in cmd_template or "{sol}" not in cmd_template:
        raise SolverFailure("solver command needs {lp} and {sol} placeholders")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp_path = Path(tmp) / "model.lp"
        sol_path = Path(tmp) / "model.sol"
        lp_path.write_text(write_lp_text(m))
        cmd = cmd_template.format(
            lp=shlex.quote(str(lp_path)),
            sol=shlex.quote(str(sol_path)),
            time="0" if time_s is None else repr(float(time_s)),
        )
        start = time.perf_counter()
        timeout = None if time_s is None else time_s * 2 + 30
        try:
            proc = subprocess.run(
                cmd, shell=True, capture_output=True, text=True, timeout=timeout
            )
        except subprocess.TimeoutExpired as exc:
            raise SolverFailure(f"solver did not exit within {timeout:.0f} s") from exc
        elapsed = time.perf_counter() - start
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout).strip().splitlines()[-5:]
            raise SolverFailure(
                f"solver exited with code {proc.returncode}: " + " | ".join(tail)
            )
        if not sol_path.exists():
            raise SolverFailure("solver wrote no solution file")
        return parse_solution_text(sol_path.read_text(), m, elapsed)
