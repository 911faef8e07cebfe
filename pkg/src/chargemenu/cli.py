"""Batch front-end: load a scenario, sweep its timeline, write reports.

Every slot is solved independently (in a thread pool), then the four
report files are rendered and written in one deterministic pass:

* ``policy.csv``   — one row per routed (type, station) pair
* ``loading.csv``  — line flows vs. limits (rows only for networked runs)
* ``summary.json`` — welfare / profit / travel cost per slot and total
* ``audit.json``   — menu-audit findings (empty unless --audit)
* ``equilibria.json`` — self-routing equilibria (only with --equilibrium)

Exit codes: 0 success (even with audit findings — those go to stderr as a
warning), 1 solver failure, 2 invalid input.  Nothing is written unless
every slot solves.
"""
from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .auditor import AuditEntry, audit
from .equilibrium import assignment_welfare, default_quantum, enumerate_equilibria
from .model import (
    Policy,
    Scenario,
    ScenarioFormatError,
    load_scenario,
    station_loads,
    validate_scenario,
)
from .profit import evaluate_profit, solve_profit
from .welfare import SolverError, _line_map_full, evaluate_welfare, solarize, solve_social

__all__ = ["RunConfig", "render_run", "run", "main"]


@dataclass
class RunConfig:
    """Everything one batch run needs; mirrors the command-line flags."""

    scenario: str | Path
    mode: str = "welfare"
    network: bool = False
    solar: bool = False
    audit: bool = False
    equilibrium: bool = False
    out: str | Path = "."
    tol: float = 1e-7
    server: str | None = None


@dataclass
class _SlotResult:
    slot: int                      # 1-based
    scenario: Scenario             # what the policy was solved against
    policy: Policy
    audit_entries: list[AuditEntry]
    equilibria: list | None
    quantum: float | None


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _solve_slot(
    scenario: Scenario,
    index: int,
    *,
    mode: str,
    use_network: bool,
    use_solar: bool,
    audit_menu: bool,
    benchmark: bool,
    tol: float,
) -> _SlotResult:
    base = scenario.slot_scenario(index)

    equilibria = None
    quantum = None
    if benchmark:
        quantum = default_quantum(base)
        equilibria = enumerate_equilibria(base, quantum=quantum)

    solved = base
    if use_solar and scenario.timeline is not None:
        offer = scenario.timeline.slots[index].solar
        if offer is not None:
            solved = solarize(base, offer)

    if mode == "welfare":
        policy, _ = solve_social(solved, network=use_network)
    else:
        policy, _ = solve_profit(solved, network=use_network)

    entries: list[AuditEntry] = []
    if audit_menu:
        entries = audit(policy, policy.lam, solved, tol=tol).entries()

    return _SlotResult(
        slot=index + 1,
        scenario=solved,
        policy=policy,
        audit_entries=entries,
        equilibria=equilibria,
        quantum=quantum,
    )


def _policy_csv(results: list[_SlotResult]) -> str:
    rows = ["slot,i,j,ell,q,r,lambda,W,P"]
    for res in results:
        p = res.policy
        for ell, i, j in res.scenario.iter_types():
            lam = p.lam[ell, i, j]
            for q in range(res.scenario.num_stations):
                r = p.routing[ell, i, j, q]
                if r <= 1e-12:
                    continue
                rows.append(",".join((
                    str(res.slot), str(i + 1), str(j + 1), str(ell + 1),
                    str(q + 1), _fmt(r), _fmt(lam),
                    _fmt(p.waits[ell, i, j]), _fmt(p.prices[ell, i, j]),
                )))
    return "\n".join(rows) + "\n"


def _loading_csv(results: list[_SlotResult]) -> str:
    rows = ["slot,line,load_kwh,limit_kwh"]
    for res in results:
        scn = res.scenario
        if scn.network is None:
            continue
        flows = _line_map_full(scn) @ station_loads(res.policy, scn)
        for line in range(scn.network.num_lines):
            rows.append(",".join((
                str(res.slot), str(line + 1),
                _fmt(flows[line]), _fmt(scn.network.line_limits[line]),
            )))
    return "\n".join(rows) + "\n"


def _summary_json(results: list[_SlotResult], mode: str) -> str:
    slots = []
    for res in results:
        scn, p = res.scenario, res.policy
        travel = float(np.sum(scn.vot[None, :, None] * p.lam * p.waits))
        slots.append({
            "slot": res.slot,
            "welfare": evaluate_welfare(p, scn),
            "profit": evaluate_profit(p, p, scn),
            "travel_cost": travel,
        })
    totals = {
        key: sum(s[key] for s in slots)
        for key in ("welfare", "profit", "travel_cost")
    }
    doc = {"mode": mode, "slots": slots, "totals": totals}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _audit_json(results: list[_SlotResult]) -> str:
    entries = [
        {"slot": res.slot, **e.to_dict()}
        for res in results
        for e in res.audit_entries
    ]
    return json.dumps(entries, indent=2, sort_keys=True) + "\n"


def _equilibria_json(results: list[_SlotResult]) -> str:
    docs = []
    for res in results:
        for assignment, welfare in res.equilibria or ():
            docs.append({
                "slot": res.slot,
                "mass": assignment.mass.tolist(),
                "welfare": welfare,
                "quantum": res.quantum,
            })
    return json.dumps(docs, indent=2, sort_keys=True) + "\n"


def render_run(
    scenario: Scenario,
    *,
    mode: str = "welfare",
    use_network: bool = False,
    use_solar: bool = False,
    audit_menu: bool = False,
    benchmark: bool = False,
    tol: float = 1e-7,
) -> tuple[dict[str, str], list[str]]:
    """Solve every slot and render the report files.

    Returns (files, warnings): file name -> content, plus warning lines the
    caller should surface.  Raises ValueError on bad configuration and lets
    SolverError propagate when a slot cannot be solved.
    """
    if mode not in ("welfare", "profit"):
        raise ValueError(f"unknown mode: {mode!r}")
    if use_network and scenario.network is None:
        raise ValueError("network constraints requested but the scenario has no network block")

    nslots = scenario.slot_count()

    def solve_one(index: int) -> _SlotResult:
        return _solve_slot(
            scenario, index, mode=mode, use_network=use_network,
            use_solar=use_solar, audit_menu=audit_menu,
            benchmark=benchmark, tol=tol,
        )

    if nslots == 1:
        results = [solve_one(0)]
    else:
        with ThreadPoolExecutor(max_workers=min(8, nslots)) as pool:
            results = list(pool.map(solve_one, range(nslots)))

    files = {
        "policy.csv": _policy_csv(results),
        "loading.csv": _loading_csv(results),
        "summary.json": _summary_json(results, mode),
        "audit.json": _audit_json(results),
    }
    if benchmark:
        files["equilibria.json"] = _equilibria_json(results)

    warnings = []
    n_findings = sum(len(res.audit_entries) for res in results)
    if n_findings:
        bad_slots = sorted({res.slot for res in results if res.audit_entries})
        warnings.append(
            f"audit found {n_findings} violation(s) in slot(s) "
            + ", ".join(map(str, bad_slots))
        )
    return files, warnings


def _write_files(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (out_dir / name).write_text(files[name], encoding="utf-8")


def run(config: RunConfig) -> int:
    """Execute a batch run; returns the process exit code."""
    if config.server:
        return _run_remote(config)
    try:
        scenario = load_scenario(config.scenario)
    except (OSError, ScenarioFormatError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = validate_scenario(scenario)
    for issue in report.warnings:
        print(f"warning: {issue.message}", file=sys.stderr)
    if report.errors:
        for issue in report.errors:
            print(f"error: {issue.message}", file=sys.stderr)
        return 2

    try:
        files, warnings = render_run(
            scenario,
            mode=config.mode,
            use_network=config.network,
            use_solar=config.solar,
            audit_menu=config.audit,
            benchmark=config.equilibrium,
            tol=config.tol,
        )
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _write_files(Path(config.out), files)
    for line in warnings:
        print(f"warning: {line}", file=sys.stderr)
    return 0


def _run_remote(config: RunConfig) -> int:
    """Thin client: ship the raw scenario to a service and write its files."""
    try:
        doc = json.loads(Path(config.scenario).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = json.dumps({
        "scenario": doc,
        "mode": config.mode,
        "network": config.network,
        "solar": config.solar,
        "audit": config.audit,
        "equilibrium": config.equilibrium,
        "tol": config.tol,
    }).encode("utf-8")
    request = urllib.request.Request(
        config.server.rstrip("/") + "/solve",
        data=payload,
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(request) as response:
            body = json.load(response)
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode("utf-8", "replace")
        print(f"error: server returned {exc.code}: {detail}", file=sys.stderr)
        return 2 if exc.code in (400, 422) else 1
    except urllib.error.URLError as exc:
        print(f"error: cannot reach server: {exc.reason}", file=sys.stderr)
        return 1

    _write_files(Path(config.out), body.get("files", {}))
    for line in body.get("warnings", ()):
        print(f"warning: {line}", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chargemenu",
        description="Solve charging-menu scenarios and emit policy/loading/summary reports.",
    )
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument(
        "--mode", choices=("welfare", "profit"), default="welfare",
        help="planner objective (default: welfare)",
    )
    parser.add_argument(
        "--network", action="store_true",
        help="enforce the scenario's line-flow limits",
    )
    parser.add_argument(
        "--solar", action="store_true",
        help="apply per-slot on-site solar offers from the timeline",
    )
    parser.add_argument(
        "--audit", action="store_true",
        help="audit each slot's menu and report violations",
    )
    parser.add_argument(
        "--equilibrium", action="store_true",
        help="enumerate self-routing equilibria per slot (small instances only)",
    )
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument(
        "--tol", type=float, default=1e-7,
        help="audit tolerance (default: 1e-7)",
    )
    parser.add_argument(
        "--server", default=None, metavar="URL",
        help="delegate solving to a running chargemenu service",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = RunConfig(
        scenario=args.scenario,
        mode=args.mode,
        network=args.network,
        solar=args.solar,
        audit=args.audit,
        equilibrium=args.equilibrium,
        out=args.out,
        tol=args.tol,
        server=args.server,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
