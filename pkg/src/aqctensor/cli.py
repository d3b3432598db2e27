"""Command-line front end: evolve | compile | run | sweep | verify | export-circuit.

Data goes to files under --out; logs and per-stage telemetry go to stderr.
Exit codes: 0 success, 2 usage or config error, 3 runtime failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

logger = logging.getLogger("aqctensor")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_VERIFY = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqctensor",
        description="Compress Trotterized spin-chain evolution into short-depth circuits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="YAML config file; flags override its values")
        p.add_argument("--out", help="output directory")
        p.add_argument("--preset", choices=["random-xyz", "xxx", "xxz"])
        p.add_argument("--n", type=int, help="qubit count")
        p.add_argument("--layers", type=int, help="ansatz layers / Trotter steps")
        p.add_argument("--time", type=float, dest="t", help="total evolution time")
        p.add_argument("--seed", type=int, help="coupling seed for random-xyz")
        p.add_argument("--chi-max", type=int, help="evolution bond-dimension cap")
        p.add_argument("--cutoff", type=float, help="relative singular-value cutoff")
        p.add_argument("--max-iter", type=int, help="optimizer iteration cap")
        p.add_argument("--alpha-schedule", help='"default", "global", or JSON [[frac,[alphas]],...]')
        p.add_argument("--append-steps", type=int, help="Trotter steps appended after optimization")

    for name, help_text in [
        ("evolve", "TEBD-evolve the initial state and report fidelity/bond statistics"),
        ("compile", "generate the target and optimize the circuit (no appended steps)"),
        ("run", "full pipeline: target, optimization, appended steps, report"),
        ("sweep", "equal-depth / half-depth comparison over a time grid (CSV)"),
    ]:
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        if name == "sweep":
            p.add_argument("--mode", choices=["equal", "half"], default="equal")

    p = sub.add_parser("verify", help="run the oracle-equivalence and gradient self-checks")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export-circuit", help="write the optimized circuit as a gate list")
    p.add_argument("--report", required=True, help="report.json from a previous run")
    p.add_argument("--out", help="output directory")
    return parser


def load_config(args: argparse.Namespace):
    from .pipeline import RunConfig

    raw = {}
    if args.config:
        import yaml

        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
    overrides = {
        "preset": args.preset,
        "n": args.n,
        "layers": args.layers,
        "t": args.t,
        "seed": args.seed,
        "chi_max": getattr(args, "chi_max", None),
        "cutoff": args.cutoff,
        "max_iter": args.max_iter,
        "append_steps": getattr(args, "append_steps", None),
        "out_dir": args.out,
    }
    if args.alpha_schedule:
        try:
            overrides["alpha_schedule"] = json.loads(args.alpha_schedule)
        except json.JSONDecodeError:
            overrides["alpha_schedule"] = args.alpha_schedule
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(raw)


def _write_manifest(out: Path, artifacts: list[str]) -> None:
    with open(out / "manifest.json", "w") as fh:
        json.dump({"artifacts": sorted(artifacts)}, fh, indent=2)


def _out_dir(cfg_out: str) -> Path:
    out = Path(cfg_out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_evolve(args) -> int:
    from .hamiltonian import tebd_evolve
    from .mps import from_product_state, max_bond
    from .pipeline import make_policies, resolve_hamiltonian, resolve_initial_bits

    cfg = load_config(args)
    out = _out_dir(cfg.out_dir)
    ham = resolve_hamiltonian(cfg)
    policy, _, _ = make_policies(cfg)
    psi0 = from_product_state(resolve_initial_bits(cfg))
    t0 = time.perf_counter()
    stats: dict = {}
    psi = tebd_evolve(psi0, ham, cfg.dt, cfg.layers, policy, stats=stats)
    seconds = time.perf_counter() - t0
    logger.info("evolved %d sites for t=%g in %.2fs, max chi %d", cfg.n, cfg.t, seconds, stats["max_bond"])

    np.savez(out / "state.npz", **{f"tensor_{i}": t for i, t in enumerate(psi.tensors)})
    summary = {
        "config": cfg.to_dict(),
        "hamiltonian": ham.to_dict(),
        "max_bond": stats["max_bond"],
        "discarded_weight": stats["discarded_weight"],
        "final_bond_dims": psi.bond_dims(),
        "seconds": seconds,
    }
    with open(out / "evolve.json", "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    _write_manifest(out, ["state.npz", "evolve.json"])
    return EXIT_OK


def _run_pipeline(args, append_allowed: bool) -> int:
    from .ansatz import build_brickwork_ansatz, export_circuit_records
    from .gates import write_gate_list
    from .hamiltonian import schedule_gate_records
    from .pipeline import resolve_hamiltonian, run_aqctensor

    cfg = load_config(args)
    if not append_allowed:
        cfg.append_steps = 0
    out = _out_dir(cfg.out_dir)
    report, trace = run_aqctensor(cfg)
    artifacts = ["report.json"]
    if trace.records:
        trace.write_csv(str(out / "trace.csv"))
        report.optimization["trace_file"] = "trace.csv"
        artifacts.append("trace.csv")
    for stage, seconds in report.timings.items():
        logger.info("stage %-13s %7.2fs", stage, seconds)
    logger.info("max bond dimensions: %s", report.max_bond_dims)
    report.write(str(out / "report.json"))
    if report.status == "ok":
        ham = resolve_hamiltonian(cfg)
        ansatz = build_brickwork_ansatz(cfg.n, cfg.layers, ham, cfg.dt,
                                        trainable_fields=cfg.trainable_fields)
        lines = export_circuit_records(ansatz, np.array(report.theta_opt))
        if cfg.append_steps > 0:
            dt_app = cfg.append_dt if cfg.append_dt is not None else cfg.dt
            lines += schedule_gate_records(ham, dt_app, cfg.append_steps)
        write_gate_list(lines, str(out / "circuit.txt"))
        artifacts.append("circuit.txt")
    _write_manifest(out, artifacts)
    if report.status != "ok":
        logger.error("run failed at stage %s: %s", report.failed_stage, report.error)
        print(f"error: stage={report.failed_stage} {report.error}", file=sys.stderr)
        return EXIT_RUNTIME
    logger.info("fidelities: %s", report.fidelities)
    return EXIT_OK


def cmd_compile(args) -> int:
    return _run_pipeline(args, append_allowed=False)


def cmd_run(args) -> int:
    return _run_pipeline(args, append_allowed=True)


def cmd_sweep(args) -> int:
    from .pipeline import experiment_equal_depth, experiment_half_depth, write_sweep_csv

    cfg = load_config(args)
    out = _out_dir(cfg.out_dir)
    driver = experiment_equal_depth if args.mode == "equal" else experiment_half_depth
    report = driver(cfg)
    report.write(str(out / "sweep_report.json"))
    write_sweep_csv(report, str(out / "sweep.csv"))
    _write_manifest(out, ["sweep_report.json", "sweep.csv"])
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_self_checks(seed=args.seed)
    ok = all(passed for _, passed, _ in results)
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_export_circuit(args) -> int:
    from .ansatz import build_brickwork_ansatz, export_circuit_records
    from .gates import write_gate_list
    from .hamiltonian import schedule_gate_records
    from .pipeline import RunConfig, resolve_hamiltonian

    with open(args.report) as fh:
        report = json.load(fh)
    if not report.get("theta_opt"):
        print("error: report carries no optimized parameters", file=sys.stderr)
        return EXIT_USAGE
    cfg = RunConfig.from_dict(report["config"])
    out = _out_dir(args.out or cfg.out_dir)
    ham = resolve_hamiltonian(cfg)
    ansatz = build_brickwork_ansatz(cfg.n, cfg.layers, ham, cfg.dt,
                                    trainable_fields=cfg.trainable_fields)
    lines = export_circuit_records(ansatz, np.array(report["theta_opt"]))
    if cfg.append_steps > 0:
        dt_app = cfg.append_dt if cfg.append_dt is not None else cfg.dt
        lines += schedule_gate_records(ham, dt_app, cfg.append_steps)
    write_gate_list(lines, str(out / "circuit.txt"))
    _write_manifest(out, ["circuit.txt"])
    return EXIT_OK


def run_self_checks(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Oracle-equivalence and gradient suites used by the verify subcommand."""
    from .ansatz import build_brickwork_ansatz, trotter_initialize
    from .cost import CostConfig, gradient, gradient_fd
    from .hamiltonian import random_xyz, tebd_evolve
    from .mps import TruncationPolicy, from_product_state
    from .statevector import mps_to_statevector, sv_fidelity

    from scipy.stats import unitary_group

    from .mps import apply_two_site_gate
    from .statevector import apply_gate, basis_state

    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    policy = TruncationPolicy(cutoff=0.0)
    for i in range(5):
        n = int(rng.integers(4, 9))
        bits = "".join(rng.choice(["0", "1"]) for _ in range(n))
        psi = from_product_state(bits)
        dense = basis_state(bits)
        for layer in range(3):
            for j in range(layer % 2, n - 1, 2):
                u = unitary_group.rvs(4, random_state=rng)
                psi = apply_two_site_gate(psi, u, j, policy)
                dense = apply_gate(dense, u, (j, j + 1))
        worst = max(worst, float(np.max(np.abs(mps_to_statevector(psi) - dense))))
    results.append(("oracle_amplitudes", worst < 1e-10, f"max amplitude deviation {worst:.2e}"))

    worst = 0.0
    for i in range(3):
        n = 6
        ham = random_xyz(n, 0.375, 1.125, seed=seed + i)
        psi0 = from_product_state("101010")
        evolved = tebd_evolve(psi0, ham, 0.1, 2, policy)
        from .hamiltonian import build_trotter_schedule
        from .statevector import sv_apply_schedule

        dense = sv_apply_schedule(basis_state("101010"), build_trotter_schedule(ham, 0.1, 2))
        dense /= np.linalg.norm(dense)
        worst = max(worst, 1.0 - sv_fidelity(mps_to_statevector(evolved), dense))
    results.append(("trotter_oracle_equivalence", worst < 1e-10, f"max infidelity {worst:.2e}"))

    n, l = 4, 1
    ham = random_xyz(n, 0.375, 1.125, seed=seed + 5)
    policy = TruncationPolicy(cutoff=0.0)
    target = tebd_evolve(from_product_state("1010"), ham, 0.2, l, policy)
    ansatz = build_brickwork_ansatz(n, l, ham, 0.2)
    theta = trotter_initialize(ansatz, ham, 0.2, bits="1010")
    theta = theta + rng.normal(0, 0.1, theta.size)
    cfg = CostConfig(k=1, alphas=((n - 1) / n,), policy=policy)
    g = gradient(ansatz, theta, target, cfg)
    g_fd = gradient_fd(ansatz, theta, target, cfg)
    dev = float(np.max(np.abs(g - g_fd)))
    results.append(("gradient_vs_fd", dev < 1e-6, f"max component deviation {dev:.2e}"))
    return results


_COMMANDS = {
    "evolve": cmd_evolve,
    "compile": cmd_compile,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "export-circuit": cmd_export_circuit,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: runtime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
