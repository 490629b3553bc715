"""Command-line experiment runner.

Every command validates its configuration, runs deterministically from
``--seed`` and emits either CSV (header, rows, ``#`` metadata comments with
the config hash last) or a single JSON record.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import circuit, ensembles, markov, thermal
from .sampling import McEstimate, stream
from .statecore import DimensionCapError, NumericalError

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2
BIN_WIDTH = 0.002
N_BINS = 500


class ConfigError(ValueError):
    pass


@dataclass
class ResultRecord:
    experiment: str
    config: dict
    outputs: dict
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    duration_s: float = 0.0

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_json(self) -> str:
        body = {
            "experiment": self.experiment,
            "config": self.config,
            "config_hash": self.config_hash,
            "outputs": self.outputs,
            "duration_s": self.duration_s,
        }
        if self.columns:
            body["table"] = {"columns": self.columns, "rows": self.rows}
        return json.dumps(body, indent=2, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.columns:
            w.writerow(self.columns)
            w.writerows(self.rows)
        else:
            w.writerow(["name", "value"])
            for k, v in self.outputs.items():
                w.writerow([k, _scalar_text(v)])
        if self.columns:
            for k, v in self.outputs.items():
                buf.write(f"# {k}={_scalar_text(v)}\n")
        buf.write(f"# config_hash={self.config_hash} seed={self.config.get('seed')}\n")
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _scalar_text(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_scalar_text(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# ---------------------------------------------------------------- parsing helpers


def parse_subsystem(text: str | None, n: int) -> tuple[int, ...]:
    """Comma-separated 1-based qubit labels to sorted 0-based indices."""
    if text is None:
        raise ConfigError("--subsystem is required")
    try:
        labels = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad subsystem {text!r}") from exc
    if not labels or len(set(labels)) != len(labels):
        raise ConfigError("subsystem must list distinct qubits")
    if any(not 1 <= q <= n for q in labels):
        raise ConfigError(f"subsystem labels must lie in 1..{n}")
    if len(labels) == n:
        raise ConfigError("subsystem must be a proper subset")
    return tuple(sorted(q - 1 for q in labels))


def load_amplitudes(spec: str, n: int | None, seed: int) -> np.ndarray:
    """``equal``, ``random`` (seeded) or a whitespace-separated file."""
    if spec in ("equal", "random"):
        if n is None:
            raise ConfigError(f"--amps {spec} needs --n")
        if spec == "equal":
            return ensembles.equal_amplitudes(n)
        return ensembles.random_amplitudes(n, stream(seed, 2**32 - 1))
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"amplitude file {spec} not found")
    r = np.loadtxt(path, dtype=float).reshape(-1)
    try:
        r = ensembles.check_amplitudes(r)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if n is not None and r.size != 2**n:
        raise ConfigError(f"file holds {r.size} amplitudes, --n {n} needs {2 ** n}")
    if r.size < 2 or r.size & (r.size - 1):
        raise ConfigError("amplitude count must be a power of two >= 2")
    return r


def _n_of(r: np.ndarray) -> int:
    return r.size.bit_length() - 1


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _base_config(args, **extra) -> dict:
    cfg = {"command": args.command, "seed": args.seed}
    cfg.update(extra)
    return cfg


def _labels(A) -> list[int]:
    return [q + 1 for q in A]


# ---------------------------------------------------------------- commands


def cmd_analytic(args) -> ResultRecord:
    f = args.formula
    if f in ("random", "eqsep", "volume"):
        _require(args.n is not None and args.na is not None, f"--formula {f} needs --n and --na")
        _require(1 <= args.na < args.n, "need 1 <= N_A < N")
        fn = {
            "random": ensembles.analytic_random_average,
            "eqsep": ensembles.analytic_eqsep_max,
            "volume": ensembles.volume_law_bound,
        }[f]
        cfg = _base_config(args, formula=f, n=args.n, na=args.na)
        return ResultRecord("analytic", cfg, {"value": fn(args.n, args.na)})
    r = load_amplitudes(args.amps or "equal", args.n, args.seed)
    n = _n_of(r)
    if f == "mixing":
        _require(args.eps > 0, "--eps must be positive")
        cfg = _base_config(args, formula=f, amplitudes=r.tolist(), eps=args.eps)
        return ResultRecord("analytic", cfg, {"value": circuit.mixing_time_bound(r, args.eps)})
    A = parse_subsystem(args.subsystem, n)
    cfg = _base_config(args, formula=f, amplitudes=r.tolist(), subsystem=_labels(A))
    if f == "theorem1":
        value = circuit.expected_entropy_limit(r, A)
    elif f == "phase":
        value = ensembles.analytic_phase_average(ensembles.EnsembleSpec(r), A)
    else:
        raise ConfigError(f"unknown formula {f!r}")
    return ResultRecord("analytic", cfg, {"value": value})


def histogram(values: np.ndarray) -> np.ndarray:
    edges = np.linspace(0.0, 1.0, N_BINS + 1)
    counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=edges)
    return counts


def cmd_sample(args) -> ResultRecord:
    _require(args.n is not None and args.n >= 1, "--n is required")
    samples = args.samples or 10_000
    _require(samples >= 2, "--samples must be at least 2")
    measure = "meyer_wallach" if args.measure in ("mw", "meyer_wallach") else args.measure
    _require(measure in ("linear", "meyer_wallach"), f"unknown measure {args.measure!r}")
    A = parse_subsystem(args.subsystem, args.n) if measure == "linear" else None
    if args.ensemble == "haar":
        source = args.n
        amps = None
    elif args.ensemble == "phase":
        r = load_amplitudes(args.amps or "equal", args.n, args.seed)
        source = ensembles.EnsembleSpec(r)
        amps = r.tolist()
    else:
        raise ConfigError(f"unknown ensemble {args.ensemble!r}")
    cfg = _base_config(
        args, n=args.n, ensemble=args.ensemble, measure=measure, samples=samples,
        subsystem=_labels(A) if A else None, amplitudes=amps,
    )
    values = ensembles.ensemble_values(source, samples, args.seed, A, measure, workers=args.workers)
    est = McEstimate.from_values(values, args.seed)
    counts = histogram(values)
    rows = [[f"{k * BIN_WIDTH:.3f}", f"{(k + 1) * BIN_WIDTH:.3f}", int(c)] for k, c in enumerate(counts)]
    outputs = {"mean": est.mean, "std": est.std, "std_error": est.std_error, "n_samples": samples}
    return ResultRecord("sample", cfg, outputs, ["bin_lo", "bin_hi", "count"], rows)


def cmd_circuit(args) -> ResultRecord:
    if args.replay:
        text = Path(args.replay).read_text()
        try:
            inst = circuit.CircuitInstance.from_text(text)
        except ValueError as exc:
            raise ConfigError(f"bad circuit file: {exc}") from exc
        r = load_amplitudes(args.amps or "equal", inst.n, args.seed)
        psi, _ = circuit.single_run_input(r, args.seed)
        final = circuit.replay(inst, psi)
        cfg = _base_config(args, replay=text, amplitudes=r.tolist())
        return ResultRecord("circuit", cfg, {"depth": inst.depth, "state_sha256": circuit.state_digest(final)})

    r = load_amplitudes(args.amps or "equal", args.n, args.seed)
    n = _n_of(r)
    _require(n >= 2, "circuits need N >= 2")
    _require(args.depth >= 0, "--depth must be nonnegative")
    A = parse_subsystem(args.subsystem, n)
    runs = args.samples or 1000
    _require(runs >= 2, "--samples must be at least 2")
    every = args.record_every or max(1, args.depth // 50)
    cfg = _base_config(
        args, amplitudes=r.tolist(), subsystem=_labels(A), depth=args.depth, runs=runs, record_every=every
    )
    limit = circuit.expected_entropy_limit(r, A)
    steps, ests = circuit.estimate_trajectory(r, A, args.depth, runs, args.seed, every)
    rows = [[s, repr(e.mean), repr(e.std_error), repr(limit)] for s, e in zip(steps, ests)]
    outputs = {"final_mean": ests[-1].mean, "final_std_error": ests[-1].std_error, "limit": limit}
    if args.save_instance:
        psi, rng = circuit.single_run_input(r, args.seed)
        _, inst, final = circuit.run_circuit(psi, args.depth, A, rng, return_state=True)
        inst = circuit.CircuitInstance(inst.n, inst.gates, args.seed)
        Path(args.save_instance).write_text(inst.to_text())
        outputs["state_sha256"] = circuit.state_digest(final.amplitudes)
    return ResultRecord("circuit", cfg, outputs, ["step", "mean_EL", "std_error", "limit"], rows)


def cmd_markov(args) -> ResultRecord:
    _require(args.n is not None and 2 <= args.n <= 12, "markov needs 2 <= N <= 12")
    n = args.n
    gammas = [args.gamma] if args.gamma is not None else list(range(1, n + 1))
    _require(all(1 <= g <= n for g in gammas), f"--gamma must lie in 1..{n}")
    r = load_amplitudes(args.amps or "equal", n, args.seed)
    kap = circuit.kappa_all(r)
    gam = circuit.popcounts(n)
    cfg = _base_config(args, n=n, gammas=gammas, amplitudes=r.tolist(), eps=args.eps)
    rows = []
    for g in gammas:
        chain = markov.reduced_transition(n, g)
        rho, lower = markov.canonical_path_bound(chain)
        k_max = float(kap[gam == g].max())
        pi = markov.reduced_stationary(chain, k_max)
        rows.append([
            g,
            chain.size,
            " ".join(repr(float(x)) for x in chain.stationary),
            repr(k_max),
            " ".join(repr(float(x)) for x in pi),
            repr(markov.detailed_balance_check(chain)),
            repr(markov.spectral_gap(chain)),
            repr(rho),
            repr(lower),
            markov.empirical_mixing_time(chain, args.eps),
        ])
    outputs: dict[str, Any] = {"mixing_time_bound": circuit.mixing_time_bound(r, args.eps)}
    if args.prop1 and n <= markov.MAX_EXACT_CHAIN_QUBITS:
        samples = args.samples or 1000
        psi, _ = circuit.single_run_input(r, args.seed)
        exact = markov.evolve_full_chain(markov.pauli_distribution(psi), args.steps)
        mc = markov.circuit_pauli_distribution(psi, args.steps, samples, args.seed)
        outputs.update(prop1_steps=args.steps, prop1_samples=samples, prop1_tv=markov.tv_distance(exact, mc))
        cfg.update(prop1_steps=args.steps, prop1_samples=samples)
    columns = [
        "gamma", "states", "stationary_normalized", "kappa_max", "stationary_kappa_max",
        "detailed_balance", "spectral_gap", "rho", "gap_lower_bound", "mixing_time",
    ]
    return ResultRecord("markov", cfg, outputs, columns, rows)


def cmd_thermal(args) -> ResultRecord:
    _require(args.d_r >= 1, "--d-r must be positive")
    try:
        split = thermal.BipartiteSplit(args.d_s, args.d_e)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _require(args.d_r <= split.dim, "--d-r exceeds the total dimension")
    if args.generator == "shared":
        _require(args.d_r <= args.d_e, "shared-system subspaces need d_R <= d_E")
    instances = args.samples or 100
    cfg = _base_config(
        args, d_s=args.d_s, d_e=args.d_e, d_r=args.d_r, instances=instances,
        family=args.family, generator=args.generator,
    )
    sweep = thermal.thermal_sweep(split, args.d_r, instances, args.seed, args.family, args.generator)
    rows = [[s.instance, repr(s.lhs), repr(s.hs_sq), repr(s.trace_distance), int(s.extreme)] for s in sweep]
    gap = max(abs(s.lhs - s.hs_sq) for s in sweep)
    outputs = {"max_lhs": max(s.lhs for s in sweep), "max_identity_gap": gap}
    return ResultRecord("thermal", cfg, outputs, ["instance", "lhs", "hs_distance_sq", "trace_distance", "extreme"], rows)


def cmd_concentration(args) -> ResultRecord:
    _require(args.n is not None and args.n >= 2, "--n >= 2 is required")
    A = parse_subsystem(args.subsystem or "1", args.n)
    samples = args.samples or 1000
    _require(samples >= 2, "--samples must be at least 2")
    grid = tuple(float(x) for x in args.eps_grid.split(","))
    _require(all(e > 0 for e in grid), "epsilon grid must be positive")
    cfg = _base_config(args, n=args.n, subsystem=_labels(A), samples=samples, eps_grid=list(grid), pairs=args.pairs)
    res = ensembles.concentration_experiment(args.n, A, samples, args.seed, grid)
    rows = [["tail", row.eps, repr(row.tail), repr(row.bound), repr(row.tail_se), int(row.passed)] for row in res.rows]
    sigma_ok = res.sigma <= res.sigma_cap + 3 * res.sigma_se
    rows.append(["sigma", "", repr(res.sigma), repr(res.sigma_cap), repr(res.sigma_se), int(sigma_ok)])
    outputs = {"mean": res.mean, "target": res.target}
    if args.pairs:
        worst = ensembles.lipschitz_check(ensembles.EnsembleSpec.equal(args.n), A, args.pairs, args.seed)
        rows.append(["lipschitz", "", repr(worst), "0.0", "", int(worst <= 0)])
    return ResultRecord("concentration", cfg, outputs, ["kind", "eps", "empirical", "bound", "se", "pass"], rows)


COMMANDS = {
    "analytic": cmd_analytic,
    "sample": cmd_sample,
    "circuit": cmd_circuit,
    "markov": cmd_markov,
    "thermal": cmd_thermal,
    "concentration": cmd_concentration,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="number of qubits")
    common.add_argument("--subsystem", help="comma-separated 1-based qubit labels")
    common.add_argument("--samples", type=int, help="Monte Carlo samples, runs or instances")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="phaserandom", description="Phase-random state experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", parents=[common], help="closed-form values")
    a.add_argument("--formula", required=True, choices=("random", "eqsep", "volume", "phase", "theorem1", "mixing"))
    a.add_argument("--na", type=int)
    a.add_argument("--amps", help="equal, random or a file of amplitudes")
    a.add_argument("--eps", type=float, default=0.01)

    s = sub.add_parser("sample", parents=[common], help="entanglement histograms")
    s.add_argument("--ensemble", choices=("haar", "phase"), default="haar")
    s.add_argument("--measure", default="meyer_wallach", help="linear or meyer_wallach (mw)")
    s.add_argument("--amps")
    s.add_argument("--workers", type=int, default=1)

    c = sub.add_parser("circuit", parents=[common], help="random diagonal circuits")
    c.add_argument("--depth", type=int, default=100)
    c.add_argument("--record-every", type=int)
    c.add_argument("--amps")
    c.add_argument("--save-instance", help="write run 0's circuit to this file")
    c.add_argument("--replay", help="replay a saved circuit on run 0's input state")

    m = sub.add_parser("markov", parents=[common], help="reduced chains and bounds")
    m.add_argument("--gamma", type=int)
    m.add_argument("--amps")
    m.add_argument("--eps", type=float, default=0.01)
    m.add_argument("--prop1", action="store_true", help="compare exact chain to circuit sampling")
    m.add_argument("--steps", type=int, default=3)

    t = sub.add_parser("thermal", parents=[common], help="thermalization sweeps")
    t.add_argument("--d-s", type=int, default=2)
    t.add_argument("--d-e", type=int, default=16)
    t.add_argument("--d-r", type=int, default=8)
    t.add_argument("--family", choices=sorted(thermal.AMPLITUDE_FAMILIES), default="random")
    t.add_argument("--generator", choices=sorted(thermal.SUBSPACE_GENERATORS), default="random")

    k = sub.add_parser("concentration", parents=[common], help="tail and Lipschitz checks")
    k.add_argument("--eps-grid", default=",".join(str(e) for e in ensembles.DEFAULT_EPS_GRID))
    k.add_argument("--pairs", type=int, default=1000)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    start = time.perf_counter()
    try:
        rec = COMMANDS[args.command](args)
    except (ConfigError, DimensionCapError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rec.duration_s = time.perf_counter() - start
    text = rec.to_json() if args.format == "json" else rec.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
