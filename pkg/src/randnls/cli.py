"""Command-line experiment runner.

Every run writes its outputs plus a ``manifest.json`` holding the complete
effective configuration, so ``randnls replay DIR/manifest.json`` regenerates the
same bytes.  Exit codes: 0 success, 1 replay mismatch, 2 configuration error or
refused regime, 3 numerical failure, 4 budget refusal.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import counting, norms, plotting, probes
from .config import Config, ConfigError
from .evolution import free_evolution
from .field import modes_csv, set_workers, snapshot_bytes
from .lattice import project_dyadic
from .params import RegimeWarning
from .probes import _plain
from .random_data import deterministic_profile, expected_hs_norm_sq, sample
from .solver import NumericalFailure, solve

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3, 4
COMMANDS = ("sample", "evolve", "solve", "count", "norm", "probe")
MANIFEST = "manifest.json"

PROBE_SAMPLES = {"coefficient_growth": 1000, "linear_chaos_tail": 100_000, "random_lp_decay": 400,
                 "trilinear_chaos_tail": 100_000, "trilinear_estimate": 200}
PROBE_SLACK = {"random_lp_decay": 0.15, "strichartz_scaling": 0.15, "trilinear_estimate": 0.2}
PROBE_LEVELS = {"coefficient_growth": (1.0, 2.0), "linear_chaos_tail": (1.0, 2.0, 3.0)}


class RegimeRefused(Exception):
    pass


@dataclass
class Run:
    """Outputs of one command, held in memory until the run finishes."""
    outputs: dict = field(default_factory=dict)
    figures: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    params: dict | None = None
    status: int = EXIT_OK
    stdout: list = field(default_factory=list)

    def text(self, name, s: str):
        self.outputs[name] = s.encode("utf-8")

    def json(self, name, obj):
        self.text(name, _dumps(obj))

    def blob(self, name, b: bytes):
        self.outputs[name] = bytes(b)

    def figure(self, name, fn):
        self.figures.append((name, fn))


def _dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _g(x) -> str:
    return "%.17g" % x


def _sha(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# ----------------------------------------------------------------------------
# commands


def _params(cfg: Config, force: bool):
    p = cfg.model_params()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        try:
            p.check_regime(force)
        except ValueError as exc:
            raise RegimeRefused(str(exc).replace("pass force=True", "use --force")) from None
    if not p.admissible():
        print(f"warning: parameters outside the admissible regime, running anyway (--force): "
              f"d={p.d} alpha={p.alpha} s={p.s}", file=sys.stderr)
    return p


def _seeds(cfg: Config) -> list:
    run = cfg.section("run")
    return list(range(run["seed"], run["seed"] + run["seeds"]))


def cmd_sample(cfg, force) -> Run:
    p = _params(cfg, force)
    run = Run(seeds=_seeds(cfg), params=p.describe())
    zero = cfg.get("run", "zero")
    summary = []
    for seed in run.seeds:
        phi = sample(p, seed, zero=zero).field
        run.blob(f"phi_seed{seed}.bin", snapshot_bytes(phi))
        run.text(f"phi_seed{seed}_modes.csv", modes_csv(phi))
        blocks = {str(N): project_dyadic(phi, N).l2_norm() for N in p.spec.dyadic_blocks()}
        summary.append({"seed": seed, "l2": phi.l2_norm(), "hs": norms.hs_norm(phi, p.s), "blocks_l2": blocks})
        if seed == run.seeds[0]:
            run.figure(f"spectrum_seed{seed}.png",
                       lambda path, phi=phi: plotting.spectrum(phi, deterministic_profile(p), path))
    run.json("sample.json", {"params": p.describe(), "zero": zero, "expected_hs_sq": expected_hs_norm_sq(p, p.s),
                             "samples": summary})
    return run


def cmd_evolve(cfg, force) -> Run:
    p = _params(cfg, force)
    run = Run(seeds=_seeds(cfg), params=p.describe())
    zero = cfg.get("run", "zero")
    out = []
    for seed in run.seeds:
        phi = sample(p, seed, zero=zero).field
        u = free_evolution(phi, p.times)
        Ns = p.spec.dyadic_blocks()
        blocks = {N: project_dyadic(u, N).l2_norms() for N in Ns}
        mass = u.l2_norms()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "l2"] + [f"block_{N}" for N in Ns])
        for k, t in enumerate(u.times):
            w.writerow([_g(t), _g(mass[k])] + [_g(blocks[N][k]) for N in Ns])
        run.text(f"evolve_seed{seed}.csv", buf.getvalue())
        run.blob(f"u_final_seed{seed}.bin", snapshot_bytes(u.frame(len(u) - 1)))
        drift = float(np.max(np.abs(mass - mass[0])) / mass[0]) if mass[0] > 0 else 0.0
        out.append({"seed": seed, "mass": float(mass[0] ** 2), "relative_l2_drift": drift})
        if seed == run.seeds[0]:
            run.figure(f"blocks_seed{seed}.png",
                       lambda path, u=u, blocks=blocks: plotting.block_norms(u.times, blocks, path))
    run.json("evolve.json", {"params": p.describe(), "zero": zero, "runs": out})
    return run


def cmd_solve(cfg, force) -> Run:
    p = _params(cfg, force)
    run = Run(seeds=_seeds(cfg), params=p.describe())
    sv, zero = cfg.section("solver"), cfg.get("run", "zero")
    rows, hist = [], {}
    for seed in run.seeds:
        phi = sample(p, seed, zero=zero).field
        try:
            r = solve(p, phi, sv["tol"], sv["max_iter"])
        except NumericalFailure as exc:
            run.status = EXIT_NUMERIC
            diag = exc.diagnostics.to_dict() if hasattr(exc.diagnostics, "to_dict") else exc.diagnostics
            run.json(f"solve_seed{seed}.json", {"params": p.describe(), "seed": seed, "failed": True,
                                                "error": str(exc), "diagnostics": diag})
            rows.append([seed, "failed", math.nan, 0, math.nan, math.nan, math.nan])
            print(f"seed {seed}: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        d = r.diagnostics
        table = [{"iteration": k + 1, "diff": df, "ratio": d.contraction_ratios[k - 1] if k > 0 else None}
                 for k, df in enumerate(d.diffs)]
        sm = r.summary()
        run.json(f"solve_seed{seed}.json", {
            "params": p.describe(), "seed": seed, "failed": False, "tol": sv["tol"], "max_iter": sv["max_iter"],
            "delta_used": d.delta_used, "iterates": table, "restarts": d.restarts,
            "residuals": {"gauged": d.final_residual, "nls": r.nls_residual},
            "sup_l2_mismatch": r.mismatch, "first_ratio_below_half": sm["first_ratio_below_half"],
        })
        run.blob(f"u_final_seed{seed}.bin", snapshot_bytes(r.u.frame(len(r.u) - 1)))
        rows.append([seed, "ok", d.delta_used, d.iterates, d.final_residual, r.nls_residual, r.mismatch])
        hist[seed] = list(d.diffs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "status", "delta_used", "iterates", "gauged_residual", "nls_residual", "sup_l2_mismatch"])
    for row in rows:
        w.writerow([x if isinstance(x, (int, str)) else _g(x) for x in row])
    run.text("solve_summary.csv", buf.getvalue())
    if hist:
        run.figure("picard.png", lambda path: plotting.picard_history(hist, path))
    return run


def _count_query(c: dict) -> counting.CountQuery:
    R = c["R"]
    if c["kind"] == "sphere" and R is None and c["A"] is not None:
        R = math.sqrt(c["A"])
    return counting.CountQuery(
        c["kind"], d=c["d"], A=c["A"], R=R, r=c["r"], normal=c["normal"], offset=c["offset"],
        n2=c["n2"], mu=c["mu"], N1=c["N1"], N2=c["N2"], N3=c["N3"], n=c["n"], m=c["m"], pattern=c["pattern"],
    )


def cmd_count(cfg, force) -> Run:
    c = cfg.section("count")
    run = Run()
    strategy = None if c["strategy"] == "auto" else c["strategy"]
    if c["corpus"]:
        results, mismatches = counting.golden_corpus(budget=c["budget"])
        d = c["d"]
        table = counting.sum_of_squares_table(d, c["A_max"], "enumerate", c["budget"])
        oracle = np.array([counting.count_sum_of_squares(d, A, c["budget"]) for A in range(c["A_max"] + 1)])
        ends, maxima = counting.window_maxima(table)
        slope, icpt = counting.loglog_slope(ends, maxima)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["A", f"r{d}"])
        for A, v in enumerate(table):
            w.writerow([A, int(v)])
        run.text(f"r{d}_table.csv", buf.getvalue())
        run.text("corpus.csv", counting.corpus_csv(results))
        run.json("count.json", {
            "corpus": len(results), "mismatches": [q.to_dict() for q in mismatches],
            "table_matches_oracle": bool(np.array_equal(table, oracle)), "A_max": c["A_max"], "d": d,
            "window_max_slope": slope, "exponent_bound": counting.sum_of_squares_exponent(d) + counting.EPSILON,
        })
        run.figure("window_maxima.png", lambda path: plotting.window_maxima(ends, maxima, slope, icpt, path))
        run.stdout.append(f"corpus: {len(results)} queries, {len(mismatches)} mismatches; window-max slope {slope:.6g}")
        if mismatches:
            run.status = EXIT_NUMERIC
        return run
    try:
        q = _count_query(c)
    except ValueError as exc:
        raise ConfigError([f"count: {exc}"]) from None
    r = counting.run_query(q, c["budget"], strategy)
    run.text("count.csv", counting.corpus_csv([r]))
    run.json("count.json", {"query": {k: (str(v) if not isinstance(v, (int, float, tuple)) else v)
                                      for k, v in q.to_dict().items()},
                            "cardinality": r.cardinality, "bound_value": r.bound_value, "ratio": r.ratio,
                            "strategy": strategy or "default",
                            "triples": [list(map(list, t)) for t in r.triples]})
    run.stdout.append(str(r.cardinality))
    return run


def cmd_norm(cfg, force) -> Run:
    p = _params(cfg, force)
    nm = cfg.section("norm")
    seed = cfg.get("run", "seed")
    run = Run(seeds=[seed], params=p.describe())
    phi = sample(p, seed, zero=cfg.get("run", "zero")).field
    if nm["source"] == "solution":
        sv = cfg.section("solver")
        try:
            u = solve(p, phi, sv["tol"], sv["max_iter"]).u
        except NumericalFailure as exc:
            run.status = EXIT_NUMERIC
            run.json("norms.json", {"params": p.describe(), "seed": seed, "failed": True, "error": str(exc)})
            return run
    else:
        u = free_evolution(phi, p.times)
    s = p.s if nm["s"] is None else nm["s"]
    rows = []
    for kind in nm["kinds"]:
        try:
            spec = norms.NormSpec(kind, s=s, b=nm["b"], p=nm["p"], q=nm["q"], window=nm["window"])
        except ValueError as exc:
            raise ConfigError([f"norm.kinds: {exc}"]) from None
        rows.append((spec, u, spec.evaluate(u)))
    run.text("norms.csv", norms.norm_table_csv(rows))
    run.json("norms.json", {"params": p.describe(), "seed": seed, "source": nm["source"],
                            "values": {ns.kind: v for ns, _, v in rows},
                            "data_hs": norms.hs_norm(phi, s)})
    terms = norms.zs_terms(u, s)
    run.figure("zs_terms.png", lambda path: plotting.dyadic_terms(
        terms, path, ylabel=r"$N^{4s+2-d}\|P_N u\|_{L^4}^4$", title="dyadic terms"))
    return run


def _probe_kwargs(name: str, cfg: Config, force: bool) -> dict:
    pr = cfg.section("probe")
    samples = pr["samples"] if pr["samples"] is not None else PROBE_SAMPLES.get(name)
    slack = pr["slack"] if pr["slack"] is not None else PROBE_SLACK.get(name)
    levels = pr["levels"] if pr["levels"] is not None else PROBE_LEVELS.get(name)
    start = pr["seed_start"]
    if name == "coefficient_growth":
        return dict(params=_params(cfg, force), samples=samples, seed_start=start, deltas=pr["deltas"],
                    eps=pr["eps"], levels=levels)
    if name == "linear_chaos_tail":
        return dict(c=np.asarray(pr["coefficients"], float), samples=samples, seed=start, levels=levels,
                    moments=pr["moments"])
    if name == "trilinear_chaos_tail":
        coef = pr["coefficients"]
        if len(coef) not in (1, len(pr["triples"])):
            raise ConfigError(["probe.coefficients: need one value or one per triple"])
        coeffs = {t: coef[0] if len(coef) == 1 else coef[i] for i, t in enumerate(pr["triples"])}
        return dict(coeffs=coeffs, samples=samples, seed=start, levels=levels)
    if name == "random_lp_decay":
        return dict(params=_params(cfg, force), p=pr["p"], q=pr["q"], Ns=pr["Ns"], samples=samples,
                    seed_start=start, time_nodes=pr["time_nodes"], slack=slack)
    if name == "strichartz_scaling":
        return dict(d=pr["d"], p=pr["p"], Ns=pr["Ns"], trials=pr["trials"], seed=start, slack=slack,
                    rad_step=pr["rad_step"])
    if name == "trilinear_estimate":
        return dict(params=_params(cfg, force), case=pr["case"], ladder=pr["ladder"], samples=samples,
                    seed_start=start, delta=pr["delta_window"], steps=pr["steps"], slack=slack)
    sv = cfg.section("solver")
    n = samples if samples is not None else cfg.get("run", "seeds")
    return dict(params=_params(cfg, force), seeds=range(start, start + n), tol=sv["tol"],
                max_iter=sv["max_iter"], zero=cfg.get("run", "zero"))


def cmd_probe(cfg, force, name) -> Run:
    kw = _probe_kwargs(name, cfg, force)
    try:
        rep = probes.run_probe(name, **kw)
    except ValueError as exc:
        raise ConfigError([f"probe.{name}: {exc}"]) from None
    run = Run(seeds=list(rep.seed_range), params=kw["params"].describe() if "params" in kw else None)
    run.text(f"{name}.json", rep.to_json())
    run.text(f"{name}.csv", rep.to_csv())
    run.json("index.json", {"reports": [{"probe": name, "json": f"{name}.json", "csv": f"{name}.csv",
                                         "passed": rep.passed}]})
    run.figure(f"{name}.png", lambda path: plotting.probe_figure(rep, path))
    run.stdout.append(f"{name}: passed={rep.passed} slope={rep.slope:.6g}")
    return run


def execute(command: str, cfg: Config, force: bool = False, probe: str | None = None) -> Run:
    set_workers(cfg.get("run", "threads"))
    if command == "probe":
        return cmd_probe(cfg, force, probe)
    return {"sample": cmd_sample, "evolve": cmd_evolve, "solve": cmd_solve, "count": cmd_count,
            "norm": cmd_norm}[command](cfg, force)


# ----------------------------------------------------------------------------
# persistence


def write_run(run: Run, out: Path, command: str, cfg: Config, force: bool, probe, started: str,
              figures: bool = True) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    for name, data in run.outputs.items():
        (out / name).write_bytes(data)
    made = []
    if figures:
        for name, fn in run.figures:
            if fn(out / name) is not None:
                made.append(name)
    manifest = {
        "artifact_version": __version__, "command": command, "probe": probe, "force": force,
        "config": cfg.to_text(), "config_sha256": cfg.digest(), "seeds": run.seeds, "params": run.params,
        "started": started, "finished": _now(), "status": run.status,
        "outputs": {name: _sha(data) for name, data in sorted(run.outputs.items())},
        "figures": made,
    }
    (out / MANIFEST).write_text(_dumps(manifest), encoding="utf-8")
    return manifest


def replay(manifest_path: Path, out: Path | None = None) -> int:
    man = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    if man.get("artifact_version") != __version__:
        print(f"warning: manifest written by version {man.get('artifact_version')}, running {__version__}",
              file=sys.stderr)
    cfg = cfgmod.parse(man["config"])
    if cfg.digest() != man["config_sha256"]:
        print("warning: config text does not match its recorded hash", file=sys.stderr)
    started = _now()
    run = execute(man["command"], cfg, man.get("force", False), man.get("probe"))
    base = Path(manifest_path).parent
    bad = 0
    want = man["outputs"]
    for name in sorted(set(want) | set(run.outputs)):
        got = run.outputs.get(name)
        if got is None or name not in want:
            print(f"MISMATCH {name}: {'missing from replay' if got is None else 'not in manifest'}")
            bad += 1
            continue
        ok = _sha(got) == want[name]
        shipped = base / name
        if ok and shipped.exists():
            ok = shipped.read_bytes() == got
        print(f"{'match' if ok else 'MISMATCH'} {name}")
        bad += not ok
    if out is not None:
        write_run(run, out, man["command"], cfg, man.get("force", False), man.get("probe"), started)
    print(f"replay: {bad} mismatches over {len(want)} recorded outputs")
    return EXIT_OK if bad == 0 else EXIT_MISMATCH


# ----------------------------------------------------------------------------
# argument parsing

COUNT_FLAGS = ("kind", "d", "A", "R", "r", "normal", "offset", "n2", "mu", "N1", "N2", "N3", "n", "m",
               "pattern", "strategy", "budget", "A_max")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="INI configuration file")
    p.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--threads", type=int, help="FFT worker threads (-1 for all cores)")
    p.add_argument("--force", action="store_true", help="run outside the admissible (alpha, s) regime")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration key (repeatable)")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randnls", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"randnls {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("sample", parents=[common], help="sample random initial data")
    sub.add_parser("evolve", parents=[common], help="free linear evolution of random data")
    sub.add_parser("solve", parents=[common], help="gauged Picard solve with direct cross-check")
    sub.add_parser("norm", parents=[common], help="norm table of a free evolution or solution")
    c = sub.add_parser("count", parents=[common], help="lattice counting query or golden corpus")
    for k in COUNT_FLAGS:
        c.add_argument(f"--{k.replace('_', '-')}", dest=f"count_{k}", metavar=k.upper())
    c.add_argument("--corpus", action="store_true", help="run the golden corpus with dual strategies")
    pr = sub.add_parser("probe", parents=[common], help="statistical probe")
    pr.add_argument("probe", choices=probes.PROBES)
    rp = sub.add_parser("replay", help="re-run a manifest and compare output bytes")
    rp.add_argument("manifest", type=Path)
    rp.add_argument("--out", type=Path, help="also write the regenerated outputs here")
    return ap


def build_config(args) -> Config:
    cfg = cfgmod.load(args.config) if args.config else Config()
    problems = []

    def put(sec, key, raw):
        try:
            cfg.set(sec, key, str(raw))
        except ConfigError as exc:
            problems.extend(exc.problems)

    for item in args.set:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            problems.append(f"--set {item}: expected SECTION.KEY=VALUE")
            continue
        lhs, raw = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        if sec not in cfgmod.SCHEMA:
            problems.append(f"{sec}: unknown section")
            continue
        put(sec, key.strip(), raw)
    if args.seed is not None:
        put("run", "seed", args.seed)
        put("probe", "seed_start", args.seed)
    if args.threads is not None:
        put("run", "threads", args.threads)
    if args.command == "count":
        for k in COUNT_FLAGS:
            v = getattr(args, f"count_{k}")
            if v is not None:
                put("count", k, v)
        if args.corpus:
            put("count", "corpus", "true")
    if problems:
        raise ConfigError(problems)
    cfgmod.validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            return replay(args.manifest, args.out)
        cfg = build_config(args)
        started = _now()
        probe = getattr(args, "probe", None)
        run = execute(args.command, cfg, args.force, probe)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except counting.BudgetExceeded as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in run.stdout:
        print(line)
    out = args.out
    if out is None and args.command != "count":
        out = Path("randnls-out") / (probe or args.command)
    if out is not None:
        write_run(run, out, args.command, cfg, args.force, probe, started)
        print(f"wrote {len(run.outputs)} outputs to {out}", file=sys.stderr if args.command == "count" else sys.stdout)
    return run.status


if __name__ == "__main__":
    sys.exit(main())
