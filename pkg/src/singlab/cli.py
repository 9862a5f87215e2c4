"""Command-line entry point: ``lab <command> [flags]``.

Configuration is merged as defaults < --config file < flags. Every run writes
its data files plus a JSON manifest into --out-dir. Exit codes: 0 success,
2 validation error, 3 budget or resource error."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from . import experiments as E
from .distribution import DistributionError, stats
from .exact import BudgetExceeded, enumerate_dominant_union, enumerate_singularity
from .levy import LevyBudgetExceeded, UnsatisfiableConstraint, levy, sum_dist, threshold
from .sampler import RejectionBudgetExhausted
from .smoothing import InfeasibleParameters, ResourceExceeded, inversion_experiment

COMMANDS = ("exact", "mc", "levy", "threshold", "tail", "structure", "compressible", "sweep", "smoothing", "report")

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE = 0, 2, 3

_FLAG_KEYS = {
    "dist": "dist", "n": "n", "samples": "samples", "seed": "seed", "workers": "workers",
    "t_grid": "t_grid", "delta": "delta", "rho": "rho", "delta_prime": "delta_prime",
    "epsilon": "epsilon", "L": "L", "theta": "theta", "trials": "trials", "mode": "sweep_mode",
    "N": "N", "L_grid": "L_grid", "levy_samples": "levy_samples", "budget": "budget",
}


class UsageError(ValueError):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Random matrix singularity laboratory")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--dist")
    p.add_argument("--n", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--t-grid", dest="t_grid", type=_floats)
    p.add_argument("--delta", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--delta-prime", dest="delta_prime", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--mode", choices=("prop51", "lemma41"))
    p.add_argument("--N", type=int)
    p.add_argument("--L-grid", dest="L_grid", type=_floats)
    p.add_argument("--levy-samples", dest="levy_samples", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--event", choices=("singular", "union"), default="singular")
    p.add_argument("--x", help="vector as a CSV file (one value per line) or an inline JSON array")
    p.add_argument("--r", help="radius (rational or decimal)")
    p.add_argument("--out-dir", dest="out_dir", default="lab-out")
    p.add_argument("--config", help="JSON config file, or a manifest to replay")
    return p


def load_config(args: argparse.Namespace) -> E.ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"malformed config {args.config!r}: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
        data = raw["config"] if "config" in raw and "command" in raw else raw
    cfg = E.ExperimentConfig.from_dict(data) if data else E.ExperimentConfig()
    flags = {key: getattr(args, attr) for attr, key in _FLAG_KEYS.items()}
    return cfg.merged(flags)


def _parse_vector(text: str) -> list:
    t = text.strip()
    if t.startswith("["):
        try:
            vals = json.loads(t)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad inline vector: {exc}") from exc
    else:
        try:
            lines = Path(t).read_text().splitlines()
        except OSError as exc:
            raise UsageError(f"cannot read vector file {t!r}: {exc}") from exc
        vals = [ln.split(",")[0].strip() for ln in lines if ln.strip()]
    out = []
    for v in vals:
        if isinstance(v, str):
            out.append(Fraction(v) if "e" not in v.lower() and "." not in v else float(v))
        elif isinstance(v, int):
            out.append(Fraction(v))
        else:
            out.append(float(v))
    if all(isinstance(v, Fraction) for v in out):
        return out
    return [float(v) for v in out]


def _radius(text: str | None):
    if text is None:
        raise UsageError("--r is required")
    try:
        return Fraction(text) if "e" not in text.lower() else float(text)
    except ValueError as exc:
        raise UsageError(f"bad radius {text!r}") from exc


def _num(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) for v in r])


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_num) + "\n")


def _run(cmd: str, args, cfg: E.ExperimentConfig, out: Path) -> tuple[list[Path], dict]:
    files: list[Path] = []
    d = cfg.distribution()
    if cmd == "exact":
        fn = enumerate_singularity if args.event == "singular" else enumerate_dominant_union
        res = fn(d, cfg.n, cfg.budget)
        scaled = scaled_fraction(res.probability, d.common_denominator() ** (cfg.n * cfg.n))
        print(scaled)
        rec = {"distribution": d.to_json(), "n": cfg.n, "event": args.event, **res.to_json(), "probability_scaled": scaled}
        files.append(out / "exact.json")
        _write_json(files[-1], rec)
        return files, rec
    if cmd == "mc":
        res = E.mc_singularity(cfg)
        print(f"estimate={res.estimate!r} stderr={res.stderr!r} ratio={res.ratio_to_conjecture!r}")
        rec = {k: getattr(res, k) for k in ("estimate", "stderr", "ratio_to_conjecture", "hits", "samples", "conjecture", "primes_needed", "workers")}
        files.append(out / "mc.json")
        _write_json(files[-1], rec)
        return files, rec
    if cmd in ("levy", "threshold"):
        if args.x is None:
            raise UsageError("--x is required")
        x = _parse_vector(args.x)
        if cmd == "levy":
            r = _radius(args.r)
            val = levy(sum_dist(d, x, cfg.budget), r)
            rec = {"levy": val, "r": r, "n": len(x)}
        else:
            val = threshold(d, x, cfg.L, cfg.budget)
            rec = {"threshold": val, "L": cfg.L, "n": len(x)}
        print(val)
        files.append(out / f"{cmd}.json")
        _write_json(files[-1], rec)
        return files, rec
    if cmd == "tail":
        curve = E.tail_curve(cfg)
        files.append(out / "tail.csv")
        _write_csv(files[-1], ["t", "p_hat", "stderr", "predicted"], [(r.t, r.p_hat, r.stderr, r.predicted) for r in curve.rows])
        rec = {"C_fit": curve.C_fit, "base": curve.base, "weak_bound_floor": curve.weak_bound_floor, "samples": curve.samples}
        files.append(out / "tail.json")
        _write_json(files[-1], rec)
        for r in curve.rows:
            print(f"t={r.t!r} p_hat={r.p_hat!r} stderr={r.stderr!r} predicted={r.predicted!r}")
        return files, rec
    if cmd == "structure":
        res = E.structure_dichotomy(cfg)
        files.append(out / "dichotomy.csv")
        _write_csv(files[-1], ["trial", "label", "cons", "levy_estimate", "levy_stderr"],
                   [(t.trial, t.label, int(t.cons), t.levy_estimate, t.levy_stderr) for t in res.trials])
        rec = {"frac_cons": res.frac_cons, "frac_small_threshold": res.frac_small_threshold,
               "frac_neither": res.frac_neither, "r0": res.r0, "tau0": res.tau0}
        files.append(out / "dichotomy.json")
        _write_json(files[-1], rec)
        print(" ".join(f"{k}={v!r}" for k, v in rec.items()))
        return files, rec
    if cmd == "compressible":
        res = E.compressible_trial(cfg)
        rec = {k: getattr(res, k) for k in ("t", "frequency", "stderr", "hits", "samples", "net_size",
                                            "elementary_frequency", "predicted_factor", "eta_fit", "bonferroni")}
        files.append(out / "compressible.json")
        _write_json(files[-1], rec)
        print(" ".join(f"{k}={rec[k]!r}" for k in ("t", "frequency", "stderr", "eta_fit")))
        return files, rec
    if cmd == "sweep":
        res = E.anticoncentration_sweep(cfg)
        files.append(out / "sweep.csv")
        _write_csv(files[-1], ["index", "kind", "accepted", "margin"],
                   [(r.index, r.kind, int(r.accepted), "" if r.margin is None else float(r.margin)) for r in res.rows])
        rec = {"mode": res.mode, "bound": res.bound, "min_margin": res.min_margin, "accepted": res.accepted,
               "rejected": res.rejected, "boundary_margins": res.boundary_margins,
               "argmin": None if res.argmin is None else [float(v) for v in res.argmin]}
        files.append(out / "sweep.json")
        _write_json(files[-1], rec)
        print(f"min_margin={res.min_margin} accepted={res.accepted} rejected={res.rejected}")
        return files, rec
    if cmd == "smoothing":
        m = cfg.m or _default_counts(d, cfg.n)
        curve = inversion_experiment(d, cfg.N, cfg.n, m, cfg.trials, cfg.L_grid, cfg.rng(5), K=tuple(cfg.K),
                                     delta=cfg.adm_delta, mode=cfg.adm_mode, eta_step=cfg.eta_step)
        files.append(out / "exceedance.csv")
        _write_csv(files[-1], ["L", "exceedance", "stderr"], zip(curve.L, curve.exceedance, curve.stderr))
        rec = {"m": list(m), "normalized_sup_mean": float(np.mean(curve.normalized_sup))}
        files.append(out / "exceedance.json")
        _write_json(files[-1], rec)
        for row in zip(curve.L, curve.exceedance):
            print(f"L={row[0]!r} exceedance={row[1]!r}")
        return files, rec
    if cmd == "report":
        summary = []
        for mf in sorted(out.glob("manifest-*.json")):
            data = json.loads(mf.read_text())
            summary.append({"manifest": mf.name, "command": data["command"], "summary": data.get("summary")})
        st = stats(d)
        rec = {"runs": summary, "distribution_stats": {"entropy": st.entropy, "p_inf": st.p_inf, "p2_sq": st.p2_sq, "p0": st.p0}}
        files.append(out / "report.json")
        _write_json(files[-1], rec)
        for s in summary:
            print(f"{s['manifest']}: {s['command']}")
        return files, rec
    raise UsageError(f"unknown command {cmd!r}")


def scaled_fraction(p: Fraction, den: int) -> str:
    """p written over the sample-space denominator, e.g. 338/512."""
    num = p * den
    if num.denominator != 1:
        return str(p)
    return f"{num.numerator}/{den}"


def _default_counts(d, n: int) -> list[int]:
    """Count vector nearest to p n with total n."""
    raw = [q * n for q in d.probs]
    m = [int(v) for v in raw]
    order = sorted(range(d.k), key=lambda j: -(raw[j] - m[j]))
    for j in order[: n - sum(m)]:
        m[j] += 1
    return m


def dispatch(argv: list[str]) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    started = datetime.now(timezone.utc).isoformat()
    try:
        cfg = load_config(args)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        files, summary = _run(args.command, args, cfg, out)
    except (E.ConfigError, DistributionError, UsageError, UnsatisfiableConstraint, InfeasibleParameters, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BudgetExceeded, LevyBudgetExceeded, ResourceExceeded, RejectionBudgetExhausted, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    manifest = {
        "command": args.command,
        "config": cfg.to_json(),
        "version": _version(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "seconds": time.perf_counter() - t0,
        "outputs": [str(f) for f in files],
        "summary": summary,
    }
    _write_json(out / f"manifest-{args.command}.json", manifest)
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
