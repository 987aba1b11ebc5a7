"""Command-line batch driver.

Exit codes: 0 success, 2 configuration or input error, 3 infeasible tuning.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import codec
from .config import DEFAULTS, apply_overrides, build_config, load_config
from .errors import ConfigError, InfeasibleError, ParseError
from .output import collate, mse_table, summary_table, trace_table, write_csv
from .scenario import formation_targets
from .simulation import SimConfig, SimResult, run_simulation, scenario_geometry
from .tuning import DEFAULT_GRIDS, HyperParams, SimulationEvaluator, audit_rows, coordinate_descent

__all__ = ["main", "build_parser", "load_sim_config", "write_run", "run_sweep", "codec_report", "read_coeff_file"]

SWEEP_VARIABLES = ("hp", "Ts", "Nips", "w_fi", "f_bits", "loss_prob")


def load_sim_config(path=None, overrides=(), seed=None) -> SimConfig:
    tree = load_config(path) if path else apply_overrides(DEFAULTS, ())
    tree = apply_overrides(tree, overrides)
    if seed is not None:
        tree["seed"] = seed
    return build_config(tree)


def write_run(result: SimResult, out: Path, prefix: str = "") -> None:
    V = result.config.mac.V
    header, rows = trace_table(result.trace, result.eps_y, result.eps_s, V)
    write_csv(out / f"{prefix}trace.csv", "trace", header, rows)
    header, rows = mse_table(result.metrics)
    write_csv(out / f"{prefix}mse.csv", "windowed-mse", header, rows)
    header, rows = summary_table(result.summary)
    write_csv(out / f"{prefix}summary.csv", "run-summary", header, rows)


def _apply_sweep(cfg: SimConfig, variable: str, value) -> SimConfig:
    if variable == "f_bits":
        base = cfg.quant or codec.QuantScheme()
        return cfg.with_hyper(w_fi=base.i_bits + int(value))
    return cfg.with_hyper(**{variable: value})


def _sweep_one(args) -> SimResult:
    cfg, variable, value = args
    return run_simulation(_apply_sweep(cfg, variable, value))


def run_sweep(cfg: SimConfig, variable: str, values, workers: int = 1) -> list[SimResult]:
    """One run per value with a shared seed, in value order."""
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(f"cannot sweep '{variable}'; choose from {', '.join(SWEEP_VARIABLES)}")
    jobs = [(cfg, variable, v) for v in values]
    for _, var, v in jobs:
        _apply_sweep(cfg, var, v)  # validate before launching
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]


def _parse_values(text: str, variable: str) -> list:
    if not text.strip():
        return []
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            val = float(tok) if variable in ("Ts", "loss_prob") else int(tok)
        except ValueError:
            raise ConfigError(f"bad sweep value '{tok}' for {variable}") from None
        out.append(val)
    return out


def read_coeff_file(path) -> np.ndarray:
    """Coefficients separated by whitespace or commas; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    vals = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for tok in line.replace(",", " ").split():
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not a number: {tok!r}") from None
            if not np.isfinite(v):
                raise ParseError(f"{path}:{lineno}: non-finite value {tok!r}")
            vals.append(v)
    if len(vals) < 6:
        raise ParseError(f"{path}: need at least 6 coefficients (3 intervals), got {len(vals)}")
    return np.array(vals)


def codec_report(coeffs, scheme: codec.QuantScheme, V: int = 4) -> dict:
    """Round trip of one coefficient vector sent by agent 0 to every neighbor."""
    c = np.asarray(coeffs, dtype=float)
    h_p = len(c) - 3
    bits, encoded = codec.encode_payload(0, {a: c for a in range(1, V)}, scheme, V)
    _, decoded = codec.decode_payload(bits, scheme, V, h_p)
    rec = decoded[1]
    return {
        "m_field": encoded[1].m_field,
        "residuals": list(encoded[1].residuals),
        "saturations": encoded[1].saturations,
        "decoded": rec,
        "error": rec - c,
        "hex": codec.bits_to_hex(bits),
        "bits": len(bits),
        "formula_bits": codec.payload_bits(V, scheme.w1_bits, scheme.w_fi, h_p),
    }


def _cmd_run(args) -> int:
    cfg = load_sim_config(args.config, args.override, args.seed)
    res = run_simulation(cfg)
    write_run(res, Path(args.out))
    s = res.summary
    print(
        f"{s['scenario']} {s['scheme']} R={s['data_rate_bps']:.3f} bit/s "
        f"max_mse_pos={s['max_mse_pos']:.4g} max_mse_speed={s['max_mse_speed']:.4g} "
        f"pos_ok={s['pos_ok']} speed_ok={s['speed_ok']} lost={s['lost']}/{s['packets']}"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_sim_config(args.config, args.override, args.seed)
    values = _parse_values(args.values, args.variable)
    results = run_sweep(cfg, args.variable, values, args.workers)
    out = Path(args.out)
    series = {v: r.metrics for v, r in zip(values, results)}
    for key, tag in (("mse_pos", "pos"), ("mse_speed", "speed")):
        header, rows = collate(series, key)
        write_csv(out / f"sweep_{args.variable}_{tag}.csv", f"sweep-{tag}", header, rows)
    keys = sorted(results[0].summary) if results else []
    rows = [[v] + [r.summary[k] for k in keys] for v, r in zip(values, results)]
    write_csv(out / f"sweep_{args.variable}_summary.csv", "sweep-summary", [args.variable] + keys, rows)
    for v, r in zip(values, results):
        s = r.summary
        print(f"{args.variable}={v}: max_mse_pos={s['max_mse_pos']:.4g} max_mse_speed={s['max_mse_speed']:.4g} feasible={s['feasible']}")
    return 0


def _cmd_tune(args) -> int:
    cfg = load_sim_config(args.config, args.override, args.seed)
    if args.start:
        parts = [p.strip() for p in args.start.split(",")]
        if len(parts) != 4:
            raise ConfigError("--start expects hp,Ts,Nips,w_fi")
        try:
            start = HyperParams(int(parts[0]), float(parts[1]), int(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise ConfigError(f"--start: {exc}") from None
    else:
        w_fi = cfg.quant.w_fi if cfg.quant else 53
        start = HyperParams(cfg.mpc.hp, cfg.mpc.Ts, cfg.mpc.Nips, w_fi)
    if cfg.quant is None:
        cfg = replace(cfg, quant=codec.QuantScheme())
    seeds = [cfg.seed + i for i in range(args.seeds)] if args.seeds > 1 else [None]
    ev = SimulationEvaluator(cfg, seeds)
    out = Path(args.out)
    try:
        res = coordinate_descent(start, ev, DEFAULT_GRIDS, args.budget, rate=ev.rate)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    rows = audit_rows(res)
    header = list(rows[0]) if rows else ["index", "hp", "Ts", "Nips", "w_fi", "rate_bps", "feasible"]
    write_csv(out / "tuning_audit.csv", "tuning-audit", header, [list(r.values()) for r in rows])
    best = asdict(res.best)
    write_csv(
        out / "tuning_best.csv",
        "tuning-best",
        list(best) + ["rate_bps", "cycles", "evaluations"],
        [list(best.values()) + [res.best_rate, res.cycles, len(res.log)]],
    )
    print(f"best {res.best} R={res.best_rate:.3f} bit/s after {len(res.log)} evaluations")
    return 0


def _cmd_codec_debug(args) -> int:
    coeffs = read_coeff_file(args.coeffs)
    k_ref = args.k_ref
    scheme = codec.QuantScheme.from_width(
        args.w_fi, args.i_bits, w1_bits=args.w1, m_lsb=args.m_lsb, k_ref=k_ref
    )
    rep = codec_report(coeffs, scheme, args.V)
    print(f"scheme: i={scheme.i_bits} f={scheme.f_bits} w_fi={scheme.w_fi} w1={scheme.w1_bits} m_lsb={scheme.m_lsb} k_ref={scheme.k_ref}")
    print(f"m_field: {rep['m_field']}")
    print("residuals: " + " ".join(str(r) for r in rep["residuals"]))
    print(f"saturations: {rep['saturations']}")
    print("index,input,decoded,error")
    for i, (a, b, e) in enumerate(zip(coeffs, rep["decoded"], rep["error"])):
        print(f"{i},{float(a)!r},{float(b)!r},{float(e)!r}")
    print(f"max_abs_error: {float(np.abs(rep['error']).max())!r}")
    print(f"payload_hex: {rep['hex']}")
    match = "match" if rep["bits"] == rep["formula_bits"] else "MISMATCH"
    print(f"payload_bits: {rep['bits']} formula: {rep['formula_bits']} ({match})")
    return 0


def _cmd_paths(args) -> int:
    path, form = scenario_geometry(args.scenario)
    sig = np.arange(0.0, args.length + 0.5 * args.step, args.step)
    header = ["sigma", "x", "y", "z"]
    for a in range(form.V):
        header += [f"slot{a}_x", f"slot{a}_y", f"slot{a}_z"]
    rows = []
    for s in sig:
        slots = formation_targets(form, path, float(s))
        rows.append([float(s), *slots.mean(axis=0), *slots.ravel()])
    write_csv(Path(args.out) / f"path_{args.scenario}.csv", "path-geometry", header, rows)
    print(f"wrote {len(rows)} samples")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acoustic-dmpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML configuration file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")

    p = sub.add_parser("run", help="run one closed-loop simulation")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="vary one hyperparameter")
    common(p)
    p.add_argument("--variable", required=True, choices=SWEEP_VARIABLES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("tune", help="coordinate descent on the data rate")
    common(p)
    p.add_argument("--start", help="hp,Ts,Nips,w_fi (default: from config)")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--seeds", type=int, default=1, help="seeds per feasibility check")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("codec-debug", help="encode/decode a coefficient file")
    p.add_argument("coeffs", type=Path)
    p.add_argument("--w-fi", type=int, default=10)
    p.add_argument("--i-bits", type=int, default=3)
    p.add_argument("--w1", type=int, default=32)
    p.add_argument("--m-lsb", type=float, default=0.05)
    p.add_argument("--k-ref", type=float, default=1.0)
    p.add_argument("--V", type=int, default=4)
    p.set_defaults(func=_cmd_codec_debug)

    p = sub.add_parser("paths", help="dump path geometry and formation slots")
    p.add_argument("--scenario", default="lawnmower4", choices=("lawnmower4", "helix6"))
    p.add_argument("--length", type=float, default=500.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=_cmd_paths)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
