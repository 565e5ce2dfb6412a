"""Command-line front end: ``bdbm {train,sample,verify,eval,plot}``.

Exit codes: 0 success, 1 failed verification, 2 invalid input or
configuration, 3 numeric failure during training or sampling.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .config import TRAIN_REQUIRED, ConfigError, RunConfig, _boolean
from .csvio import dim_header, file_digest, read_table, write_table
from .net import CheckpointError, load_checkpoint
from .sampler import SamplerConfig, sample, time_grid

log = logging.getLogger("bdbm")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
METRICS = ("energy", "mse", "diversity")


class UsageError(ValueError):
    pass


def _thread_limit():
    raw = os.environ.get("BDBM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"BDBM_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"BDBM_THREADS must be a positive integer, got {raw!r}")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return nullcontext()
    return threadpool_limits(limits=n)


def _load(ckpt):
    try:
        return load_checkpoint(ckpt)
    except OSError as exc:
        raise UsageError(f"cannot read checkpoint {ckpt}: {exc}") from None


# -- commands ------------------------------------------------------------------

def cmd_train(args) -> int:
    from .report import loss_figure
    from .trainloop import train

    cfg = RunConfig.load(args.config)
    cfg.require(*TRAIN_REQUIRED)
    sched, policy, net_cfg, loss_cfg = cfg.schedule(), cfg.policy(), cfg.net(), cfg.loss()
    coupling = cfg.coupling()
    res = train(coupling, sched, policy, loss_cfg, net_cfg, out_path=args.out,
                progress_every=args.progress)
    if args.figures and res.losses:
        loss_figure(res.losses, Path(args.out).with_suffix(".loss.png"))
    final = res.losses[-1] if res.losses else float("nan")
    print(f"final_loss={final!r} iterations={len(res.losses)} digest={file_digest(args.out)}")
    return EXIT_OK


def _read_points(path, d):
    try:
        _, rows = read_table(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if rows.shape[0] == 0:
        raise UsageError(f"{path}: no data rows")
    if rows.shape[1] != d:
        raise UsageError(f"{path}: rows have {rows.shape[1]} columns, model dimension is {d}")
    return rows


def cmd_sample(args) -> int:
    params, sched, policy = _load(args.ckpt)
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    # explicit flags win over the config's sample.* keys
    nfe = args.nfe if args.nfe is not None else cfg.get("sample.nfe", int, 200)
    eta = args.eta if args.eta is not None else cfg.get("sample.eta", float, policy.eta)
    seed = args.seed if args.seed is not None else cfg.get("sample.seed", int, 0)
    try:
        scfg = SamplerConfig(args.direction, nfe, eta, seed, args.trajectory is not None)
        time_grid(sched, nfe)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    src = _read_points(args.input, params.d)
    res = sample(params, sched, policy, scfg, src)
    meta = {"seed": seed, "nfe": nfe, "eta": eta, "direction": args.direction,
            "variant": policy.variant, "checkpoint": file_digest(args.ckpt)}
    write_table(args.out, dim_header(params.d), res.destination, meta)
    if args.trajectory is not None:
        rows = [(repr(t), *x) for t, states in res.trajectory for x in states]
        write_table(args.trajectory, ["t", *dim_header(params.d)], rows, meta)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    rows = run_suite(args.suite, args.seed)
    print(f"# suite={args.suite} seed={args.seed}")
    print("check,value,threshold,pass")
    failed = []
    for r in rows:
        line = f"{r.check.replace(',', ';')},{r.value!r},{r.threshold!r},{'true' if r.passed else 'false'}"
        print(line)
        if not r.passed:
            failed.append(line)
    for line in failed:
        print(f"FAILED: {line}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_VERIFY


def evaluate(params, sched, policy, coupling, metrics, n=1000, sources=20, per_source=16, nfe=200,
             eta=None, seed=0, figure_stem=None):
    """Sample both directions and score them; returns ``[(direction, metric, value)]``."""
    from .verify import coupling_mse, diversity, energy_distance

    eta = policy.eta if eta is None else eta
    rng = np.random.default_rng(seed)
    ya, yb = coupling.sample(n, rng)
    ref_a, ref_b = coupling.sample(n, rng)
    div_a, div_b = coupling.sample(sources, rng)
    rows = []
    for i, direction in enumerate(("forward", "backward")):
        src, paired, ref, div_src = (ya, yb, ref_b, div_a) if direction == "forward" else (yb, ya, ref_a, div_b)
        cfg = SamplerConfig(direction, nfe, eta, seed + i)
        gen = sample(params, sched, policy, cfg, src).destination
        if "energy" in metrics:
            rows.append((direction, "energy", energy_distance(gen, ref)))
        if "mse" in metrics:
            rows.append((direction, "mse", coupling_mse(gen, paired)))
        if "diversity" in metrics:
            rep = np.repeat(div_src, per_source, axis=0)
            out = sample(params, sched, policy, SamplerConfig(direction, nfe, eta, seed + 2 + i), rep).destination
            rows.append((direction, "diversity", diversity(out.reshape(sources, per_source, -1))))
        if figure_stem is not None and params.d == 2:
            from .report import translation_figure
            translation_figure(direction, src, gen, ref, f"{figure_stem}.{direction}.png")
    return rows


def cmd_eval(args) -> int:
    cfg = RunConfig.load(args.config)
    raw = args.metrics if args.metrics is not None else cfg.get("eval.metrics", str, ",".join(METRICS))
    metrics = [m.strip() for m in raw.split(",") if m.strip()]
    if not metrics:
        raise UsageError("metrics list is empty")
    unknown = sorted(set(metrics) - set(METRICS))
    if unknown:
        raise UsageError(f"unknown metric {unknown[0]!r}; choose from {','.join(METRICS)}")
    params, sched, policy = _load(args.ckpt)
    coupling = cfg.coupling()
    if coupling.d != params.d:
        raise UsageError(f"coupling dimension {coupling.d} != model dimension {params.d}")
    nfe = cfg.get("eval.nfe", int, 200)
    eta = cfg.get("eval.eta", float, policy.eta)
    seed = cfg.get("eval.seed", int, 0)
    try:
        time_grid(sched, nfe)
        SamplerConfig("forward", nfe, eta, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    figures = cfg.get("eval.figures", _boolean, True)
    stem = str(Path(args.out).with_suffix("")) if figures else None
    rows = evaluate(params, sched, policy, coupling, metrics, n=cfg.get("eval.n", int, 1000),
                    sources=cfg.get("eval.sources", int, 20), per_source=cfg.get("eval.per_source", int, 16),
                    nfe=nfe, eta=eta, seed=seed, figure_stem=stem)
    meta = {"seed": seed, "nfe": nfe, "eta": eta, "checkpoint": file_digest(args.ckpt)}
    write_table(args.out, ["direction", "metric", "value"], [(d, m, repr(v)) for d, m, v in rows], meta)
    for d, m, v in rows:
        print(f"{d},{m},{v!r}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .report import write_scatter_svg

    try:
        _, rows = read_table(args.input)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if rows.shape[0] == 0:
        raise UsageError(f"{args.input}: no data rows")
    if rows.shape[1] != 2:
        raise UsageError(f"{args.input}: scatter plot needs d=2, got {rows.shape[1]} columns")
    write_scatter_svg(rows, args.out)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdbm", description="Bidirectional diffusion bridge models on paired data.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a run config")
    t.add_argument("config")
    t.add_argument("--out", required=True, help="checkpoint path; the loss CSV is written next to it")
    t.add_argument("--progress", type=int, default=0, help="log mean loss every N iterations")
    t.add_argument("--figures", action="store_true", help="also render the loss curve as PNG")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="translate input rows to the opposite domain")
    s.add_argument("ckpt")
    s.add_argument("--direction", choices=("forward", "backward"), required=True)
    s.add_argument("--nfe", type=int, default=None, help="default 200")
    s.add_argument("--eta", type=float, default=None, help="defaults to the checkpoint's policy eta")
    s.add_argument("--seed", type=int, default=None, help="default 0")
    s.add_argument("--config", default=None, help="optional run config supplying sample.* defaults")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--trajectory", default=None, help="also write every visited state as t,dim0,...")
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("verify", help="run oracle suites; CSV report on stdout")
    v.add_argument("suite", choices=("kernels", "doob", "tweedie", "grad", "all"))
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("eval", help="sample both directions and write metrics plus figures")
    e.add_argument("ckpt")
    e.add_argument("config", help="run config holding coupling.* and optional eval.* keys")
    e.add_argument("--metrics", default=None, help="comma list from energy,mse,diversity (default all)")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", help="scatter plot of a 2-column CSV as SVG")
    pl.add_argument("input")
    pl.add_argument("out")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except (ConfigError, UsageError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
