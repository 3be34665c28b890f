"""``mgstc`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 malformed data,
3 numeric fault (non-finite activations or losses).
"""
from __future__ import annotations

import argparse
import csv
import inspect
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODEL_FIELDS, RunConfig, dump_config, load_config, parse_config_text
from .datastream import (DriftEvent, MetricTrace, Normalizer, ewm_smooth, load_csv,
                         split_and_normalize, synth_stream, write_csv)
from .errors import ConfigError, DataFormatError, MGSTCError, NumericFault
from .online import online_loop, verify_appendix
from .stmodel import MGSTC, checkpoint, train_offline

log = logging.getLogger("mgstc")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SYNTH_OPTIONS = ("period", "level", "amplitude", "noise_std", "burst_rate", "burst_scale",
                 "burst_decay", "coupling", "burst_lag", "hops", "interval_s")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _emit(obj, out=None) -> None:
    line = json.dumps(obj, sort_keys=True)
    print(line, file=out or sys.stdout)


# -- configuration -----------------------------------------------------------
def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    g = p.add_argument_group("run configuration (override the config file)")
    for f in fields(RunConfig):
        if f.name == "seed":
            continue
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar="V",
                       help=f"default {f.default}")


def _overrides(args) -> dict:
    out = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    out["seed"] = args.seed
    return out


def _read_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        return parse_config_text(Path(path).read_text(), str(path))
    except OSError as exc:
        raise ConfigError(f"config file {path}: {exc.strerror}") from exc


def _load_frame(path, cfg: RunConfig):
    try:
        frame = load_csv(path)
    except OSError as exc:
        raise DataFormatError(f"data file {path}: {exc.strerror}") from exc
    if cfg.smoothing > 0:
        frame = frame.with_values(ewm_smooth(frame.values, cfg.smoothing))
    return frame


def _load_checkpoint(path):
    try:
        return checkpoint.load(path)
    except OSError as exc:
        raise ConfigError(f"checkpoint {path}: {exc.strerror}") from exc


# -- train -------------------------------------------------------------------
def cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    cfg.validate()
    frame = _load_frame(args.data, cfg)
    cfg.validate(frame.n_series)
    train, val, _, norm = split_and_normalize(frame, cfg.split_spec(), cfg.history, cfg.horizon)
    model = MGSTC(cfg.model_config(frame.n_series), seed=cfg.seed, lr=cfg.lr)
    log_fh = open(args.log, "w") if args.log else None
    try:
        def report(row):
            _emit(row)
            if log_fh:
                _emit(row, log_fh)

        result = train_offline(model, train.values, val.values, epochs=cfg.epochs,
                               patience=cfg.patience, batch_size=cfg.batch_size,
                               stride=cfg.train_stride, seed=cfg.seed, max_steps=args.max_steps,
                               callback=report)
    finally:
        if log_fh:
            log_fh.close()
    extra = {"run_config": cfg.to_dict(), "normalizer": norm.to_dict(),
             "series_ids": list(frame.series_ids),
             "train": {"best_epoch": result.best_epoch, "best_val_mse": result.best_val_mse,
                       "initial_val_mse": result.initial_val_mse, "steps": result.steps}}
    checkpoint.save(model, args.checkpoint, extra)
    _emit({"checkpoint": str(args.checkpoint), **extra["train"]})
    return EXIT_OK


# -- stream ------------------------------------------------------------------
def _stream_config(args, extra: dict, n_series: int) -> RunConfig:
    """Checkpoint config, then config file, then flags; model fields must agree."""
    saved = RunConfig().updated(extra.get("run_config", {}))
    cfg = saved.updated(_read_config_file(args.config)).updated(_overrides(args))
    diffs = [f"{k}: checkpoint={getattr(saved, k)!r} requested={getattr(cfg, k)!r}"
             for k in MODEL_FIELDS if getattr(saved, k) != getattr(cfg, k)]
    if diffs:
        raise ConfigError("config does not match checkpoint: " + "; ".join(diffs))
    cfg.validate(n_series)
    return cfg


def _prediction_writer(path, norm: Normalizer | None):
    fh = open(path, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["batch", "window", "series", "step", "prediction", "target", "drift"])

    def on_batch(rec, starts, x, y, pred):
        drift = int(rec.verdict is not None and rec.verdict.drifted)
        if norm is not None:
            pred = norm.inverse_series_last(pred)
            y = norm.inverse_series_last(y)
        for s, ps, ys in zip(starts, pred, y):
            for n in range(ps.shape[0]):
                for k in range(ps.shape[1]):
                    w.writerow([rec.index, int(s), n, k, repr(float(ps[n, k])),
                                repr(float(ys[n, k])), drift])

    return fh, on_batch


def cmd_stream(args) -> int:
    model, extra = _load_checkpoint(args.checkpoint)
    saved = RunConfig().updated(extra.get("run_config", {}))
    frame = _load_frame(args.data, saved)
    if frame.n_series != model.config.n_series:
        raise ConfigError(f"config does not match checkpoint: n_series: checkpoint="
                          f"{model.config.n_series} data={frame.n_series}")
    ids = extra.get("series_ids")
    if ids and list(frame.series_ids) != ids:
        raise ConfigError("config does not match checkpoint: series_ids differ")
    cfg = _stream_config(args, extra, frame.n_series)
    _, _, test, _ = split_and_normalize(frame, cfg.split_spec(), cfg.history, cfg.horizon)
    norm = Normalizer.from_dict(extra["normalizer"]) if "normalizer" in extra else None
    if norm is not None:
        # the stream must use the training statistics stored with the model
        raw_test = frame.values[len(frame.values) - test.length:]
        values = norm.transform(raw_test)
    else:
        values = test.values
    scale = norm.std if (cfg.denormalize_metrics and norm is not None) else None
    model.optimizer.set_lr(cfg.lr)

    modes = ["online", "frozen"] if args.mode == "compare" else [args.mode]
    results = {}
    for mode in modes:
        m = model if mode == modes[-1] else checkpoint.from_dict(checkpoint.to_dict(model))[0]
        on_batch, fh = None, None
        if args.predictions and mode == modes[0]:
            fh, on_batch = _prediction_writer(args.predictions, norm if scale is not None else None)
        try:
            res = online_loop(m, values, cfg.online_config(mode == "online"), seed=cfg.seed,
                              max_batches=args.max_batches, metric_scale=scale,
                              on_batch=on_batch)
        finally:
            if fh:
                fh.close()
        if not len(res.trace):
            raise ConfigError("test segment holds no complete window")
        results[mode] = res
        if mode == modes[0]:
            if args.metrics:
                res.trace.write_csv(args.metrics)
            if args.drift_log:
                with open(args.drift_log, "w") as out:
                    for rec in res.drift_log():
                        _emit(rec, out)
        if args.mode == "compare" and mode == "frozen" and args.frozen_metrics:
            res.trace.write_csv(args.frozen_metrics)
    summary = {f"{k}_cum_mse": r.trace.final_cum_mse for k, r in results.items()}
    summary["batches"] = len(results[modes[0]].trace)
    summary["drift_events"] = len(results[modes[0]].drift_batches)
    if args.mode == "compare":
        on, off = summary["online_cum_mse"], summary["frozen_cum_mse"]
        summary["relative_improvement"] = (off - on) / off if off > 0 else 0.0
    _emit(summary)
    return EXIT_OK


# -- synth -------------------------------------------------------------------
def cmd_synth(args) -> int:
    try:
        plan = json.loads(Path(args.plan).read_text()) if args.plan else {}
    except OSError as exc:
        raise ConfigError(f"plan {args.plan}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"plan {args.plan}: invalid JSON ({exc})") from exc
    if not isinstance(plan, dict):
        raise ConfigError("plan must be a JSON object")
    unknown = set(plan) - {"n_series", "length", "events", *SYNTH_OPTIONS}
    if unknown:
        raise ConfigError(f"plan has unknown keys: {sorted(unknown)}")
    n_series = args.n_series if args.n_series is not None else plan.get("n_series", 8)
    length = args.length if args.length is not None else plan.get("length", 8928)
    events = plan.get("events", [])
    if not isinstance(events, list) or not all(isinstance(e, dict) for e in events):
        raise ConfigError("plan 'events' must be a list of objects")
    try:
        defaults = inspect.signature(synth_stream).parameters
        options = {k: type(defaults[k].default)(plan[k]) for k in SYNTH_OPTIONS if k in plan}
        n_series, length = int(n_series), int(length)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"plan: {exc}") from exc
    frame = synth_stream(n_series, length, [DriftEvent.from_dict(e) for e in events],
                         seed=args.seed, **options)
    write_csv(frame, args.out)
    _emit({"out": str(args.out), "rows": frame.length, "series": frame.n_series})
    return EXIT_OK


# -- verify-appendix ---------------------------------------------------------
def cmd_verify_appendix(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    report = verify_appendix(args.trials, seed=args.seed)
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


# -- eval --------------------------------------------------------------------
def cmd_eval(args) -> int:
    batches: dict = {}
    need = ("batch", "prediction", "target")
    try:
        fh = open(args.predictions, newline="")
    except OSError as exc:
        raise DataFormatError(f"{args.predictions}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
            raise DataFormatError(f"{args.predictions}: header must contain {', '.join(need)}")
        for line, row in enumerate(reader, 2):
            try:
                b = int(row["batch"])
                err = float(row["prediction"]) - float(row["target"])
                drift = bool(int(row.get("drift") or 0))
            except (TypeError, ValueError) as exc:
                raise DataFormatError(f"{args.predictions}:{line}: {exc}") from exc
            if not np.isfinite(err):
                raise NumericFault("input", f"{args.predictions}:{line}: non-finite value")
            acc = batches.setdefault(b, [0.0, 0.0, 0, False])
            acc[0] += err * err
            acc[1] += abs(err)
            acc[2] += 1
            acc[3] = acc[3] or drift
    if not batches:
        raise DataFormatError(f"{args.predictions}: no prediction rows")
    trace = MetricTrace()
    for b in sorted(batches):
        se, ae, n, drift = batches[b]
        trace.append(se / n, ae / n, drift)
    if args.metrics:
        trace.write_csv(args.metrics)
    total = sum(v[2] for v in batches.values())
    _emit({"batches": len(trace), "mse": sum(v[0] for v in batches.values()) / total,
           "mae": sum(v[1] for v in batches.values()) / total,
           "cum_mse": trace.final_cum_mse})
    return EXIT_OK


def cmd_show_config(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    cfg.validate()
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


# -- parser ------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mgstc", description="Multi-grained spatial-temporal traffic forecasting "
                                          "with online drift adaptation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    t = sub.add_parser("train", parents=[common], help="offline training with early stopping")
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--checkpoint", type=Path, required=True, help="output checkpoint path")
    t.add_argument("--log", type=Path, help="per-epoch NDJSON log")
    t.add_argument("--max-steps", type=int)
    _add_config_flags(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("stream", parents=[common], help="replay the test split as a stream")
    s.add_argument("--data", type=Path, required=True)
    s.add_argument("--checkpoint", type=Path, required=True)
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--online", dest="mode", action="store_const", const="online")
    mode.add_argument("--frozen", dest="mode", action="store_const", const="frozen")
    mode.add_argument("--compare", dest="mode", action="store_const", const="compare",
                      help="run online and frozen back to back")
    s.set_defaults(mode="online")
    s.add_argument("--metrics", type=Path, help="per-batch metrics CSV")
    s.add_argument("--frozen-metrics", type=Path, help="frozen trace CSV with --compare")
    s.add_argument("--drift-log", type=Path, help="NDJSON drift verdicts")
    s.add_argument("--predictions", type=Path, help="per-value prediction CSV (for eval)")
    s.add_argument("--max-batches", type=int)
    _add_config_flags(s)
    s.set_defaults(func=cmd_stream)

    y = sub.add_parser("synth", parents=[common], help="write a synthetic stream CSV")
    y.add_argument("--plan", type=Path, help="JSON object: n_series, length, events, options")
    y.add_argument("--out", type=Path, required=True)
    y.add_argument("--n-series", type=int)
    y.add_argument("--length", type=int)
    y.set_defaults(func=cmd_synth)

    a = sub.add_parser("verify-appendix", parents=[common],
                       help="Monte Carlo check of the augmentation gap inequality")
    a.add_argument("--trials", type=int, default=10_000)
    a.add_argument("--out", type=Path)
    a.set_defaults(func=cmd_verify_appendix)

    e = sub.add_parser("eval", parents=[common], help="metrics over a saved prediction file")
    e.add_argument("--predictions", type=Path, required=True)
    e.add_argument("--metrics", type=Path, help="per-batch metrics CSV")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("config", parents=[common], help="print the effective configuration")
    _add_config_flags(c)
    c.set_defaults(func=cmd_show_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not 0 <= args.seed < 2**64:
        print("mgstc: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            return args.func(args)
    except DataFormatError as exc:
        print(f"mgstc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericFault, FloatingPointError) as exc:
        print(f"mgstc: numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MGSTCError, ValueError) as exc:
        print(f"mgstc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
