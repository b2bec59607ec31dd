"""Command-line front end.

    edgelgnb datagen  --weeks 52 --seed 7 --out corpus.csv
    edgelgnb train    --corpus corpus.csv --seed 1 --out model.json [--model lgnb|mlp|lstm_classifier]
    edgelgnb detect   --model model.json --corpus corpus.csv --out pred.csv
    edgelgnb eval     --pred pred.csv --truth corpus.labels.csv --out scores.csv --json scores.json
    edgelgnb simulate --deployment cloud_default.json --volumes 1:12 --seed 0 --out curve.csv
    edgelgnb compare  --a lgnb_profile --b cinc2017_profile --out report.json

Config documents are JSON; the shipped deployment and profile documents can
be named without a path. Every output is a pure function of the inputs and
the seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen, edgesim, lgnb, metrics
from .nn import TrainingConfig
from .series import read_csv

EPILOG = """CSV formats:
  series      timestamp,value          (ISO-8601 UTC, empty value = missing)
  labels      week_index,label,kind    (label: normal|anomaly)
  predictions week_index,label,score   (score: anomaly minus normal log-evidence)
  scores      candidate,fold,accuracy,precision,recall,f_beta
  curve       volume,mean_ms,p50_ms,p95_ms,max_ms,dropped
"""


class CliError(Exception):
    pass


def _labels_path(corpus, given):
    if given:
        return Path(given)
    corpus = Path(corpus)
    return corpus.with_name(corpus.stem + ".labels.csv")


def _require_file(path, what):
    if not Path(path).is_file():
        raise CliError(f"{what} not found: {path}")
    return Path(path)


def _require_outdir(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise CliError(f"output directory does not exist: {parent}")
    return Path(path)


def _load_json(path, what):
    try:
        return json.loads(_require_file(path, what).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def _windows(corpus, labels_path=None, factor=4, need_labels=True):
    series = read_csv(_require_file(corpus, "corpus"))
    if not series.complete:
        raise CliError(f"{corpus}: series has missing values; impute before use")
    lp = _labels_path(corpus, labels_path)
    if lp.is_file():
        labels, kinds = datagen.read_labels(lp)
    elif need_labels:
        raise CliError(f"labels file not found: {lp}")
    else:
        n = len(series) // datagen.SAMPLES_PER_WEEK
        labels, kinds = np.zeros(n, dtype=int), ("",) * n
    ls = datagen.LabeledSeries(series, labels, kinds)
    return datagen.weekly_windows(ls, factor, Path(corpus).stem)


def _parse_volumes(text):
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return list(range(int(lo), int(hi) + 1))
        return [float(v) if "." in v else int(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"bad --volumes {text!r}; use 'a:b' or a comma list") from None


# ----------------------------------------------------------------------

def cmd_datagen(args):
    cfg = {}
    if args.config:
        cfg = _load_json(args.config, "generator config")
        cfg.pop("schema_version", None)
    cfg.update(weeks=args.weeks if args.weeks is not None else cfg.get("weeks", 52), seed=args.seed)
    if args.anomaly_rate is not None:
        cfg["anomaly_rate"] = args.anomaly_rate
    out = _require_outdir(args.out)
    ls = datagen.generate(datagen.GeneratorConfig.from_dict(cfg))
    datagen.write_corpus(ls, out, args.labels)


def _training_config(args):
    d = {}
    if args.config:
        d = _load_json(args.config, "training config")
    d["seed"] = args.seed
    if args.epochs is not None:
        d["epochs"] = args.epochs
    return TrainingConfig.from_dict(d)


def cmd_train(args):
    out = _require_outdir(args.out)
    samples = _windows(args.corpus, args.labels, args.factor)
    cfg = _training_config(args)
    if args.model == "lgnb":
        model = lgnb.fit_lgnb(samples, cfg, var_smoothing=args.var_smoothing)
    else:
        model = lgnb.train_baseline(args.model, samples, cfg)
    lgnb.save_model(model, out)


def cmd_detect(args):
    out = _require_outdir(args.out)
    model = lgnb.load_model(_require_file(args.model, "model"))
    samples = _windows(args.corpus, args.labels, args.factor, need_labels=False)
    if isinstance(model, lgnb.LgnbModel):
        lp = lgnb.gnb_log_posteriors(model.gnb, model.residuals(samples).residuals)
        labels = lgnb.decide(lp)
        score = lp[:, 1] - lp[:, 0]
    else:
        p = np.maximum(model.predict_proba(samples), 1e-300)
        labels = model.predict(samples)
        score = np.log(p[:, 1]) - np.log(p[:, 0])
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["week_index", "label", "score"])
        for k, (lab, s) in enumerate(zip(labels, score)):
            w.writerow([k, datagen.LABEL_NAMES[int(lab)], format(float(s), ".17g")])


def cmd_eval(args):
    pred, _ = datagen.read_labels(_require_file(args.pred, "predictions"))
    truth, _ = datagen.read_labels(_require_file(args.truth, "truth labels"))
    if pred.shape != truth.shape:
        raise CliError(f"{args.pred} has {pred.size} rows but {args.truth} has {truth.size}")
    cm = metrics.confusion(pred, truth)
    s = metrics.scores(cm, args.beta)
    metrics.write_scores(s, cm, args.out and _require_outdir(args.out),
                         args.json and _require_outdir(args.json))
    if args.cv:
        if not (args.corpus and args.cv_out):
            raise CliError("--cv needs --corpus and --cv-out")
        samples = _windows(args.corpus, args.truth, args.factor)
        if args.candidates:
            cands = [TrainingConfig.from_dict(d) for d in _load_json(args.candidates, "candidates")]
        else:
            cands = [TrainingConfig(seed=args.seed)]
        if args.model == "lgnb":
            fit = lambda c, s: lgnb.fit_lgnb(s, c)  # noqa: E731
        else:
            fit = lambda c, s: lgnb.train_baseline(args.model, s, c)  # noqa: E731
        res = metrics.kfold_select(cands, samples, fit, k=args.folds, seed=args.seed)
        res.write_csv(_require_outdir(args.cv_out))
    if not (args.out or args.json):
        print(json.dumps(s.to_dict(), sort_keys=True))


def cmd_simulate(args):
    out = _require_outdir(args.out)
    dep = edgesim.load_deployment(args.deployment)
    volumes = _parse_volumes(args.volumes)
    report = edgesim.delay_curve(dep, volumes, args.duration, args.seed, args.arrival)
    report.write_csv(out)
    if args.trace:
        trace = edgesim.simulate(dep, edgesim.Workload(float(volumes[-1]), args.duration,
                                                       args.arrival, args.seed))
        trace.write_csv(_require_outdir(args.trace))


def cmd_compare(args):
    rep = edgesim.compare_profiles(edgesim.load_profile(args.a), edgesim.load_profile(args.b))
    text = json.dumps(rep, indent=1, sort_keys=True) + "\n"
    if args.out:
        _require_outdir(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="edgelgnb", description=__doc__.split("\n")[0],
                                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("datagen", help="write a synthetic corpus and its labels sidecar")
    s.add_argument("--weeks", type=int)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--labels", help="labels sidecar path (default <out stem>.labels.csv)")
    s.add_argument("--anomaly-rate", type=float)
    s.add_argument("--config", help="generator config JSON")
    s.set_defaults(func=cmd_datagen)

    s = sub.add_parser("train", help="fit LGNB or a baseline and save it")
    s.add_argument("--corpus", required=True)
    s.add_argument("--labels")
    s.add_argument("--model", choices=["lgnb", "mlp", "lstm_classifier"], default="lgnb")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--config", help="training config JSON")
    s.add_argument("--var-smoothing", type=float, default=1e-9)
    s.add_argument("--factor", type=int, default=4, help="down-sampling factor")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("detect", help="label every week of a corpus")
    s.add_argument("--model", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--labels")
    s.add_argument("--factor", type=int, default=4)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("eval", help="score predictions, optionally run k-fold CV")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--out", help="scores CSV")
    s.add_argument("--json", help="summary JSON")
    s.add_argument("--cv", action="store_true")
    s.add_argument("--corpus")
    s.add_argument("--model", choices=["lgnb", "mlp", "lstm_classifier"], default="lgnb")
    s.add_argument("--candidates", help="JSON list of training configs")
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--factor", type=int, default=4)
    s.add_argument("--cv-out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="delay-vs-volume curve for a deployment")
    s.add_argument("--deployment", required=True)
    s.add_argument("--volumes", default="1:12")
    s.add_argument("--duration", type=float, default=10.0, help="simulated seconds per volume")
    s.add_argument("--arrival", choices=["uniform", "poisson"], default="uniform")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--trace", help="also dump the per-request trace of the last volume")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="compare two model resource profiles")
    s.add_argument("--a", default="lgnb_profile")
    s.add_argument("--b", default="cinc2017_profile")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, FileNotFoundError, KeyError, TypeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        sys.stderr.write(f"edgelgnb {args.command}: error: {msg}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
