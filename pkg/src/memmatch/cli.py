"""Command line entry point: ``memmatch <subcommand> ...``.

Exit codes: 0 success, 1 input/parse error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import OrderedDict

import numpy as np

from . import data as D
from .baselines import pwm_fit, pwm_scan_codes
from .errors import InputError, NumericError, ParseError
from .evaluation import aggregate, export_trace, format_table, paired_ttest, render_heatmap, roc_auc
from .model import HyperParams, ModelParams, forward, predict_proba
from .training import GridSpec, TrainConfig, fit, grid_search

log = logging.getLogger("memmatch")


def _fmt(path):
    return "fasta" if str(path).lower().endswith((".fa", ".fasta", ".fna")) else "tsv"


def _load(path):
    return D.load_dataset(path, _fmt(path))


def _train_config(args):
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        optimizer=args.optimizer,
    )


def cmd_synth(args):
    motifs = [D.consensus_pwm(m, args.pseudo) for m in args.motif or []]
    ds = D.generate_synthetic(motifs, args.n, args.t, args.plant_rate, args.seed)
    D.save_dataset(ds, args.out, _fmt(args.out))
    print(f"wrote {len(ds)} records to {args.out}")


def cmd_train(args):
    train = _load(args.data)
    val = _load(args.val) if args.val else None
    hp = HyperParams(ell=args.ell, p=args.p, d=args.d, t=train.t)
    params, history = fit(train, val, hp, _train_config(args), kind=args.kind, history_path=args.history)
    params.save(args.out)
    best = max(h["val_auc"] for h in history)
    print(f"epochs={len(history)} best_val_auc={best:.6f} model={args.out}")


def _parse_grid(text):
    if text == "default":
        return GridSpec()
    fields = {}
    for part in text.split(";"):
        key, _, values = part.partition("=")
        fields[key.strip()] = tuple(int(v) for v in values.split(","))
    try:
        return GridSpec(fields["ell"], fields["p"], fields["d"])
    except KeyError as exc:
        raise InputError(f"grid spec missing {exc.args[0]!r}; use 'ell=..;p=..;d=..' or 'default'") from None


def cmd_gridsearch(args):
    train = _load(args.data)
    val = _load(args.val) if args.val else None
    ranked = grid_search(train, val, _parse_grid(args.grid), _train_config(args), kind=args.kind)
    with open(args.out, "w") as fh:
        json.dump(ranked, fh, indent=1)
    top = ranked[0]
    print(f"points={len(ranked)} best ell={top['ell']} p={top['p']} d={top['d']} val_auc={top['val_auc']:.6f}")


def cmd_eval(args):
    params = ModelParams.load(args.model)
    ds = _load(args.data)
    if ds.t != params.hp.t:
        raise InputError(f"data length {ds.t} != model length {params.hp.t}")
    scores = predict_proba(params, ds.codes)
    with open(args.scores, "w", newline="\n") as fh:
        for rec, s in zip(ds.records, scores):
            fh.write(f"{rec.seq}\t{rec.label}\t{float(s)!r}\n")
    print(f"auc={roc_auc(scores, ds.labels):.6f}")


def cmd_baseline_pwm(args):
    train = _load(args.train)
    positives = train.subset([i for i, r in enumerate(train.records) if r.label == 1])
    pwm = pwm_fit(positives, args.width, args.pseudo)
    D.write_pwm(pwm, args.pwm_out)
    test = _load(args.data)
    scores, _ = pwm_scan_codes(test.codes, pwm)
    print(f"consensus={pwm.consensus()} pwm={args.pwm_out}")
    print(f"auc={roc_auc(scores, test.labels):.6f}")


def cmd_visualize(args):
    params = ModelParams.load(args.model)
    if params.kind != "mmn":
        raise InputError("visualize needs an MMN checkpoint")
    seq = args.seq.strip().upper()
    exp = export_trace(seq, forward(seq, params))
    with open(args.out, "w") as fh:
        fh.write(exp.to_json())
    if args.svg:
        with open(args.svg, "w", newline="\n") as fh:
            fh.write(render_heatmap(exp))
    top = int(np.argmax(exp.alpha))
    print(f"prediction={exp.prediction:.6f} max_alpha_position={top}")


def _read_aucs(path):
    groups = OrderedDict()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw or raw.startswith("#"):
                continue
            parts = raw.split("\t")
            if len(parts) == 2:
                model, name, value = "model", parts[0], parts[1]
            elif len(parts) == 3:
                model, name, value = parts
            else:
                raise ParseError("expected NAME<TAB>AUC or MODEL<TAB>NAME<TAB>AUC", line=lineno)
            try:
                groups.setdefault(model, OrderedDict())[name] = float(value)
            except ValueError:
                raise ParseError(f"bad AUC value {value!r}", line=lineno) from None
    if not groups:
        raise InputError(f"{path}: no AUC rows")
    return groups


def cmd_report(args):
    groups = _read_aucs(args.aucs)
    summaries = OrderedDict((m, aggregate(list(rows.items()))) for m, rows in groups.items())
    print(format_table(summaries))
    models = list(groups)
    for other in models[1:]:
        shared = [n for n in groups[models[0]] if n in groups[other]]
        if len(shared) >= 2:
            t, p = paired_ttest([groups[models[0]][n] for n in shared], [groups[other][n] for n in shared])
            print(f"paired t-test {models[0]} vs {other}: t={t:.4f} p={p:.4g} (n={len(shared)})")


def _add_training_flags(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--patience", type=int, default=5)
    sp.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    sp.add_argument("--kind", choices=("mmn", "lstm"), default="mmn")


def build_parser():
    ap = argparse.ArgumentParser(prog="memmatch", description="Memory matching networks for DNA sequence classification")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a planted-motif dataset")
    sp.add_argument("--motif", action="append", help="consensus string; repeat for several motifs")
    sp.add_argument("--n", type=int, default=4000)
    sp.add_argument("--t", type=int, default=101)
    sp.add_argument("--plant-rate", type=float, default=1.0)
    sp.add_argument("--pseudo", type=float, default=0.0, help="per-column mutation mass of planted motifs")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="fit one model")
    sp.add_argument("--data", required=True)
    sp.add_argument("--val")
    sp.add_argument("--ell", type=int, default=4)
    sp.add_argument("--p", type=int, default=4)
    sp.add_argument("--d", type=int, default=32)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history")
    _add_training_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("gridsearch", help="fit every (ell, p, d) grid point")
    sp.add_argument("--data", required=True)
    sp.add_argument("--val")
    sp.add_argument("--grid", default="default", help="'default' or 'ell=2,4;p=4;d=32'")
    sp.add_argument("--out", required=True)
    _add_training_flags(sp)
    sp.set_defaults(func=cmd_gridsearch)

    sp = sub.add_parser("eval", help="score a dataset with a checkpoint")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--scores", default="scores.tsv")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("baseline-pwm", help="fit and evaluate the PWM scanning baseline")
    sp.add_argument("--train", required=True)
    sp.add_argument("--width", type=int, required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--pseudo", type=float, default=0.5)
    sp.add_argument("--pwm-out", default="motif.pwm")
    sp.set_defaults(func=cmd_baseline_pwm)

    sp = sub.add_parser("visualize", help="export attention and memory weights for one sequence")
    sp.add_argument("--model", required=True)
    sp.add_argument("--seq", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--svg")
    sp.set_defaults(func=cmd_visualize)

    sp = sub.add_parser("report", help="mean/median/stdev table of per-dataset AUCs")
    sp.add_argument("--aucs", required=True)
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means numeric failure
        return 1 if exc.code else 0
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
