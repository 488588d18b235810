"""Command-line entry point: ``mimowave {dataset,train,generate,eval}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric divergence.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from ._validation import DomainError, NotPSDError, ShapeError
from .config import ConfigError, load_config

logger = logging.getLogger("mimowave")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4


class DataError(RuntimeError):
    pass


def _config(args, seed_key):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seeds.{seed_key}={int(args.seed)}")
    return load_config(args.config, overrides)


def _load_dataset(cfg):
    from .dataset import MANIFEST_NAME, load_dataset

    d = cfg.path("dataset_dir")
    if not os.path.exists(os.path.join(d, MANIFEST_NAME)):
        raise DataError(f"no dataset at {d} (run `mimowave dataset` first)")
    return load_dataset(d)


def _load_checkpoint(cfg):
    from .gan import ModelCheckpoint

    p = cfg.path("checkpoint")
    if not os.path.exists(p):
        raise DataError(f"no checkpoint at {p} (run `mimowave train` first)")
    return ModelCheckpoint.load(p)


def cmd_dataset(args):
    from .dataset import generate_dataset, save_dataset

    cfg = _config(args, "dataset")
    catalog = cfg.catalog()
    manifest, samples = generate_dataset(
        catalog, N=cfg.N, M=cfg.M, samples_per_class=int(cfg["dataset"]["samples_per_class"]),
        seed=int(cfg["seeds"]["dataset"]), geom=cfg.geometry(), grid=cfg.grid(),
        restarts=int(cfg["covfit"]["restarts"]), max_iters=int(cfg["covfit"]["max_iters"]),
        fit_tol=float(cfg["covfit"]["tol"]), cao_tol=float(cfg["cao"]["tol"]),
        cao_max_iter=int(cfg["cao"]["max_iter"]), n_jobs=cfg["dataset"]["n_jobs"],
    )
    out = cfg.path("dataset_dir")
    try:
        save_dataset(out, manifest, samples)
        with open(os.path.join(out, "fit_report.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class_id", "name", "objective", "alpha", "iterations", "converged", "grad_norm",
                        "residual_mean"])
            for spec, fit, st in zip(catalog, manifest.fits, manifest.stats):
                w.writerow([spec.class_id, spec.name, repr(fit.objective), repr(fit.alpha), fit.iterations,
                            int(fit.converged), repr(fit.grad_norm), repr(st["residual_mean"])])
    except OSError as exc:
        raise DataError(f"cannot write dataset to {out}: {exc}") from exc
    print(f"wrote {len(catalog)} classes x {manifest.samples_per_class} samples to {out}")
    return EXIT_OK


def _truncate_log(path, step):
    if not os.path.exists(path):
        return
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return
    kept = [rows[0]] + [r for r in rows[1:] if int(r[0]) < step]
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(kept)


def cmd_train(args):
    from .gan import ModelCheckpoint, TrainConfig, Trainer, TrainingData

    cfg = _config(args, "train")
    manifest, samples = _load_dataset(cfg)
    if (manifest.N, manifest.M) != (cfg.N, cfg.M):
        raise ConfigError(f"dataset holds {manifest.N}x{manifest.M} codes, config asks for {cfg.N}x{cfg.M}")
    data = TrainingData.from_samples(manifest, samples)
    ckpt_path, log_path = cfg.path("checkpoint"), cfg.path("metric_log")
    for p in (ckpt_path, log_path):
        os.makedirs(os.path.dirname(p) or ".", exist_ok=True)
    train_cfg = cfg.train_config()
    if args.resume and os.path.exists(ckpt_path):
        ckpt = ModelCheckpoint.load(ckpt_path)
        _truncate_log(log_path, ckpt.step)
        trainer = Trainer.resume(data, ckpt, train_cfg, log_path=log_path)
        print(f"resuming from step {ckpt.step}")
    else:
        if os.path.exists(log_path):
            os.remove(log_path)
        trainer = Trainer(data, cfg.generator_config(), cfg.discriminator_config(), train_cfg, log_path=log_path)
    steps = int(args.steps) if args.steps is not None else None
    ckpt = trainer.run(n_steps=steps, checkpoint_path=ckpt_path)
    last = [r for r in trainer.log if r["phase"] == "generator"]
    if last:
        print(f"step {ckpt.step}: generator loss {last[-1]['generator_loss']:.4f}, "
              f"correlation penalty {last[-1]['corr_penalty']:.4f}")
    print(f"checkpoint {ckpt_path}")
    return EXIT_OK


def _read_correlation(path):
    if path.endswith(".npy"):
        R = np.load(path)
    else:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        R = np.asarray(d["real"], dtype=float) + 1j * np.asarray(d.get("imag", np.zeros_like(d["real"])), dtype=float)
    return np.asarray(R, dtype=np.complex128)


def cmd_generate(args):
    from .dataset import write_codes
    from .gan import correlation_penalty, sample_waveforms

    cfg = _config(args, "generate")
    ckpt = _load_checkpoint(cfg)
    if args.r_file:
        R = _read_correlation(args.r_file)
    else:
        if not ckpt.correlations:
            raise DataError("checkpoint carries no class correlations; pass --r-file")
        cid = int(args.class_id)
        if not 0 <= cid < len(ckpt.correlations):
            raise ConfigError(f"class id {cid} not in 0..{len(ckpt.correlations) - 1}")
        R = ckpt.correlations[cid]
    if R.shape != (ckpt.M, ckpt.M):
        raise ShapeError(f"R is {R.shape[0]}x{R.shape[1]} but the model generates M={ckpt.M} waveforms")
    X = sample_waveforms(ckpt, R, int(args.count), seed=int(cfg["seeds"]["generate"]))
    out = cfg.path("output_dir")
    os.makedirs(out, exist_ok=True)
    stem = args.name or "generated"
    write_codes(os.path.join(out, f"{stem}.bin"), X)
    with open(os.path.join(out, f"{stem}_phases.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "row", "col", "phase_rad"])
        for s in range(X.shape[0]):
            ph = np.angle(X[s])
            for n in range(X.shape[1]):
                for m in range(X.shape[2]):
                    w.writerow([s, n, m, repr(float(ph[n, m]))])
    print(f"wrote {X.shape[0]} code matrices to {os.path.join(out, stem + '.bin')}")
    print(f"mean correlation penalty {correlation_penalty(X, R):.6f}")
    return EXIT_OK


def _eval_inputs(cfg):
    from .dataset import stack_by_class
    from .gan import sample_waveforms

    manifest, samples = _load_dataset(cfg)
    ckpt = _load_checkpoint(cfg)
    if ckpt.M != manifest.M or ckpt.N != manifest.N:
        raise ShapeError("checkpoint and dataset disagree on code dimensions")
    data = stack_by_class(samples, manifest.n_classes)
    k = int(cfg["eval"]["samples_per_class"])
    seed = int(cfg["seeds"]["generate"])
    gan = {c: sample_waveforms(ckpt, manifest.correlation(c), k, seed=seed + c) for c in range(manifest.n_classes)}
    data = {c: X[:k] for c, X in data.items()}
    return manifest, ckpt, data, gan


def _eval_beampattern(cfg, out):
    from .array import beampattern
    from .beamspec import sample_on_grid
    from .metrics import beampattern_rmse, mean_correlation, write_csv

    manifest, _, data, gan = _eval_inputs(cfg)
    geom, grid = manifest.geometry, manifest.grid
    rows, summary = [], []
    for c, spec in enumerate(manifest.catalog):
        desired = sample_on_grid(spec, grid)
        curves = []
        for R in (manifest.correlation(c), mean_correlation(data[c]), mean_correlation(gan[c])):
            b = beampattern(R, geom, grid)
            alpha = float(desired @ b) / float(desired @ desired)
            curves.append(b / alpha)
        for i, ang in enumerate(grid.angles_deg):
            rows.append([c, float(ang), float(desired[i]), float(curves[0][i]), float(curves[1][i]), float(curves[2][i])])
        summary.append({
            "class_id": c, "name": spec.name,
            "rmse_fit": beampattern_rmse(manifest.correlation(c), spec, geom, grid),
            "rmse_data": float(np.mean([beampattern_rmse(x, spec, geom, grid) for x in data[c]])),
            "rmse_gan": float(np.mean([beampattern_rmse(x, spec, geom, grid) for x in gan[c]])),
        })
    with open(os.path.join(out, "beampattern.csv"), "w", newline="") as fh:
        write_csv(rows, ["class_id", "angle_deg", "desired", "achieved_fit", "achieved_data", "achieved_gan"], fh)
    with open(os.path.join(out, "beampattern_report.json"), "w") as fh:
        json.dump({"classes": summary}, fh, indent=2)
    for s in summary:
        print(f"class {s['class_id']:>2} {s['name']:<12} rmse fit {s['rmse_fit']:.4f}  "
              f"data {s['rmse_data']:.4f}  gan {s['rmse_gan']:.4f}")


def _eval_autocorr(cfg, out):
    from .metrics import autocorrelation_profile, write_csv

    _, _, data, gan = _eval_inputs(cfg)
    c = int(cfg["eval"]["class_id"])
    rows = []
    for source, X in (("data", data[c][0]), ("gan", gan[c][0])):
        taus, mags = autocorrelation_profile(X)
        rows.extend([source, int(t), float(v)] for t, v in zip(taus, mags))
    with open(os.path.join(out, "autocorr.csv"), "w", newline="") as fh:
        write_csv(rows, ["source", "tau", "magnitude"], fh)
    print(f"wrote {len(rows)} autocorrelation rows for class {c}")


def _eval_diversity(cfg, out):
    from .metrics import diversity_report

    _, _, data, gan = _eval_inputs(cfg)
    rep = diversity_report(gan, data)
    with open(os.path.join(out, "diversity.txt"), "w") as fh:
        fh.write(rep.table() + "\n")
    with open(os.path.join(out, "diversity.json"), "w") as fh:
        json.dump({"c_in_gan": rep.c_in_gan, "c_in_data": rep.c_in_data, "c_nn": rep.c_nn,
                   "n_gan": rep.n_gan, "n_data": rep.n_data, "per_class": rep.per_class}, fh, indent=2)
    print(rep.table())


def _eval_bench(cfg, out):
    from .metrics import benchmark_generation, write_csv

    ckpt = _load_checkpoint(cfg)
    rep = benchmark_generation(ckpt, repeats=int(cfg["eval"]["bench_repeats"]),
                               seed=int(cfg["seeds"]["generate"]), cao_tol=float(cfg["cao"]["tol"]),
                               cao_max_iter=int(cfg["cao"]["max_iter"]))
    with open(os.path.join(out, "bench.csv"), "w", newline="") as fh:
        write_csv(rep.rows(), ["method", "scenario", "seconds"], fh)
    with open(os.path.join(out, "bench.txt"), "w") as fh:
        fh.write(rep.table() + f"\n# {rep.hardware}, median of {rep.repeats}\n")
    print(rep.table())


_EVALS = {"beampattern": _eval_beampattern, "autocorr": _eval_autocorr,
          "diversity": _eval_diversity, "bench": _eval_bench}


def cmd_eval(args):
    cfg = _config(args, "generate")
    out = cfg.path("output_dir")
    os.makedirs(out, exist_ok=True)
    _EVALS[args.which](cfg, out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mimowave", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="seed for this command (overrides seeds.<command>)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set train.n_steps=100 (repeatable)")

    sp = sub.add_parser("dataset", help="fit correlations and synthesize the training corpus")
    common(sp)
    sp.set_defaults(func=cmd_dataset)

    sp = sub.add_parser("train", help="train the conditional generator")
    common(sp)
    sp.add_argument("--resume", action="store_true", help="continue from the existing checkpoint")
    sp.add_argument("--steps", type=int, help="stop after this many total generator steps")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("generate", help="sample code matrices from a trained checkpoint")
    common(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--class-id", type=int, default=0, help="condition on a training class (default 0)")
    g.add_argument("--r-file", help="condition on R from a .npy or JSON {real, imag} file")
    sp.add_argument("--count", type=int, default=1, help="number of code matrices, one batch")
    sp.add_argument("--name", help="output file stem (default 'generated')")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("eval", help="write evaluation CSVs and reports")
    common(sp)
    sp.add_argument("which", choices=sorted(_EVALS))
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    from .gan import TrainingDivergence

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, ShapeError, DomainError, NotPSDError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
