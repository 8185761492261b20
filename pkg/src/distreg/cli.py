"""Batch command-line front end.

Subcommands: simulate, score, train, predict, evaluate, oracle.
Exit codes: 0 success, 2 usage/validation error, 3 numerical failure.
Every command is deterministic given identical inputs and seeds, and no
command writes into its input directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import data_io, evaluation, oracles, pipeline
from .network import Disruption
from .pipeline import InterferenceConfig, PerturbedObservation
from .regression import MixtureEmbeddingModel, SingularGramError
from .simplex_qp import SimplexQPError

USAGE_ERROR = 2
NUMERICAL_ERROR = 3


def _load_config(path: str | None) -> InterferenceConfig:
    if path is None:
        return InterferenceConfig()
    return data_io.parse_config(path)


def _config_for_data(data_dir: Path, config_arg: str | None) -> InterferenceConfig:
    if config_arg is not None:
        return data_io.parse_config(config_arg)
    default = data_dir / "config.txt"
    if default.exists():
        return data_io.parse_config(default)
    return InterferenceConfig()


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = data_io.load_scenario(args.scenario)
    if args.seed is not None:
        from dataclasses import replace

        scenario = replace(scenario, seed=args.seed)
    dataset = data_io.generate_synthetic(scenario)
    cfg = InterferenceConfig(seed=scenario.seed)
    data_io.write_dataset(dataset, args.out, config=cfg)
    print(f"wrote {len(dataset.journeys)} days, {len(dataset.disruptions)} disruptions to {args.out}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    data_dir = Path(args.data)
    bundle = data_io.load_dataset(data_dir)
    cfg = _config_for_data(data_dir, args.config)
    records = evaluation.score_disruptions(
        bundle.days, bundle.disruptions, bundle.graph, cfg, args.top
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_scores_csv(out, records)
    print(f"scored {len(records)} disruptions; wrote {out}")
    return 0


def _model_to_json(model: MixtureEmbeddingModel, cfg: InterferenceConfig) -> dict:
    return {
        "alpha": [float(a) for a in model.alpha],
        "config": {
            "xi": cfg.xi,
            "beta": cfg.beta,
            "I": cfg.n_inputs,
            "R": cfg.rescale_levels,
            "c": cfg.rescale_span,
            "kernel.family": cfg.kernel_family,
            "kernel.rho": cfg.rho,
            "ridge": cfg.ridge,
            "g_convention": cfg.g_convention,
            "x5_mode": cfg.x5_mode,
            "seed": cfg.seed,
        },
    }


def _model_from_json(raw: dict) -> tuple[MixtureEmbeddingModel, InterferenceConfig]:
    c = raw["config"]
    cfg = InterferenceConfig(
        xi=c["xi"],
        beta=c["beta"],
        n_inputs=c["I"],
        rescale_levels=c["R"],
        rescale_span=c["c"],
        kernel_family=c["kernel.family"],
        rho=c["kernel.rho"],
        ridge=c["ridge"],
        g_convention=c["g_convention"],
        x5_mode=c["x5_mode"],
        seed=c["seed"],
    )
    return MixtureEmbeddingModel(alpha=np.array(raw["alpha"])), cfg


def _natural_days_and_observations(
    bundle: data_io.DatasetBundle,
) -> tuple[list, list[PerturbedObservation]]:
    disrupted = {z.day for z in bundle.disruptions}
    naturals = [bundle.days[d] for d in sorted(bundle.days) if d not in disrupted]
    observations = []
    for z in bundle.disruptions:
        if z.day not in bundle.days:
            raise ValueError(f"no journey data for disruption day {z.day}")
        observations.append(PerturbedObservation.from_day_counts(bundle.days[z.day], z))
    return naturals, observations


def _cmd_train(args: argparse.Namespace) -> int:
    bundle = data_io.load_dataset(Path(args.data))
    cfg = _config_for_data(Path(args.data), args.config)
    naturals, observations = _natural_days_and_observations(bundle)
    if cfg.rho is None:
        cfg = cfg.with_rho(pipeline.resolve_rho(naturals, observations, bundle.graph, cfg))
    model = pipeline.train(naturals, observations, bundle.graph, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "model.json"
    path.write_text(json.dumps(_model_to_json(model, cfg), indent=2, sort_keys=True) + "\n")
    print(f"trained on {len(observations)} disruptions; wrote {path}")
    return 0


def _parse_disruption_spec(spec: str) -> Disruption:
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 4:
        raise ValueError(
            f"disruption spec must be `day,t_start,t_end,roi1;roi2;...`, got {spec!r}"
        )
    day, t_start, t_end = (int(p) for p in parts[:3])
    roi = tuple(int(tok) for tok in parts[3].split(";") if tok != "")
    return Disruption(day=day, t_start=t_start, t_end=t_end, roi=roi)


def _cmd_predict(args: argparse.Namespace) -> int:
    bundle = data_io.load_dataset(Path(args.data))
    raw = json.loads(Path(args.model).read_text())
    model, cfg = _model_from_json(raw)
    if args.config is not None:
        file_cfg = data_io.parse_config(args.config)
        if (file_cfg.xi, file_cfg.g_convention, file_cfg.x5_mode) != (
            cfg.xi,
            cfg.g_convention,
            cfg.x5_mode,
        ):
            print(
                "predict: config file disagrees with the stored model config; "
                "using the model's stored configuration",
                file=sys.stderr,
            )
    z_new = _parse_disruption_spec(args.disruption)
    z_new.validate_against(bundle.graph.n_nodes, *bundle.t_window)
    disrupted = {z.day for z in bundle.disruptions}
    naturals = [bundle.days[d] for d in sorted(bundle.days) if d not in disrupted]
    mixture, samples = pipeline.predict(
        model, naturals, z_new, bundle.graph, cfg, args.n_samples, args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "theta.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["component", "theta"])
        for label, t in zip(mixture.basis.labels, mixture.theta):
            writer.writerow([label, repr(float(t))])
    summary = {
        "fit_residual": mixture.fit_residual,
        "theta_sum": float(np.sum(mixture.theta)),
        "n_samples": args.n_samples,
        "seed": args.seed,
        "roi": list(z_new.roi),
    }
    (out / "prediction.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out / "samples.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"station{r}" for r in z_new.roi])
        for row in samples.samples:
            writer.writerow([repr(float(v)) for v in row])
    print(f"predicted disruption {args.disruption!r}; wrote {out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    bundle = data_io.load_dataset(Path(args.data))
    cfg = _config_for_data(Path(args.data), args.config)
    scores, records = evaluation.run_evaluation(
        bundle.days,
        bundle.disruptions,
        bundle.graph,
        cfg,
        out_dir=args.out,
        n_folds=args.folds,
        top_n=args.top,
        seed=args.seed if args.seed is not None else cfg.seed,
        n_samples=args.n_samples,
        rho_mode=args.rho_mode,
    )
    print(
        f"evaluated {len(records)} disruption predictions over {args.folds} folds; wrote {args.out}"
    )
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    try:
        cases = oracles.run_suite(args.suite)
    except KeyError:
        print(
            f"unknown oracle suite {args.suite!r}; choose from "
            f"{sorted(oracles.SUITES) + ['all']}",
            file=sys.stderr,
        )
        return USAGE_ERROR
    all_ok = True
    for case in cases:
        status = "PASS" if case.passed else "FAIL"
        print(f"{status} {case.name} ({case.detail})")
        all_ok &= case.passed
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distreg",
        description="Distribution regression for networked systems under disruptions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with known ground truth")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("score", help="observable/severity scores and top-n selection")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output scores.csv path")
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--config", default=None, help="config file (defaults to <data>/config.txt)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("train", help="fit the mixture-of-embeddings model on all disruptions")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="output directory for model.json")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict one new disruption and sample from it")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--model", required=True, help="model.json from `train`")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--disruption", required=True, help="spec `day,t_start,t_end,roi1;roi2;...`"
    )
    p.add_argument("--n-samples", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="full k-fold scoring/training/prediction protocol")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="protocol seed (defaults to config seed)")
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--n-samples", type=int, default=400)
    p.add_argument("--rho-mode", choices=["per-fold", "global"], default="per-fold")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("oracle", help="run brute-force self-check suites")
    p.add_argument("--suite", required=True, help="gram | qp | bfs | all")
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SimplexQPError, SingularGramError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def entry() -> None:
    sys.exit(main())
