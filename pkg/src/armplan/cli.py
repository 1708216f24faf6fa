"""Command-line pipeline driver.

Subcommands: sample (score dataset CSV), train-fastron (proxy collision
models), fit-svr (five score maps), optimize (best setup search), evaluate
(trajectory metrics), bench (proxy vs geometric timing), heatmap (per-arm
combined score grid). Exit codes: 0 success, 1 usage error, 2 data/model
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, artifacts, fastron, optimizer, scoring, svr, trajectory, world
from .kinematics import JointConfig
from .scoring import DataError
from .world import BasePose, ConfigError, SetupPose

FASTRON_MODEL_NAMES = ("env1", "env2", "self")
SVR_MODEL_NAMES = svr.SCORE_NAMES


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="world layout JSON; defaults apply when omitted")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> _Parser:
    p = _Parser(prog="armplan", description="Base-pose planning for two RCM-constrained arms")
    p.add_argument("--version", action="version", version=f"armplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="generate a scored setup dataset CSV")
    _add_common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--setups", type=int, default=700)
    sp.add_argument("--samples", type=int, default=scoring.DEFAULT_JOINT_SAMPLES)
    sp.add_argument("--checker", choices=("geometric", "fastron"), default="geometric")
    sp.add_argument("--models-dir", help="fastron model directory (fastron checker only)")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sample)

    tp = sub.add_parser("train-fastron", help="train proxy collision classifiers")
    _add_common(tp)
    tp.add_argument("--out-dir", required=True)
    tp.add_argument("--env-samples", type=int, default=50_000)
    tp.add_argument("--self-samples", type=int, default=100_000)
    tp.add_argument("--gamma-env", type=float, default=10.0)
    tp.add_argument("--gamma-self", type=float, default=2.0)
    tp.add_argument("--beta", type=float, default=1.5)
    tp.add_argument("--max-updates-env", type=int, default=5000)
    tp.add_argument("--max-updates-self", type=int, default=20_000)
    tp.add_argument("--max-supports", type=int, default=3000)
    tp.add_argument("--holdout", type=float, default=0.2)
    tp.set_defaults(func=cmd_train_fastron)

    fp = sub.add_parser("fit-svr", help="fit the five SVR score maps from a dataset")
    _add_common(fp)
    fp.add_argument("--dataset", required=True)
    fp.add_argument("--out-dir", required=True)
    fp.add_argument("--C", type=float, default=10.0)
    fp.add_argument("--epsilon", type=float, default=0.01)
    fp.add_argument("--gamma-reach", type=float, default=5.0)
    fp.add_argument("--gamma-env", type=float, default=5.0)
    fp.add_argument("--gamma-self", type=float, default=5.0)
    fp.add_argument("--kkt-tol", type=float, default=1e-3)
    fp.add_argument("--max-passes", type=int, default=10_000)
    fp.add_argument("--holdout", type=float, default=0.2)
    fp.set_defaults(func=cmd_fit_svr)

    op = sub.add_parser("optimize", help="multi-start search for the best setup")
    _add_common(op)
    op.add_argument("--models-dir", required=True, help="directory with the five SVR model files")
    op.add_argument("--out", required=True)
    op.add_argument("--w-reach", type=float, default=1.0)
    op.add_argument("--w-self", type=float, default=1.0)
    op.add_argument("--w-env", type=float, default=1.0)
    op.add_argument("--starts", type=int, default=100)
    op.set_defaults(func=cmd_optimize)

    ep = sub.add_parser("evaluate", help="trajectory metrics for a fixed setup")
    _add_common(ep)
    ep.add_argument("--setup", help="x1,y1,th1,x2,y2,th2")
    ep.add_argument("--solution", help="solution JSON produced by optimize")
    ep.add_argument("--out")
    ep.set_defaults(func=cmd_evaluate)

    bp = sub.add_parser("bench", help="per-check timing, geometric vs proxy")
    _add_common(bp)
    bp.add_argument("--models-dir", required=True, help="fastron model directory")
    bp.add_argument("--queries", type=int, default=10_000)
    bp.add_argument("--out")
    bp.set_defaults(func=cmd_bench)

    hp = sub.add_parser("heatmap", help="combined predicted score grid for one arm")
    _add_common(hp)
    hp.add_argument("--models-dir", required=True, help="directory with the five SVR model files")
    hp.add_argument("--arm", type=int, choices=(1, 2), required=True)
    hp.add_argument("--res", type=int, default=50)
    hp.add_argument("--theta-samples", type=int, default=21)
    hp.add_argument("--out", required=True)
    hp.set_defaults(func=cmd_heatmap)

    return p


def _layout(args) -> world.WorldLayout:
    if args.config:
        return world.load_config(args.config)
    return world.default_layout()


def _meta(args, layout, **params) -> dict:
    return artifacts.run_metadata(
        command=args.command,
        seed=getattr(args, "seed", None),
        config_digest=world.layout_digest(layout),
        params=params,
    )


def _require_file(path: str, kind: str) -> str:
    if not os.path.isfile(path):
        raise DataError(f"missing {kind} file: {path}")
    return path


def load_proxy_models(models_dir: str) -> fastron.ProxyModels:
    models = {}
    for name in FASTRON_MODEL_NAMES:
        path = _require_file(os.path.join(models_dir, f"{name}.json"), "fastron model")
        models[name] = fastron.load_model(path)
    return fastron.ProxyModels(env1=models["env1"], env2=models["env2"], self_model=models["self"])


def load_svr_models(models_dir: str) -> dict[str, svr.SvrModel]:
    out = {}
    for name in SVR_MODEL_NAMES:
        path = _require_file(os.path.join(models_dir, f"{name}.json"), "svr model")
        out[name] = svr.load_model(path)
    return out


def cmd_sample(args) -> int:
    layout = _layout(args)
    proxy = None
    if args.checker == "fastron":
        if not args.models_dir:
            raise UsageError("--models-dir is required with --checker fastron")
        proxy = load_proxy_models(args.models_dir)
    dataset = scoring.generate_dataset(
        layout,
        n_setups=args.setups,
        checker=args.checker,
        seed=args.seed,
        n_samples=args.samples,
        proxy=proxy,
        workers=args.workers,
    )
    scoring.write_dataset_csv(dataset, args.out)
    artifacts.write_manifest(
        args.out,
        _meta(args, layout, setups=args.setups, samples=args.samples,
              checker=args.checker, workers=args.workers),
    )
    print(f"wrote dataset: {args.out} ({args.setups} rows, checker={args.checker})")
    return 0


def _split_train_holdout(feats, labels, holdout: float):
    n = feats.shape[0]
    n_test = int(round(holdout * n))
    if n_test < 1 or n_test >= n:
        raise UsageError("--holdout must leave both a train and a test split")
    return (feats[:-n_test], labels[:-n_test]), (feats[-n_test:], labels[-n_test:])


def cmd_train_fastron(args) -> int:
    layout = _layout(args)
    report: dict[str, dict] = {}
    specs = [
        ("env1", scoring.generate_env_training(layout, 1, args.env_samples, args.seed),
         fastron.TrainParams(args.gamma_env, args.beta, args.max_updates_env, args.max_supports)),
        ("env2", scoring.generate_env_training(layout, 2, args.env_samples, args.seed + 1),
         fastron.TrainParams(args.gamma_env, args.beta, args.max_updates_env, args.max_supports)),
        ("self", scoring.generate_self_training(layout, args.self_samples, args.seed + 2),
         fastron.TrainParams(args.gamma_self, args.beta, args.max_updates_self, args.max_supports)),
    ]
    os.makedirs(args.out_dir, exist_ok=True)
    for name, (feats, labels), params in specs:
        (tr_x, tr_y), (te_x, te_y) = _split_train_holdout(feats, labels, args.holdout)
        model = fastron.train(fastron.LabeledConfigSet(tr_x, tr_y), params)
        ev = fastron.evaluate(model, fastron.LabeledConfigSet(te_x, te_y))
        path = os.path.join(args.out_dir, f"{name}.json")
        fastron.save_model(model, path)
        meta = _meta(args, layout, model=name, gamma=params.gamma, beta=params.beta,
                     max_updates=params.max_updates, max_supports=params.max_supports)
        artifacts.write_manifest(path, meta)
        report[name] = {
            "supports": model.n_supports,
            "accuracy": ev.accuracy,
            "tpr": ev.tpr,
            "tnr": ev.tnr,
            "mean_query_time_s": ev.mean_query_time,
        }
        print(f"{name}: supports={model.n_supports} accuracy={ev.accuracy:.4f} "
              f"tpr={ev.tpr:.4f} tnr={ev.tnr:.4f}")
    artifacts.write_json_artifact(
        os.path.join(args.out_dir, "fastron_report.json"),
        {"models": report},
        _meta(args, layout, holdout=args.holdout),
    )
    return 0


def cmd_fit_svr(args) -> int:
    layout = _layout(args)
    rows = scoring.read_dataset_rows(_require_file(args.dataset, "dataset"))
    gammas = {
        "reach1": args.gamma_reach, "reach2": args.gamma_reach,
        "env1": args.gamma_env, "env2": args.gamma_env,
        "self": args.gamma_self,
    }
    params = {
        name: svr.SvrParams(C=args.C, epsilon=args.epsilon, gamma=g,
                            kkt_tol=args.kkt_tol, max_passes=args.max_passes)
        for name, g in gammas.items()
    }
    models, rmse = svr.fit_score_maps(
        rows, layout, params, holdout_fraction=args.holdout, holdout_seed=args.seed,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    for name, model in models.items():
        path = os.path.join(args.out_dir, f"{name}.json")
        svr.save_model(model, path)
        artifacts.write_manifest(path, _meta(args, layout, model=name, gamma=gammas[name],
                                             C=args.C, epsilon=args.epsilon))
    artifacts.write_json_artifact(
        os.path.join(args.out_dir, "svr_report.json"),
        {"holdout_rmse": rmse, "supports": {n: m.n_supports for n, m in models.items()}},
        _meta(args, layout, holdout=args.holdout),
    )
    for name in SVR_MODEL_NAMES:
        msg = f"{name}: supports={models[name].n_supports}"
        if rmse:
            msg += f" holdout_rmse={rmse[name]:.4f}"
        print(msg)
    return 0


def cmd_optimize(args) -> int:
    layout = _layout(args)
    models = load_svr_models(args.models_dir)
    spec = optimizer.ObjectiveSpec(
        w_reach=args.w_reach, w_self=args.w_self, w_env=args.w_env, models=models,
    )
    sol = optimizer.multi_start_optimize(spec, layout, n_starts=args.starts, seed=args.seed)
    payload = {
        "setup": {
            "arm1": {"x": sol.setup.arm1.x, "y": sol.setup.arm1.y, "theta": sol.setup.arm1.theta},
            "arm2": {"x": sol.setup.arm2.x, "y": sol.setup.arm2.y, "theta": sol.setup.arm2.theta},
        },
        "u": list(sol.u),
        "f": sol.f,
        "scores": sol.per_score,
        "weights": {"reach": args.w_reach, "self": args.w_self, "env": args.w_env},
        "seed": args.seed,
        "starts": sol.starts_used,
        "best_start": sol.best_start,
    }
    artifacts.write_json_artifact(
        args.out, payload,
        _meta(args, layout, starts=args.starts, w_reach=args.w_reach,
              w_self=args.w_self, w_env=args.w_env),
    )
    print(f"best setup f={sol.f:.4f} (start {sol.best_start}/{sol.starts_used})")
    for name, val in sol.per_score.items():
        print(f"  {name}: {val:.4f}")
    return 0


def _parse_setup_arg(text: str) -> SetupPose:
    parts = text.split(",")
    if len(parts) != 6:
        raise UsageError("--setup expects 6 comma-separated numbers: x1,y1,th1,x2,y2,th2")
    try:
        v = [float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"--setup has a non-numeric field: {text}") from exc
    return SetupPose(arm1=BasePose(v[0], v[1], v[2]), arm2=BasePose(v[3], v[4], v[5]))


def _setup_from_solution(path: str) -> SetupPose:
    with open(_require_file(path, "solution"), "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid solution JSON: {exc.msg}") from exc
    try:
        a, b = doc["setup"]["arm1"], doc["setup"]["arm2"]
        return SetupPose(
            arm1=BasePose(float(a["x"]), float(a["y"]), float(a["theta"])),
            arm2=BasePose(float(b["x"]), float(b["y"]), float(b["theta"])),
        )
    except KeyError as exc:
        raise DataError(f"{path}: solution file missing key {exc}") from exc


def cmd_evaluate(args) -> int:
    layout = _layout(args)
    if bool(args.setup) == bool(args.solution):
        raise UsageError("provide exactly one of --setup or --solution")
    setup = _parse_setup_arg(args.setup) if args.setup else _setup_from_solution(args.solution)
    report = trajectory.evaluate_setup(setup, layout)
    print(trajectory.report_table(report))
    if args.out:
        payload = {
            "setup": {
                "arm1": {"x": setup.arm1.x, "y": setup.arm1.y, "theta": setup.arm1.theta},
                "arm2": {"x": setup.arm2.x, "y": setup.arm2.y, "theta": setup.arm2.theta},
            },
            "reachability": {"mean": report.reach_mean, "std": report.reach_std},
            "self_collision_free": {"mean": report.self_mean, "std": report.self_std},
            "environment_collision_free": {"mean": report.env_mean, "std": report.env_std},
            "combined": report.combined,
            "per_trajectory": [list(row) for row in report.per_trajectory],
        }
        artifacts.write_json_artifact(args.out, payload, _meta(args, layout))
    return 0


def cmd_bench(args) -> int:
    layout = _layout(args)
    proxy = load_proxy_models(args.models_dir)
    rng = np.random.default_rng(args.seed)
    n = args.queries
    block = scoring.DEFAULT_JOINT_SAMPLES

    geo_elapsed = 0.0
    proxy_elapsed = 0.0
    done = 0
    while done < n:
        m = min(block, n - done)
        setup = scoring.draw_setup(rng, layout)
        q1s = scoring.draw_joint_samples(rng, layout, m)
        q2s = scoring.draw_joint_samples(rng, layout, m)

        checker = scoring.SetupChecker(setup, layout)
        t0 = time.perf_counter()
        for i in range(m):
            checker.check(JointConfig(*q1s[i]), JointConfig(*q2s[i]))
        geo_elapsed += time.perf_counter() - t0

        f1 = scoring.env_feature_array(setup.arm1, layout, 1, q1s)
        f2 = scoring.env_feature_array(setup.arm2, layout, 2, q2s)
        fs = scoring.self_feature_array(setup, layout, q1s, q2s)
        t0 = time.perf_counter()
        fastron.predict_batch(proxy.env1, f1)
        fastron.predict_batch(proxy.env2, f2)
        fastron.predict_batch(proxy.self_model, fs)
        proxy_elapsed += time.perf_counter() - t0
        done += m

    geo_us = geo_elapsed / n * 1e6
    proxy_us = proxy_elapsed / n * 1e6
    ratio = proxy_elapsed / geo_elapsed if geo_elapsed > 0 else float("inf")
    print(f"{'method':<12s}{'us/check':>12s}")
    print(f"{'geometric':<12s}{geo_us:>12.2f}")
    print(f"{'fastron':<12s}{proxy_us:>12.2f}")
    print(f"proxy/geometric time ratio: {ratio:.3f}")
    if args.out:
        artifacts.write_json_artifact(
            args.out,
            {"queries": n, "geometric_us_per_check": geo_us,
             "proxy_us_per_check": proxy_us, "ratio": ratio},
            _meta(args, layout, queries=n),
        )
    return 0


def heatmap_grid(layout, models, arm: int, res: int, theta_samples: int):
    """Combined clipped score per (x, y), maximized over the heading offset.

    The self term holds the other arm at its grid center, heading offset 0.
    """
    g = layout.grid(arm)
    xs = np.linspace(*g.x_range, res)
    ys = np.linspace(*g.y_range, res)
    thetas = np.linspace(-layout.theta_limit, layout.theta_limit, theta_samples)

    gx, gy, gt = np.meshgrid(xs, ys, thetas, indexing="ij")
    u = np.empty((gx.size, 3))
    u[:, 0] = (gx.ravel() - g.center_x) / g.half_extent
    u[:, 1] = (gy.ravel() - g.center_y) / g.half_extent
    u[:, 2] = gt.ravel() / layout.theta_limit

    reach = np.clip(svr.predict_batch(models[f"reach{arm}"], u), 0.0, 1.0)
    env = np.clip(svr.predict_batch(models[f"env{arm}"], u), 0.0, 1.0)
    u6 = np.zeros((u.shape[0], 6))
    if arm == 1:
        u6[:, 0:3] = u
    else:
        u6[:, 3:6] = u
    selfs = np.clip(svr.predict_batch(models["self"], u6), 0.0, 1.0)

    combined = (reach + env + selfs).reshape(res, res, theta_samples).max(axis=2)
    return xs, ys, combined


def cmd_heatmap(args) -> int:
    layout = _layout(args)
    models = load_svr_models(args.models_dir)
    xs, ys, combined = heatmap_grid(layout, models, args.arm, args.res, args.theta_samples)
    lines = ["x,y,score"]
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            lines.append(f"{x:.9g},{y:.9g},{combined[i, j]:.9g}")
    artifacts.atomic_write_text(args.out, "\n".join(lines) + "\n")
    artifacts.write_manifest(
        args.out, _meta(args, layout, arm=args.arm, res=args.res, theta_samples=args.theta_samples),
    )
    print(f"wrote heatmap: {args.out} ({args.res}x{args.res}, arm {args.arm})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
