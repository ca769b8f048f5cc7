"""Command-line interface: ``hcnet <subcommand> ...``.

Exit codes: 0 success, 1 validation or file failure, 2 usage error.
"""

import argparse
import json
import sys

import numpy as np

from . import checks
from .cost import balanced_partition, cost_report, random_partition, verify_counts
from .errors import HcnetError
from .fmap import read_fmap, write_fmap
from .metrics import confusion, f1_oa, iou_per_class, s_iou
from .model import HcnetConfig, hcnet_forward, init_params, load_params, save_params
from .synth import synth_scene
from .tensor import make_rng
from .train import train_toy


class UsageError(Exception):
    pass


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    return text


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _nan_to_none(values):
    return [None if np.isnan(v) else float(v) for v in values]


def _load_config(path):
    return HcnetConfig.from_json(path) if path else HcnetConfig()


def cmd_forward(args):
    config = _load_config(args.config)
    params, _ = load_params(args.params)
    image = read_fmap(args.input)
    probs, q, t, _ = hcnet_forward(image, params, config)
    write_fmap(probs.astype(np.float32), args.out)
    if args.dump_q:
        write_fmap(q.astype(np.float32), args.dump_q)
    if args.dump_t:
        write_fmap(t, args.dump_t)
    print(f"wrote {args.out} {probs.shape}")
    return 0


def cmd_init_params(args):
    config = _load_config(args.config)
    params = init_params(config, make_rng(args.seed if args.seed is not None else config.seed))
    save_params(params, args.out_dir, config)
    print(f"wrote {len(params)} parameters to {args.out_dir}")
    return 0


def cmd_gradcheck(args):
    report = checks.run_check(args.op, seed=args.seed, eps=args.eps, tol=args.tol)
    print(f"gradcheck {args.op} seed={args.seed} eps={args.eps:g}")
    print(report.summary())
    return 0 if report.passed else 1


def _bench_sizes(args, hw):
    kind = args.partition[0]
    rest = args.partition[1:]
    if kind == "balanced" and not rest:
        return balanced_partition(hw, args.classes)
    if kind == "random" and not rest:
        return random_partition(hw, args.classes, make_rng(args.seed))
    if kind == "from-file" and len(rest) == 1:
        path = rest[0]
        if path.endswith(".json"):
            with open(path) as f:
                return [int(s) for s in json.load(f)]
        t = read_fmap(path)
        if t.shape != (args.height, args.width):
            raise HcnetError(f"{path}: partition map {t.shape} does not match {args.height}x{args.width}")
        return np.bincount(t.ravel().astype(np.int64), minlength=args.classes).tolist()
    raise UsageError("--partition takes 'balanced', 'random' or 'from-file PATH'")


def cmd_bench(args):
    hw = args.height * args.width
    sizes = _bench_sizes(args, hw)
    report = cost_report(args.height, args.width, args.channels, sizes, args.classes)
    print(report.table())
    out = {"height": args.height, "width": args.width, "channels": args.channels,
           "classes": args.classes, "region_sizes": sizes, "report": report.to_dict()}
    if args.verify:
        v = verify_counts(args.height, args.width, args.channels, sizes, make_rng(args.seed))
        out["verify"] = {"counted": v.counted, "analytic": v.analytic, "ok": v.ok}
        print(f"instrumented counts {'match' if v.ok else 'DIFFER: ' + str(v.diff())}")
        if not v.ok:
            _dump_json(out, args.json)
            return 1
    _dump_json(out, args.json)
    return 0


def cmd_train_toy(args):
    config = _load_config(args.config)
    overrides = {"seed": args.seed, "lam": args.lam}
    config = HcnetConfig.from_dict({**config.to_dict(), **{k: v for k, v in overrides.items() if v is not None}})
    scene = synth_scene(config.seed, args.size, args.size, config.num_classes, args.instances)
    report, params = train_toy(config, args.steps, args.lr, scene=scene)
    wall = report.pop("wall_time_s")
    if args.timing:
        report["timing"] = {"wall_time_s": wall}
    _dump_json(report, args.report)
    if args.save_params:
        save_params(params, args.save_params, config)
    print(f"steps={args.steps} final loss={report['losses']['total'][-1] if report['losses']['total'] else float('nan'):.6f} "
          f"pixel acc={report['final_pixel_accuracy']:.4f} preseg acc={report['final_preseg_accuracy']:.4f} "
          f"({wall:.1f}s)")
    if report["diverged_at"] is not None:
        print(report["error"], file=sys.stderr)
        return 1
    return 0


def cmd_eval(args):
    pred = read_fmap(args.pred)
    gt = read_fmap(args.gt)
    c = confusion(pred, gt, args.classes, args.ignore_label)
    iou, miou = iou_per_class(c)
    f1, oa = f1_oa(c)
    out = {
        "classes": args.classes,
        "iou": _nan_to_none(iou),
        "miou": None if np.isnan(miou) else miou,
        "f1": _nan_to_none(f1),
        "oa": None if np.isnan(oa) else oa,
        "confusion": c.matrix.tolist(),
    }
    print(f"mIoU {miou:.4f}  OA {oa:.4f}")
    if args.instances or args.inst_classes:
        if not (args.instances and args.inst_classes):
            raise UsageError("--instances and --inst-classes go together")
        with open(args.inst_classes) as f:
            table = json.load(f)
        rep = s_iou(pred, read_fmap(args.instances), table, args.connectivity, args.siou_match)
        out["s_iou"] = rep.to_dict()
        means = ", ".join("-" if m is None else f"{m:.4f}" for m in rep.bucket_means)
        print(f"mS-IoU {rep.ms_iou:.4f}  by area bucket [{means}]")
    _dump_json(out, args.report)
    return 0


def cmd_synth(args):
    scene = synth_scene(args.seed, args.height, args.width, args.classes, args.instances)
    scene.save(args.out_dir)
    print(f"wrote scene to {args.out_dir}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="hcnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("forward", help="run the network on an FMAP image")
    s.add_argument("--input", required=True)
    s.add_argument("--params", required=True, help="parameter bundle directory")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--dump-q")
    s.add_argument("--dump-t")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("init-params", help="write a freshly initialised parameter bundle")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_init_params)

    s = sub.add_parser("gradcheck", help="finite-difference check of an analytic backward")
    s.add_argument("--op", required=True, choices=checks.OPS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("bench", help="MAC / attention-memory cost model")
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--channels", type=int, required=True)
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--partition", nargs="+", default=["balanced"], metavar="KIND",
                   help="balanced | random | from-file PATH (.json size list or FMAP label map)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--verify", action="store_true", help="also count MACs by running the kernels")
    s.add_argument("--json")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("train-toy", help="train on a synthetic scene")
    s.add_argument("--steps", type=int, default=300)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--size", type=int, default=32)
    s.add_argument("--instances", type=int, default=4)
    s.add_argument("--config")
    s.add_argument("--report")
    s.add_argument("--save-params")
    s.add_argument("--timing", action="store_true", help="add wall time to the report")
    s.set_defaults(func=cmd_train_toy)

    s = sub.add_parser("eval", help="IoU / F1 / OA and optional S-IoU")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--instances")
    s.add_argument("--inst-classes")
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--ignore-label", type=int)
    s.add_argument("--connectivity", type=int, choices=(4, 8), default=4)
    s.add_argument("--siou-match", choices=("components", "classmap"), default="components")
    s.add_argument("--report")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic scene as FMAP files")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--instances", type=int, required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (HcnetError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
