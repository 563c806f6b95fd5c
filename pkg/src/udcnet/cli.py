"""Command-line entry point: ``udcnet <command> [options]``.

Errors are reported as one JSON line on stderr with a nonzero exit code.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as C


def _load(args) -> C.RunConfig:
    cfg = C.load_config(args.config) if args.config else (C.toy_profile() if args.profile == "toy" else C.RunConfig())
    if args.seed is not None:
        cfg.seed = args.seed
    return C.apply_overrides(cfg, args.override).validate()


def cmd_train(cfg, args):
    from . import engine

    train_items, val_items = engine.resolve_splits(cfg)
    out = Path(args.output or cfg.output_dir)
    _, state = engine.fit(cfg, train_items, val_items, out, resume=args.resume)
    print(json.dumps({"steps": state.step, "epochs": state.epoch, "best_val_mae": state.best_mae, "output_dir": str(out)}))


def _model(cfg, args):
    from .model import load_checkpoint

    model, _ = load_checkpoint(args.checkpoint, cfg.model)
    return model


def cmd_eval(cfg, args):
    from . import data as D
    from . import engine

    if not cfg.dataset_root:
        raise C.ConfigError("dataset_root is not set")
    split = args.split or cfg.test_split
    manifest = D.load_manifest(cfg.dataset_root, split)
    model = _model(cfg, args)
    reports = engine.evaluate_samples(model, manifest.pairs, cfg.model.image_size)
    agg = engine.write_report(reports, manifest.stems, args.output or cfg.output_dir, f"eval_{split}")
    print(json.dumps(agg.scalars()))


def cmd_infer(cfg, args):
    from . import engine

    n = engine.infer_dir(_model(cfg, args), args.images, args.output or cfg.output_dir, cfg.model.image_size)
    print(json.dumps({"images": n}))


def cmd_export_curves(cfg, args):
    from . import engine

    print(engine.export_curves(args.report, args.csv))


def cmd_count_params(cfg, args):
    from .model import count_params_flops

    params, macs = count_params_flops(cfg.model, args.image_size or cfg.model.image_size)
    print(json.dumps({"params": params, "params_M": round(params / 1e6, 2), "macs": macs, "gmacs": round(macs / 1e9, 2)}))


def cmd_reference(cfg, args):
    from . import engine

    label, names, rows = engine.reference_rows(args.dataset)
    print(f"# {label}")
    print("dataset\tbackbone\t" + "\t".join(names))
    for dataset, by_backbone in rows.items():
        for backbone, values in by_backbone.items():
            print(f"{dataset}\t{backbone}\t" + "\t".join(f"{v:.4f}" for v in values))


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "export-curves": cmd_export_curves,
    "count-params": cmd_count_params,
    "reference": cmd_reference,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise C.ConfigError(f"usage: {message}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON or YAML run config")
    common.add_argument("--profile", choices=["default", "toy"], default="default", help="base config when --config is absent")
    common.add_argument("--seed", type=int)
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="udcnet", description="UDCNet salient object detection")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("train", parents=[common])
    p.add_argument("--resume")
    p.add_argument("--output")
    p = sub.add_parser("eval", parents=[common])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split")
    p.add_argument("--output")
    p = sub.add_parser("infer", parents=[common])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--output")
    p = sub.add_parser("export-curves", parents=[common])
    p.add_argument("--report", required=True)
    p.add_argument("--csv", required=True)
    p = sub.add_parser("count-params", parents=[common])
    p.add_argument("--image-size", type=int)
    p = sub.add_parser("reference", parents=[common])
    p.add_argument("--dataset")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
        cfg = _load(args)
        if args.print_config:
            sys.stdout.write(C.dump_config(cfg))
            return 0
        COMMANDS[args.command](cfg, args)
        return 0
    except Exception as exc:  # every failure becomes one parsable line
        msg = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
        print(json.dumps({"error": type(exc).__name__, "message": " ".join(msg.split())}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
