"""Command-line entry point.

Exit codes: 0 success, 1 usage/configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import NumericError, RfpqeError, UsageError
from .metrics import bd_br, read_rd_csv
from .net.qenet import MaskNet, NetworkConfig, QENet
from .net.weights import atomic_write_bytes, load_weights, save_weights
from .rfp import TrackMode, propose_references

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _model_from_weights(path: str) -> QENet:
    store = load_weights(path)
    model = QENet(NetworkConfig.from_weights(store))
    model.load_state_dict(store)
    return model


def cmd_degrade(args) -> None:
    from .pipeline.config import DegradeConfig, load_config
    from .pipeline.data import discover_sequences, load_sequence, write_sequence
    from .pipeline.degrade import synth_degrade

    cfg = load_config(args.config, DegradeConfig) if args.config else DegradeConfig()
    seqs = discover_sequences(args.input)
    single = (Path(args.input) / "manifest.json").is_file()
    for name, path in seqs.items():
        out = Path(args.out) if single else Path(args.out) / name
        write_sequence(synth_degrade(load_sequence(path), cfg), out)
        print(f"{name}: {out}")


def cmd_synth(args) -> None:
    from .pipeline.config import DegradeConfig, load_config
    from .pipeline.degrade import build_synthetic_dataset

    cfg = load_config(args.config, DegradeConfig) if args.config else DegradeConfig()
    pairs = build_synthetic_dataset(args.out, args.sequences, args.frames, args.size, cfg, seed=args.seed)
    print(f"wrote {len(pairs)} sequence pairs under {args.out}")


def cmd_propose_refs(args) -> None:
    from .pipeline.data import load_sequence

    seq = load_sequence(args.manifest)
    refs = propose_references(seq.metadata, args.target, args.radius, TrackMode(args.track))
    print(json.dumps(refs.to_dict()))


def cmd_train(args) -> None:
    from .pipeline.config import TrainConfig, load_config
    from .pipeline.train import train

    cfg = load_config(args.config, TrainConfig)
    result = train(cfg)
    save_weights(result.weights, args.out)
    log_path = Path(str(args.out) + ".log.json")
    log_doc = {"config": cfg.to_dict(), "config_sha256": cfg.digest(), "log": result.log_records()}
    atomic_write_bytes(log_path, json.dumps(log_doc).encode("utf-8"))
    print(f"weights: {args.out}\nlog: {log_path}\nfinal loss: {result.losses[-1]:.6f}")


def cmd_enhance(args) -> None:
    from .pipeline.data import load_sequence, write_sequence
    from .pipeline.enhance import enhance
    from .pipeline.evaluate import PROVENANCE

    if (args.fuse_with is None) != (args.mask is None):
        raise UsageError("--fuse-with and --mask must be given together")
    model = _model_from_weights(args.weights)
    second = mask = None
    if args.fuse_with:
        second = _model_from_weights(args.fuse_with)
        mask = MaskNet.from_weights(load_weights(args.mask))
    seq = load_sequence(args.manifest)
    out = enhance(model, seq, track=args.track, rfp=not args.no_rfp, use_self_ensemble=args.self_ensemble,
                  fuse_with=second, mask=mask)
    write_sequence(out, args.out)
    provenance = {"weights_sha256": load_weights(args.weights).sha256(), "self_ensemble": args.self_ensemble,
                  "rfp": not args.no_rfp, "track": args.track}
    if second is not None:
        provenance["fuse_with_sha256"] = load_weights(args.fuse_with).sha256()
    atomic_write_bytes(Path(args.out) / PROVENANCE, json.dumps(provenance, indent=1).encode("utf-8"))
    print(f"enhanced {len(out)} frames -> {args.out}")


def cmd_train_mask(args) -> None:
    from .pipeline.data import load_dataset
    from .pipeline.train import train_mask_net

    net, losses = train_mask_net(
        _model_from_weights(args.model1), _model_from_weights(args.model2), load_dataset(args.dataset),
        iterations=args.iterations, base_lr=args.lr, patch_size=args.patch_size, seed=args.seed,
    )
    save_weights(net.state_dict(), args.out)
    print(f"mask weights: {args.out} (final loss {losses[-1]:.6f})")


def cmd_evaluate(args) -> None:
    from .pipeline.evaluate import evaluate_dirs, write_report

    report = evaluate_dirs(args.compressed, args.enhanced, args.truth)
    write_report(report, args.report)
    agg = report.aggregate
    print(f"dPSNR {agg['delta_psnr']:+.4f} dB  dSSIM {agg['delta_ssim']:+.6f}  PVD {agg['pvd']:.4f}  SD {agg['sd']:.4f}")


def cmd_bdbr(args) -> None:
    anchor = read_rd_csv(Path(args.anchor).read_text(encoding="utf-8"))
    test = read_rd_csv(Path(args.test).read_text(encoding="utf-8"))
    value = bd_br(anchor, test)
    print(json.dumps({"bd_br_percent": value, "bd_br_reduction_percent": -value}))


def cmd_plot(args) -> None:
    from .pipeline.evaluate import plot_curves, read_report

    for p in plot_curves(read_report(args.report), args.out):
        print(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfpqe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("degrade", help="synthesize compressed sequences from clean ones")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("synth", help="generate a synthetic training dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--sequences", type=int, default=2)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=48)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("propose-refs", help="print the reference set for one target frame")
    p.add_argument("--manifest", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--track", choices=[m.value for m in TrackMode], default=TrackMode.FIXED_QP.value)
    p.set_defaults(func=cmd_propose_refs)

    p = sub.add_parser("train", help="train STFF+IQE")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-mask", help="train the gated-fusion mask for two frozen models")
    p.add_argument("--model1", required=True)
    p.add_argument("--model2", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--patch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_mask)

    p = sub.add_parser("enhance", help="enhance a compressed sequence")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--self-ensemble", action="store_true")
    p.add_argument("--fuse-with")
    p.add_argument("--mask")
    p.add_argument("--track", choices=[m.value for m in TrackMode], default=TrackMode.FIXED_QP.value)
    p.add_argument("--no-rfp", action="store_true", help="use plain adjacent frames as references")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="dPSNR/dSSIM/PVD/SD report")
    p.add_argument("--compressed", required=True)
    p.add_argument("--enhanced", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bdbr", help="Bjontegaard delta bitrate between two RD curves")
    p.add_argument("--anchor", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_bdbr)

    p = sub.add_parser("plot", help="per-sequence PSNR curves from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RfpqeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
