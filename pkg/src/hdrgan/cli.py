"""Command-line front end.

Exit codes: 0 success, 1 runtime failure (message names the failing
stage on stderr), 2 usage error (argparse).  Every run is reproducible:
commands that involve randomness take a mandatory --seed.
"""

import argparse
import os
import sys
from dataclasses import replace

from . import datasets, hdrio, pixfid, rangecompress, trainloop
from .image import luminance
from .rangecompress import CompressionParams, SearchConfig


class _Stage:
    name = "startup"


def _stage(name):
    _Stage.name = name


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BrokenPipeError:
        return 1
    except (hdrio.ImageIOError, trainloop.CheckpointError,
            trainloop.TrainingDiverged, ValueError, OSError,
            RuntimeError) as exc:
        print(f"hdrgan {args.command}: error during {_Stage.name}: {exc}",
              file=sys.stderr)
        return 1


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hdrgan",
        description="Unpaired adversarial HDR tone mapping toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-hist",
                       help="average LDR luma histograms into a canonical "
                            "histogram file")
    p.add_argument("ldr_dir")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--limit", type=int, default=None,
                   help="use at most this many images")
    p.set_defaults(handler=_cmd_make_hist)

    p = sub.add_parser("estimate-lambda",
                       help="estimate the compression level of an HDR image")
    p.add_argument("image")
    p.add_argument("--hist", required=True,
                   help="canonical histogram file (see make-hist)")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(handler=_cmd_estimate_lambda)

    p = sub.add_parser("compress",
                       help="write the compressed luma of an HDR image as "
                            "a 16-bit PNG")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="fixed compression level (skips estimation)")
    p.add_argument("--hist", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=_cmd_compress)

    p = sub.add_parser("train", help="train the tone-mapping network")
    p.add_argument("--hdr-dir", required=True)
    p.add_argument("--ldr-dir", required=True)
    p.add_argument("--hist", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", default=None,
                   help="key=value config file; flags override it")
    p.add_argument("--size", type=int, default=256,
                   help="training crop size (images larger than this are "
                        "split into two crops)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--pretrain-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr-gen", type=float, default=None)
    p.add_argument("--lr-disc", type=float, default=None)
    p.add_argument("--w-struct", type=float, default=None)
    p.add_argument("--fixed-lambda", type=float, default=None)
    p.add_argument("--raw-luminance", action="store_true", default=None)
    p.add_argument("--no-sqrt-skips", action="store_true", default=None)
    p.add_argument("--single-discriminator", action="store_true",
                   default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("tonemap", help="tone-map an HDR image")
    p.add_argument("image")
    p.add_argument("output")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="override with a fixed compression level")
    p.add_argument("--saturation", type=float,
                   default=trainloop.DEFAULT_SATURATION)
    p.set_defaults(handler=_cmd_tonemap)

    p = sub.add_parser("pixfid",
                       help="distribution distance between two image "
                            "directories")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--extractor", choices=("stub", "inception"),
                   default="stub")
    p.add_argument("--weights", default=os.environ.get("HDRGAN_INCEPTION"),
                   help="weights file for the inception extractor "
                        "(or set HDRGAN_INCEPTION)")
    p.set_defaults(handler=_cmd_pixfid)

    p = sub.add_parser("synth", help="generate synthetic test scenes")
    p.add_argument("--kind", choices=("hdr", "ldr"), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("-o", "--output", default=None,
                   help="output file (count must be 1)")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--dynamic-range", type=float, default=1e5)
    p.set_defaults(handler=_cmd_synth)

    return parser


def _load_ldr_dir(root, limit=None):
    _stage("scanning LDR directory")
    manifest = datasets.scan_dataset(root, "ldr", split_seed=0)
    paths = [os.path.join(root, p) for p, _, _ in manifest.entries]
    if limit is not None:
        paths = paths[:limit]
    _stage("loading LDR images")
    return [hdrio.load_image(p, "ldr") for p in paths]


def _cmd_make_hist(args):
    images = _load_ldr_dir(args.ldr_dir, args.limit)
    _stage("building histogram")
    hist = rangecompress.build_canonical_histogram(images)
    _stage("writing histogram")
    rangecompress.write_histogram(args.output, hist)
    print(f"wrote {args.output} from {len(images)} images")
    return 0


def _estimate(args_image, hist_path, seed):
    _stage("loading input image")
    img = hdrio.load_image(args_image, "hdr")
    _stage("reading histogram")
    hist = rangecompress.read_histogram(hist_path)
    _stage("estimating compression level")
    return img, rangecompress.estimate_lambda(
        luminance(img), hist, SearchConfig(rng_seed=seed))


def _cmd_estimate_lambda(args):
    _, lam = _estimate(args.image, args.hist, args.seed)
    print(f"{lam:.6g}")
    return 0


def _cmd_compress(args):
    if args.lam is None and (args.hist is None or args.seed is None):
        print("hdrgan compress: either --lambda or both --hist and --seed "
              "are required", file=sys.stderr)
        return 2
    if args.lam is not None:
        _stage("loading input image")
        img = hdrio.load_image(args.image, "hdr")
        lam = args.lam
    else:
        img, lam = _estimate(args.image, args.hist, args.seed)
    _stage("compressing")
    y_c = rangecompress.compress(luminance(img), CompressionParams(lam))
    _stage("writing output")
    hdrio.save_luma_png16(args.output, y_c)
    print(f"lambda={lam:.6g} -> {args.output}")
    return 0


def _load_training_images(root, kind, size):
    _stage(f"scanning {kind.upper()} directory")
    manifest = datasets.scan_dataset(root, kind, split_seed=0)
    out = []
    _stage(f"loading {kind.upper()} images")
    for path in manifest.paths("train"):
        img = hdrio.load_image(path, kind)
        if img.height == size and img.width == size:
            out.append(img)
        else:
            out.extend(datasets.augment_crop_pair(img, target=size))
    return out


def _cmd_train(args):
    base = trainloop.TrainConfig()
    if args.config:
        _stage("reading config file")
        with open(args.config, "r", encoding="utf-8") as fh:
            base = trainloop.config_from_lines(fh.readlines())
    overrides = {}
    for flag, name in (("epochs", "epochs"),
                       ("pretrain_epochs", "pretrain_epochs"),
                       ("batch_size", "batch_size"),
                       ("lr_gen", "lr_gen"), ("lr_disc", "lr_disc"),
                       ("w_struct", "w_struct")):
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    abl = {}
    if args.fixed_lambda is not None:
        abl["fixed_lambda"] = args.fixed_lambda
    if args.raw_luminance:
        abl["raw_luminance"] = True
    if args.no_sqrt_skips:
        abl["sqrt_skips"] = False
    if args.single_discriminator:
        abl["single_discriminator"] = True
    cfg = replace(base, seed=args.seed,
                  ablations=replace(base.ablations, **abl), **overrides)

    hdr_set = _load_training_images(args.hdr_dir, "hdr", args.size)
    ldr_set = _load_training_images(args.ldr_dir, "ldr", args.size)
    _stage("reading histogram")
    hist = rangecompress.read_histogram(args.hist)

    def report(epoch, breakdown):
        if not args.quiet:
            print(f"epoch {epoch + 1}/{cfg.epochs}  "
                  f"d={breakdown.l_disc:.4f}  "
                  f"nat={breakdown.l_natural:.4f}  "
                  f"struct={breakdown.l_struct:.4f}")

    _stage("training")
    trainloop.train(hdr_set, ldr_set, cfg, hist=hist, out_dir=args.out,
                    on_epoch=report)
    print(f"wrote checkpoint to {os.path.join(args.out, 'final')}")
    return 0


def _cmd_tonemap(args):
    _stage("loading checkpoint")
    ck = trainloop.load_checkpoint(args.checkpoint)
    if args.lam is not None:
        cfg = replace(ck.config,
                      ablations=replace(ck.config.ablations,
                                        fixed_lambda=args.lam))
        ck = trainloop.Checkpoint(config=cfg, epoch=ck.epoch,
                                  arrays=ck.arrays)
    _stage("loading input image")
    img = hdrio.load_image(args.image, "hdr")
    _stage("tone mapping")
    out = trainloop.tonemap(img, ck, saturation=args.saturation)
    _stage("writing output")
    hdrio.save_image(args.output, out)
    print(f"wrote {args.output}")
    return 0


def _cmd_pixfid(args):
    if args.extractor == "stub":
        extractor = pixfid.StubFeatureExtractor()
    else:
        _stage("loading inception extractor")
        extractor = pixfid.InceptionFeatureExtractor(args.weights)
    set_a = _load_ldr_dir(args.dir_a)
    set_b = _load_ldr_dir(args.dir_b)
    _stage("scoring")
    score = pixfid.pixfid_score(set_a, set_b, extractor)
    print(f"{score:.6f}")
    return 0


def _cmd_synth(args):
    if args.output is not None and args.count != 1:
        print("hdrgan synth: -o writes a single file; use --out-dir with "
              "--count", file=sys.stderr)
        return 2
    if args.output is None and args.out_dir is None:
        print("hdrgan synth: one of -o or --out-dir is required",
              file=sys.stderr)
        return 2
    _stage("synthesizing")
    if args.output is not None:
        if args.kind == "hdr":
            img = datasets.synth_hdr(args.seed, args.width, args.height,
                                     args.dynamic_range)
        else:
            img = datasets.synth_ldr(args.seed, args.width, args.height)
        _stage("writing output")
        hdrio.save_image(args.output, img)
        print(f"wrote {args.output}")
    else:
        if args.width != args.height:
            print("hdrgan synth: --out-dir mode writes square images; "
                  "width and height must match", file=sys.stderr)
            return 2
        paths = datasets.synth_dataset(args.out_dir, args.kind, args.count,
                                       args.width, args.seed,
                                       args.dynamic_range)
        print(f"wrote {len(paths)} images to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
