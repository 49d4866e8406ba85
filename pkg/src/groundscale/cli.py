"""Command-line front end binding the library into runnable experiments.

Subcommands:
  ground-prior   write a camera's ground-plane depth prior as PFM
  tau            print the attention budget for a camera and pathway width
  augment        rotate an image / ground prior / sparse depth in place
  synth          render the synthetic scene (image, depth, ground mask)
  recover-scale  run the scale-recovery experiment, write the JSON report
  ablate         the same run with the prior terms off (scale stays put)
  metrics        compare two depth PFMs, emit the metric report as JSON
  gradcheck      finite-difference verification of the analytic gradients

Flags are long-form only. `--seed` is accepted everywhere and echoed into
every report; `--threads` only changes how rendering work is split, never
the resulting bytes. Exit codes: 0 success, 1 invalid inputs or usage,
2 numerical failure. All file outputs are atomic (temp file + rename).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .camgeo import CameraModel
from .depthmetrics import DEPTH_CAP, evaluate
from .gradcheck import run_all
from .gridio import (read_json, read_pfm, read_ppm, to_gray, write_json,
                     write_pfm, write_ppm)
from .groundprior import DEFAULT_MAX_DEPTH, compute_tau, ground_depth
from .losses import LossWeights
from .rotaug import augment_ground, augment_sparse_depth, rotate_image
from .scalelab import (OptimConfig, SceneSpec, ablate, recover_scale,
                       reference_scene, render)


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _scene_from_args(args) -> SceneSpec:
    """Scene from --scene JSON, else the built-in reference scene.

    An explicit --seed re-seeds the ground texture either way, so a single
    flag varies the experiment without editing scene files.
    """
    if args.scene is not None:
        spec = SceneSpec.load(args.scene)
        if args.seed is not None:
            spec = replace(spec, texture=replace(spec.texture, seed=args.seed))
        return spec
    return reference_scene(seed=_seed(args))


def _optim_config(args) -> OptimConfig:
    config = (OptimConfig.from_dict(read_json(args.config))
              if args.config else OptimConfig())
    if args.steps is not None:
        config = replace(config, steps=args.steps)
    if args.lr is not None:
        config = replace(config, lr=args.lr)
    return config


def _cmd_ground_prior(args) -> int:
    cam = CameraModel.load(args.camera)
    prior = ground_depth(cam, max_depth=args.max_depth)
    write_pfm(args.out, prior.normalized if args.normalized else prior.depth)
    print(f"wrote {args.out} ({cam.height} x {cam.width}, "
          f"{int(prior.valid.sum())} valid pixels)")
    return 0


def _cmd_tau(args) -> int:
    cam = CameraModel.load(args.camera)
    print(compute_tau(args.pathway_width, cam.height, cam.width, cam.h))
    return 0


def _cmd_augment(args) -> int:
    cam = CameraModel.load(args.camera)
    if (args.image is None) != (args.out_image is None):
        raise ValueError("--image and --out-image go together")
    if (args.sparse is None) != (args.out_sparse is None):
        raise ValueError("--sparse and --out-sparse go together")
    if args.image is None and args.out_ground is None and args.sparse is None:
        raise ValueError("nothing to do: pass --image/--out-image, "
                         "--out-ground, or --sparse/--out-sparse")
    if args.image is not None:
        img = to_gray(read_ppm(args.image))
        rotated = rotate_image(img, cam, args.pitch, args.roll, args.yaw,
                               force=args.force)
        write_ppm(args.out_image, rotated.masked(0.0))
        print(f"wrote {args.out_image}")
    if args.out_ground is not None:
        prior = augment_ground(cam, args.pitch, args.roll, args.yaw,
                               max_depth=args.max_depth, force=args.force)
        write_pfm(args.out_ground, prior.depth)
        print(f"wrote {args.out_ground}")
    if args.sparse is not None:
        grid = augment_sparse_depth(cam, read_pfm(args.sparse), args.pitch,
                                    args.roll, args.yaw, force=args.force)
        write_pfm(args.out_sparse, grid)
        print(f"wrote {args.out_sparse}")
    return 0


def _cmd_synth(args) -> int:
    spec = _scene_from_args(args)
    if (args.out_image is None and args.out_depth is None
            and args.out_mask is None and args.out_scene is None):
        raise ValueError("nothing to do: pass --out-image, --out-depth, "
                         "--out-mask, or --out-scene")
    if args.out_scene is not None:
        spec.save(args.out_scene)
        print(f"wrote {args.out_scene}")
    if args.out_image is not None or args.out_depth is not None \
            or args.out_mask is not None:
        view = spec.baseline if args.view == "source" else None
        result = render(spec, view, threads=args.threads)
        if args.out_image is not None:
            write_ppm(args.out_image, result.image)
            print(f"wrote {args.out_image}")
        if args.out_depth is not None:
            write_pfm(args.out_depth, result.depth)
            print(f"wrote {args.out_depth}")
        if args.out_mask is not None:
            write_pfm(args.out_mask, result.ground_mask.astype(float))
            print(f"wrote {args.out_mask}")
    return 0


def _cmd_recover_scale(args) -> int:
    spec = _scene_from_args(args)
    weights = LossWeights(smooth=args.smooth, const=args.const, reg=args.reg)
    result = recover_scale(spec, k0=args.k0, tau=args.tau, weights=weights,
                           config=_optim_config(args), threads=args.threads)
    write_json(args.out, result.to_dict())
    if args.out_depth is not None:
        write_pfm(args.out_depth, result.fused.values)
    if args.out_attention is not None:
        write_pfm(args.out_attention, result.attention.values)
    print(f"pose_scale {result.pose_scale:.6f} from k0 {result.k0:g}, "
          f"abs_rel {result.metrics.abs_rel:.6f}, "
          f"mean attention {result.mean_attention:.4f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_ablate(args) -> int:
    spec = _scene_from_args(args)
    result = ablate(spec, k0=args.k0, tau=args.tau,
                    config=_optim_config(args), smooth=args.smooth,
                    threads=args.threads)
    write_json(args.out, result.to_dict())
    print(f"pose_scale {result.pose_scale:.6f} from k0 {result.k0:g} "
          f"(prior terms off: scale should stay near k0)")
    print(f"wrote {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    report = evaluate(read_pfm(args.pred), read_pfm(args.gt), cap=args.cap)
    obj = {"seed": _seed(args), "cap": args.cap, **report.to_dict()}
    if args.out is not None:
        write_json(args.out, obj)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(obj, indent=2))
    return 0


def _cmd_gradcheck(args) -> int:
    suites = run_all(seed=_seed(args), instances=args.instances)
    for s in suites:
        status = "ok" if s.passed else "FAIL"
        print(f"{s.name:8s} max_rel_err {s.max_rel_err:.3e} (tol {s.tol:g}) "
              f"checked {s.checked} excluded {s.excluded} [{status}]")
    if args.out is not None:
        write_json(args.out, {"seed": _seed(args),
                              "suites": [s.to_dict() for s in suites]})
        print(f"wrote {args.out}")
    return 0 if all(s.passed for s in suites) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="groundscale", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, func, help_text, scene=False, threads=False):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None,
                       help="random seed, echoed into reports (default 0)")
        if scene:
            p.add_argument("--scene", default=None,
                           help="scene JSON (default: built-in reference scene)")
        if threads:
            p.add_argument("--threads", type=int, default=1,
                           help="render worker threads; results do not depend on it")
        return p

    p = add("ground-prior", _cmd_ground_prior,
            "write a camera's ground-plane depth prior as PFM")
    p.add_argument("--camera", required=True, help="camera JSON")
    p.add_argument("--out", required=True, help="output PFM path")
    p.add_argument("--max-depth", type=float, default=DEFAULT_MAX_DEPTH)
    p.add_argument("--normalized", action="store_true",
                   help="write depth/max_depth clamped to [0, 1] instead of meters")

    p = add("tau", _cmd_tau,
            "print the attention budget for a camera and pathway width")
    p.add_argument("--pathway-width", type=float, required=True,
                   help="navigable pathway width in meters")
    p.add_argument("--camera", required=True, help="camera JSON")

    p = add("augment", _cmd_augment,
            "rotate an image / ground prior / sparse depth in place")
    p.add_argument("--camera", required=True, help="camera JSON")
    p.add_argument("--pitch", type=float, default=0.0, help="degrees")
    p.add_argument("--roll", type=float, default=0.0, help="degrees")
    p.add_argument("--yaw", type=float, default=0.0, help="degrees")
    p.add_argument("--force", action="store_true",
                   help="allow angles beyond the standard limits")
    p.add_argument("--image", default=None,
                   help="input PPM (color is averaged to gray)")
    p.add_argument("--out-image", default=None, help="rotated image PPM")
    p.add_argument("--out-ground", default=None,
                   help="ground prior of the rotated camera, PFM")
    p.add_argument("--sparse", default=None, help="input sparse depth PFM")
    p.add_argument("--out-sparse", default=None, help="reprojected depth PFM")
    p.add_argument("--max-depth", type=float, default=DEFAULT_MAX_DEPTH)

    p = add("synth", _cmd_synth,
            "render the synthetic scene", scene=True, threads=True)
    p.add_argument("--view", choices=["target", "source"], default="target",
                   help="render the reference view or the baseline view")
    p.add_argument("--out-image", default=None, help="rendered image PPM")
    p.add_argument("--out-depth", default=None, help="true depth PFM")
    p.add_argument("--out-mask", default=None,
                   help="flat-ground mask PFM (1 ground, 0 other)")
    p.add_argument("--out-scene", default=None,
                   help="write the scene JSON actually used")

    def add_optim(p):
        p.add_argument("--k0", type=float, default=2.0,
                       help="initial scale error to recover from")
        p.add_argument("--tau", type=float, default=None,
                       help="attention budget (default: from the scene camera)")
        p.add_argument("--config", default=None, help="optimizer settings JSON")
        p.add_argument("--steps", type=int, default=None,
                       help="override optimizer step budget")
        p.add_argument("--lr", type=float, default=None,
                       help="override optimizer step length")
        p.add_argument("--out", required=True, help="report JSON path")

    p = add("recover-scale", _cmd_recover_scale,
            "run the scale-recovery experiment", scene=True, threads=True)
    add_optim(p)
    defaults = LossWeights()
    p.add_argument("--smooth", type=float, default=defaults.smooth)
    p.add_argument("--const", type=float, default=defaults.const)
    p.add_argument("--reg", type=float, default=defaults.reg)
    p.add_argument("--out-depth", default=None, help="fused depth PFM")
    p.add_argument("--out-attention", default=None, help="attention PFM")

    p = add("ablate", _cmd_ablate,
            "scale recovery with the prior terms off", scene=True, threads=True)
    add_optim(p)
    p.add_argument("--smooth", type=float, default=defaults.smooth)

    p = add("metrics", _cmd_metrics, "compare two depth PFMs")
    p.add_argument("--pred", required=True, help="predicted depth PFM")
    p.add_argument("--gt", required=True, help="ground-truth depth PFM")
    p.add_argument("--cap", type=float, default=DEPTH_CAP,
                   help="ignore ground truth beyond this depth")
    p.add_argument("--out", default=None,
                   help="report JSON path (default: print to stdout)")

    p = add("gradcheck", _cmd_gradcheck,
            "verify analytic gradients against finite differences")
    p.add_argument("--instances", type=int, default=20,
                   help="random instances per suite")
    p.add_argument("--out", default=None, help="suite report JSON path")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"groundscale: error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"groundscale: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
