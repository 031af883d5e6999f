"""Command-line interface: estimate, synth, blur, eval."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .blur import BlurSearch, build_patch_grid, candidate_radii
from .dataio import load_manifest, load_views, write_dataset
from .errors import DpScaleError
from .metrics import ScaleReport
from .pipeline import RunConfig, run_estimate
from .synth import render_dataset, standard_scene


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    defaults = RunConfig()
    for field in dataclasses.fields(RunConfig):
        flag = "--" + field.name.replace("_", "-")
        parser.add_argument(
            flag,
            dest=field.name,
            type=type(getattr(defaults, field.name)),
            default=None,
            help=f"override RunConfig.{field.name} (default {getattr(defaults, field.name)})",
        )


def _config_from_args(args, overrides: dict) -> RunConfig:
    kwargs = dict(overrides)
    for field in dataclasses.fields(RunConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            kwargs[field.name] = value
    return RunConfig(**kwargs)


def _dump_json(data, path) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_estimate(args) -> int:
    manifest = load_manifest(args.manifest)
    config = _config_from_args(args, manifest.config_overrides)
    views = load_views(manifest, gamma=config.gamma)
    report = run_estimate(views, config, ground_truth_scale=manifest.ground_truth_scale)
    _dump_json(report, args.out)
    print(f"s_initial = {report['s_initial']:.6g}  s_optim = {report['s_optim']:.6g}")
    if "scale_ratio_optim" in report:
        print(f"scale ratio (optim) = {report['scale_ratio_optim']:.4f}")
    return 0


def cmd_synth(args) -> int:
    spec = standard_scene(
        seed=args.seed,
        n_views=args.views,
        n_planes=args.planes,
        height=args.height,
        width=args.width,
        noise_sigma=args.noise_sigma,
        gain_jitter=args.gain_jitter,
        scale=args.scale,
    )
    dataset = render_dataset(spec)
    manifest_path = write_dataset(dataset, args.out)
    print(f"wrote {len(dataset.views)} views, scale {dataset.truth.scale:.6g}")
    print(f"manifest: {manifest_path}")
    return 0


def cmd_blur(args) -> int:
    manifest = load_manifest(args.manifest)
    config = _config_from_args(args, manifest.config_overrides)
    views = [v for v in load_views(manifest, gamma=config.gamma) if v.view_id == args.view]
    if not views:
        raise DpScaleError(f"view {args.view} is not in the manifest")
    view = views[0]
    grid = build_patch_grid(
        view,
        config.patch_size,
        config.stride,
        texture_percentile=config.texture_percentile,
        min_finite_frac=config.min_finite_frac,
        max_inv_depth_rel_std=config.max_inv_depth_rel_std,
    )
    radii = candidate_radii(config.effective_r_max(), config.blur_step)
    search = BlurSearch(
        radii,
        (config.patch_size, config.patch_size),
        fine_step=config.blur_fine_step,
    )
    chan_l, chan_r = view.estimation_channel()
    m = config.patch_size
    patches = []
    for pid in grid.valid_ids():
        rec = grid.record(pid)
        try:
            est = search.estimate(
                chan_l[rec.y0 : rec.y0 + m, rec.x0 : rec.x0 + m],
                chan_r[rec.y0 : rec.y0 + m, rec.x0 : rec.x0 + m],
                patch_id=pid,
                view_id=view.view_id,
            )
        except DpScaleError:
            continue
        patches.append(
            {
                "patch_id": pid,
                "x0": rec.x0,
                "y0": rec.y0,
                "radius_px": est.radius_px,
                "loss": est.loss,
            }
        )
    _dump_json({"view_id": view.view_id, "patches": patches}, args.out)
    return 0


def cmd_eval(args) -> int:
    report_paths = [Path(p) for p in args.reports]
    collected = ScaleReport()
    for path in report_paths:
        data = json.loads(path.read_text())
        gt = args.ground_truth or data.get("ground_truth_scale")
        if gt is None:
            raise DpScaleError(
                f"{path}: no ground truth in report; pass --ground-truth"
            )
        collected.add(data["s_initial"] / gt, scene=path.stem, stage="initial")
        collected.add(data["s_optim"] / gt, scene=path.stem, stage="optim")
    result = collected.as_dict()
    _dump_json(result, args.out)
    print(
        f"e_s initial = {result['average_error_initial_rounded']:.3f}  "
        f"optim = {result['average_error_optim_rounded']:.3f}  (n = {result['n'] // 2})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpscale",
        description="Recover the metric scale of a multi-view reconstruction "
        "from dual-pixel image pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="run the full scale-recovery pipeline")
    p_est.add_argument("--manifest", required=True)
    p_est.add_argument("--out", default=None, help="report JSON path (default stdout)")
    _add_config_flags(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_syn = sub.add_parser("synth", help="render a synthetic dataset to disk")
    p_syn.add_argument("--out", required=True)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--views", type=int, default=5)
    p_syn.add_argument("--planes", type=int, default=3)
    p_syn.add_argument("--height", type=int, default=512)
    p_syn.add_argument("--width", type=int, default=512)
    p_syn.add_argument("--noise-sigma", type=float, default=0.0)
    p_syn.add_argument("--gain-jitter", type=float, default=0.0)
    p_syn.add_argument("--scale", type=float, default=None,
                       help="fix the ground-truth scale instead of drawing it")
    p_syn.set_defaults(func=cmd_synth)

    p_blur = sub.add_parser("blur", help="dump per-patch blur estimates for one view")
    p_blur.add_argument("--manifest", required=True)
    p_blur.add_argument("--view", type=int, required=True)
    p_blur.add_argument("--out", default=None)
    _add_config_flags(p_blur)
    p_blur.set_defaults(func=cmd_blur)

    p_eval = sub.add_parser("eval", help="scale-ratio metrics from reports")
    p_eval.add_argument("reports", nargs="+")
    p_eval.add_argument("--ground-truth", type=float, default=None)
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DpScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
