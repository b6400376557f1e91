"""Command-line surface.

Subcommands: gen, traj, run, mc, detect, bench. Experiments are driven by a
TOML config; flags are sugar writing into the same structure, so every
command is reproducible from its config file alone. CRATERLOC_SEED
overrides the configured seed. Exit codes: 0 success, 1 runtime failure,
2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from craterloc import detect as det
from craterloc import mapgen, sim
from craterloc import particle_filter as pf
from craterloc.camera import (
    CameraModel,
    NOISELESS,
    SensingNoiseModel,
    default_camera,
    refine_stereo,
    render_range_image,
    save_range_image,
)
from craterloc.detect import DetectionParams
from craterloc.geometry import Pose


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config handling


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}")


def _camera_from(cfg: dict) -> CameraModel:
    c = dict(cfg.get("camera", {}))
    hfov_deg = c.pop("hfov_deg", 60.0)
    pitch_deg = c.pop("pitch_deg", None)
    if pitch_deg is not None:
        c["pitch"] = math.radians(pitch_deg)
    return CameraModel.from_hfov(math.radians(hfov_deg), **c)


def _noise_from(cfg: dict) -> SensingNoiseModel:
    n = cfg.get("noise", {})
    if n.get("zero", False):
        return NOISELESS
    kwargs = {k: v for k, v in n.items() if k != "zero"}
    if "range_sigma_coeffs" in kwargs:
        kwargs["range_sigma_coeffs"] = tuple(kwargs["range_sigma_coeffs"])
    return SensingNoiseModel(**kwargs)


def _detection_from(cfg: dict) -> DetectionParams:
    return DetectionParams(**cfg.get("detection", {}))


def _filter_from(cfg: dict) -> pf.FilterConfig:
    return pf.FilterConfig(**cfg.get("filter", {}))


def _seed_from(cfg: dict, args) -> int:
    env = os.environ.get("CRATERLOC_SEED")
    if env is not None:
        return int(env)
    if getattr(args, "seed", None) is not None:
        return args.seed
    return int(cfg.get("seed", 0))


def _load_assets(cfg: dict, args) -> tuple[mapgen.CraterMap, mapgen.DemRaster]:
    map_path = getattr(args, "map", None) or cfg.get("map")
    dem_path = getattr(args, "dem", None) or cfg.get("dem")
    if not map_path or not dem_path:
        raise ConfigError("map and dem paths are required (flags or config)")
    for p in (map_path, dem_path):
        if not Path(p).exists():
            raise ConfigError(f"file not found: {p}")
    return mapgen.load_crater_map(map_path), mapgen.load_dem(dem_path)


# ---------------------------------------------------------------------------
# SVG histogram (no plotting dependency)


def histogram_svg(values, bin_width: float = 1.0) -> str:
    values = list(values)
    n_bins = max(1, int(math.ceil(max(values))) + 1) if values else 1
    counts = [0] * n_bins
    for v in values:
        counts[min(int(v // bin_width), n_bins - 1)] += 1
    w_px, h_px, pad = 60, 220, 30
    width = pad * 2 + w_px * n_bins
    peak = max(counts) or 1
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{h_px + 2 * pad}">',
        f'<text x="{pad}" y="{pad - 10}" font-size="12">final error histogram '
        f"(1 m bins, n={len(values)})</text>",
    ]
    for i, c in enumerate(counts):
        bar_h = int(h_px * c / peak)
        x = pad + i * w_px
        y = pad + h_px - bar_h
        parts.append(
            f'<rect x="{x}" y="{y}" width="{w_px - 4}" height="{bar_h}" fill="#4477aa"/>'
        )
        parts.append(
            f'<text x="{x}" y="{pad + h_px + 14}" font-size="10">{i}-{i + 1}m</text>'
        )
        parts.append(f'<text x="{x}" y="{y - 3}" font-size="10">{c}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args) -> int:
    cfg = load_config(args.config)
    seed = _seed_from(cfg, args)
    extent = args.extent if args.extent is not None else cfg.get("extent", 400.0)
    if extent <= 0:
        raise ConfigError(f"extent must be positive, got {extent}")
    fcfg = cfg.get("field", {})
    dp_kwargs = {k: v for k, v in fcfg.items() if k in DensityParamsFields}
    dp = mapgen.DensityParams(**dp_kwargs)
    placements = None
    if args.landmark:
        placements = tuple(tuple(map(float, spec.split(","))) for spec in args.landmark)
    elif "landmarks" in cfg:
        placements = tuple(tuple(lm) for lm in cfg["landmarks"])
    ls = mapgen.LandmarkSpec(placements=placements) if placements else mapgen.LandmarkSpec(
        count=cfg.get("n_landmarks", 2)
    )
    cmap, dem = mapgen.generate_crater_field(seed, extent, dp, ls)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapgen.save_crater_map(cmap, out / "map.json")
    mapgen.save_dem(dem, out / "dem.asc")
    for c in cmap.landmarks:
        print(
            f"landmark {c.id}: center=({c.center[0]:.1f}, {c.center[1]:.1f}) "
            f"diameter={c.diameter:.1f} m depth={c.depth:.2f} m"
        )
    print(f"wrote {out / 'map.json'} and {out / 'dem.asc'}")
    return 0


DensityParamsFields = {
    "resolution",
    "base_amplitude",
    "base_wavelength",
    "background_spacing",
    "background_diameter",
    "depth_ratio",
}


def _parse_xy(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"expected x,y got {text!r}")
    return float(parts[0]), float(parts[1])


def cmd_traj(args) -> int:
    cfg = load_config(args.config)
    cmap, _ = _load_assets(cfg, args)
    tcfg = cfg.get("trajectory", {})
    start = _parse_xy(args.start) if args.start else tuple(tcfg["start"])
    goal = _parse_xy(args.goal) if args.goal else tuple(tcfg["goal"])
    traj_type = args.traj or tcfg.get("type", "half_survey")
    plan = sim.plan_trajectory(
        cmap,
        start,
        goal,
        traj_type,
        stop_spacing=tcfg.get("stop_spacing", 10.0),
        standoff=tcfg.get("standoff", 10.0),
    )
    sim.save_trajectory(plan, args.out)
    print(
        f"{plan.traj_type}: {len(plan.waypoints)} stops, {plan.length:.0f} m, "
        f"landmarks {list(plan.landmark_ids)}"
    )
    return 0


def _build_plan(cfg: dict, args, cmap) -> sim.TrajectoryPlan:
    if getattr(args, "plan", None):
        return sim.load_trajectory(args.plan)
    tcfg = cfg.get("trajectory", {})
    if "start" not in tcfg or "goal" not in tcfg:
        raise ConfigError("config [trajectory] needs start and goal (or pass --plan)")
    traj_type = getattr(args, "traj", None) or tcfg.get("type", "half_survey")
    return sim.plan_trajectory(
        cmap,
        tuple(tcfg["start"]),
        tuple(tcfg["goal"]),
        traj_type,
        stop_spacing=tcfg.get("stop_spacing", 10.0),
        standoff=tcfg.get("standoff", 10.0),
    )


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cmap, dem = _load_assets(cfg, args)
    plan = _build_plan(cfg, args, cmap)
    seed = _seed_from(cfg, args)
    drift = args.drift if args.drift is not None else cfg.get("drift_p", 0.02)
    result = sim.replay(
        plan,
        cmap,
        dem,
        _camera_from(cfg),
        _noise_from(cfg),
        drift,
        _filter_from(cfg),
        seed,
        detection_params=_detection_from(cfg),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sim.save_run_result(result, out)
    print(f"final error {result.final_error:.2f} m, diverged={result.diverged}")
    print(f"wrote {out}")
    return 0


def cmd_mc(args) -> int:
    cfg = load_config(args.config)
    cmap, dem = _load_assets(cfg, args)
    plan = _build_plan(cfg, args, cmap)
    seed = _seed_from(cfg, args)
    drift = args.drift if args.drift is not None else cfg.get("drift_p", 0.02)
    n_runs = args.runs if args.runs is not None else cfg.get("n_runs", 30)
    summary = sim.monte_carlo(
        plan,
        cmap,
        dem,
        _camera_from(cfg),
        _noise_from(cfg),
        drift,
        _filter_from(cfg),
        n_runs,
        seed,
        detection_params=_detection_from(cfg),
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim.save_mc_summary(summary, out / "mc_summary.json")
    (out / "mc_hist.svg").write_text(histogram_svg(summary.final_errors))
    with open(out / "mc_final_errors.csv", "w") as fh:
        fh.write("run,final_error_m\n")
        for i, e in enumerate(summary.final_errors):
            fh.write(f"{i},{e:.6f}\n")
    print(
        f"{plan.traj_type} drift={drift:.0%} runs={summary.runs}: "
        f"avg={summary.avg_error:.2f} m max={summary.max_error:.2f} m "
        f">5m frac={summary.frac_gt_5m:.2f}"
    )
    print(f"wrote {out / 'mc_summary.json'}")
    return 0


def cmd_detect(args) -> int:
    cfg = load_config(args.config)
    cmap, dem = _load_assets(cfg, args)
    seed = _seed_from(cfg, args)
    cam = _camera_from(cfg)
    noise = NOISELESS if args.zero_noise else _noise_from(cfg)
    params = _detection_from(cfg)
    x, y = _parse_xy(args.pose)
    heading = math.radians(args.heading_deg)

    landmarks = cmap.landmarks
    if not landmarks:
        raise ConfigError("map has no landmark craters")

    def one_report(pose: Pose, rseed: int) -> dict:
        img = refine_stereo(render_range_image(dem, pose, cam, noise, seed=rseed))
        detections = det.detect(img, params)
        target = min(
            landmarks,
            key=lambda c: math.hypot(c.center[0] - pose.x, c.center[1] - pose.y),
        )
        arc = mapgen.front_arc(
            mapgen.sample_rim(target, cmap.rim_sample_spacing),
            pose,
            crater_center=np.asarray(target.center),
        )
        q = det.score_detections(detections, cmap, pose) if detections else None
        rim_pct = det.rim_percent_detected(detections, arc) if len(arc) else 0.0
        return {"detections": detections, "q_score": q, "rim_percent": rim_pct}

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.sweep_range:
        lo, hi, step = _parse_sweep(args.sweep_range)
        target = min(
            landmarks, key=lambda c: math.hypot(c.center[0] - x, c.center[1] - y)
        )
        ctr = np.asarray(target.center)
        back = np.array([math.cos(heading), math.sin(heading)])
        rows = []
        r = lo
        i = 0
        while r <= hi + 1e-9:
            pose_pt = ctr - back * (target.radius + r)
            pose = Pose(pose_pt[0], pose_pt[1], heading)
            rep = one_report(pose, seed + i)
            rows.append(
                json.dumps(
                    {
                        "range_m": round(r, 3),
                        "q_score": rep["q_score"],
                        "rim_percent": round(rep["rim_percent"], 3),
                        "n_detections": len(rep["detections"]),
                    },
                    sort_keys=True,
                )
            )
            r += step
            i += 1
        out.write_text("\n".join(rows) + "\n")
    else:
        pose = Pose(x, y, heading)
        rep = one_report(pose, seed)
        det.save_detections_jsonl(rep["detections"], out, q_score=rep["q_score"])
        with open(out, "a") as fh:
            fh.write(
                json.dumps(
                    {
                        "q_score": rep["q_score"],
                        "rim_percent": round(rep["rim_percent"], 3),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        if args.dump_range_image:
            img = render_range_image(dem, pose, cam, noise, seed=seed)
            save_range_image(img, args.dump_range_image)
        print(f"q_score={rep['q_score']} rim_percent={rep['rim_percent']:.1f}")
    print(f"wrote {out}")
    return 0


def _parse_sweep(text: str) -> tuple[float, float, float]:
    # "5..25" or "5..25:1"
    rng, _, step = text.partition(":")
    lo, _, hi = rng.partition("..")
    try:
        return float(lo), float(hi), float(step) if step else 1.0
    except ValueError:
        raise ConfigError(f"bad sweep spec {text!r}, expected lo..hi[:step]")


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    cmap, dem = _load_assets(cfg, args)
    seed = _seed_from(cfg, args)
    target = cmap.landmarks[0]
    ctr = np.asarray(target.center)
    pose = Pose(ctr[0] - target.radius - 10.0, ctr[1], 0.0)
    counts = tuple(int(n) for n in args.particles.split(","))
    report = sim.timing_harness(cmap, dem, _camera_from(cfg), pose, counts, seed=seed)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="craterloc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate crater map + DEM")
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--extent", type=float)
    g.add_argument("--landmark", action="append", metavar="X,Y,DIAM")
    g.add_argument("--out-dir", default=".")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("traj", help="plan an observation trajectory")
    t.add_argument("--config")
    t.add_argument("--map")
    t.add_argument("--dem")
    t.add_argument("--start", metavar="X,Y")
    t.add_argument("--goal", metavar="X,Y")
    t.add_argument("--traj", choices=sim.TRAJ_TYPES)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_traj)

    r = sub.add_parser("run", help="single replay, writes RunResult CSV")
    r.add_argument("--config")
    r.add_argument("--map")
    r.add_argument("--dem")
    r.add_argument("--plan")
    r.add_argument("--traj", choices=sim.TRAJ_TYPES)
    r.add_argument("--drift", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("mc", help="Monte Carlo batch, writes summary + SVG histogram")
    m.add_argument("--config")
    m.add_argument("--map")
    m.add_argument("--dem")
    m.add_argument("--plan")
    m.add_argument("--traj", choices=sim.TRAJ_TYPES)
    m.add_argument("--drift", type=float)
    m.add_argument("--runs", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--out-dir", required=True)
    m.set_defaults(func=cmd_mc)

    d = sub.add_parser("detect", help="run the detector at one pose (or a range sweep)")
    d.add_argument("--config")
    d.add_argument("--map")
    d.add_argument("--dem")
    d.add_argument("--pose", required=True, metavar="X,Y")
    d.add_argument("--heading-deg", type=float, default=0.0)
    d.add_argument("--sweep-range", metavar="LO..HI[:STEP]")
    d.add_argument("--zero-noise", action="store_true")
    d.add_argument("--seed", type=int)
    d.add_argument("--dump-range-image")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_detect)

    b = sub.add_parser("bench", help="timing smoke test (stdout only)")
    b.add_argument("--config")
    b.add_argument("--map")
    b.add_argument("--dem")
    b.add_argument("--particles", default="50,100,200")
    b.add_argument("--seed", type=int)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, mapgen.ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
