"""Batch front end: manifests, prep/preview/render/sweep/finish commands, worker pool.

Manifests are flat UTF-8 `key = value` files with `#` comments; list values
are comma-separated. Frame sequences use printf-style `%04d` patterns plus a
`frames = A..B` range. Every output file is written to a temp path in the
target directory and atomically renamed, so a failed run never leaves a
partial final frame. Diagnostics go to stderr as `level:code:message`.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import controls, finisher, image, styleopt
from .featurenet import NetConfig

__all__ = ["JobManifest", "FrameJob", "FrameResult", "ManifestError",
           "parse_manifest", "manifest_to_text", "run_pool", "main"]


class ManifestError(ValueError):
    """Manifest syntax or schema violation."""


@dataclass(frozen=True)
class JobManifest:
    """Fully resolved job description with defaults applied."""

    content: str = ""
    style: str = ""
    out: str = ""
    frames: tuple | None = None  # (first, last) inclusive
    u: float = 0.0
    iterations: int = 256
    learning_rate: float = 0.02
    seed: int = 0
    init_mode: str = "content-copy"
    snapshot_every: int = 0
    content_taps: tuple = ()  # empty = auto (second block, or block1)
    style_taps: tuple = ()  # empty = auto (every block)
    style_tap_weights: tuple = ()
    blocks: tuple = (16, 32, 64)
    net_seed: int = 7
    working_width: int = 0  # 0 = native content width
    preview_scale: float = 1.0
    width_cap: int = controls.DEFAULT_WIDTH_CAP
    delivery_width: int = 0  # 0 = keep working width
    denoise_sigma: float = -1.0  # < 0 = auto (0.5 x upscale factor)
    dissolve_in_start: int = 0
    dissolve_in_end: int = 0
    dissolve_out_start: int = 1 << 30
    dissolve_out_end: int = 1 << 30
    original: str = ""
    stylized: str = ""
    workers: int = 1


def _parse_frames(v: str):
    try:
        lo, hi = v.split("..")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise ManifestError(f"frames must look like '0..47', got {v!r}")
    if hi < lo:
        raise ManifestError(f"frame range {v!r} is empty")
    return (lo, hi)


_STR_KEYS = {"content", "style", "out", "original", "stylized", "init_mode"}
_FLOAT_KEYS = {"u", "learning_rate", "preview_scale", "denoise_sigma"}
_INT_KEYS = {
    "iterations", "seed", "net_seed", "working_width", "width_cap",
    "delivery_width", "snapshot_every", "workers",
    "dissolve_in_start", "dissolve_in_end", "dissolve_out_start", "dissolve_out_end",
}
_REQUIRED_KEYS = ("content", "style", "out")


def _convert(key: str, raw: str):
    if key in _STR_KEYS:
        return raw
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _INT_KEYS:
        return int(raw)
    if key == "frames":
        return _parse_frames(raw)
    if key == "blocks":
        return tuple(int(t.strip()) for t in raw.split(","))
    if key in ("content_taps", "style_taps"):
        return tuple(t.strip() for t in raw.split(",") if t.strip())
    if key == "style_tap_weights":
        return tuple(float(t.strip()) for t in raw.split(","))
    raise AssertionError(key)


def parse_manifest(text: str) -> JobManifest:
    """Parse manifest text; unknown keys, bad syntax and bad values all error
    with the offending line number."""
    known = {f.name for f in fields(JobManifest)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ManifestError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ManifestError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ManifestError:
            raise
        except ValueError as exc:
            raise ManifestError(f"line {lineno}: bad value for {key!r}: {exc}")
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ManifestError(f"missing required key {key!r}")
    try:
        return JobManifest(**values)
    except ValueError as exc:
        raise ManifestError(str(exc))


def manifest_to_text(m: JobManifest) -> str:
    """Serialize a manifest so parse_manifest round-trips it."""
    lines = []
    for f in fields(JobManifest):
        v = getattr(m, f.name)
        if f.name == "frames":
            if v is None:
                continue
            lines.append(f"frames = {v[0]}..{v[1]}")
        elif isinstance(v, tuple):
            if not v:
                continue
            lines.append(f"{f.name} = {','.join(repr(x) if isinstance(x, float) else str(x) for x in v)}")
        elif isinstance(v, float):
            lines.append(f"{f.name} = {v!r}")
        else:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def diag(level: str, code: str, message: str) -> None:
    print(f"{level}:{code}:{message}", file=sys.stderr)


def atomic_save(img: np.ndarray, path: str, depth: int = 8) -> None:
    """Write via a temp file in the same directory plus atomic rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=os.path.splitext(path)[1])
    os.close(fd)
    try:
        image.save_image(img, tmp, depth)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(text: str, path: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class FrameJob:
    """One independently reproducible frame: input, resolved params, outputs."""

    index: int
    content_path: str
    style_path: str
    out_path: str
    trace_path: str
    manifest: JobManifest
    u_override: float | None = None
    iterations_override: int | None = None


@dataclass(frozen=True)
class FrameResult:
    index: int
    status: str  # "ok" | "failed"
    seconds: float
    content_loss: float
    style_loss: float
    total_loss: float
    out_path: str
    message: str = ""


def _net_config(m: JobManifest) -> NetConfig:
    return NetConfig(block_channels=m.blocks, seed=m.net_seed)


def _fit_dims(w: int, h: int, divisor: int, target_w: int | None = None):
    """Snap (optionally rescaled) dims to multiples of the pool divisor."""
    tw = target_w if target_w else w
    tw = max(divisor, int(round(tw / divisor)) * divisor)
    th = max(divisor, int(round(h * tw / w / divisor)) * divisor)
    return tw, th


def _transfer_params(m: JobManifest, job: FrameJob) -> styleopt.TransferParams:
    n_blocks = len(m.blocks)
    content_taps = m.content_taps or (f"block{min(2, n_blocks)}",)
    style_taps = m.style_taps or tuple(f"block{i + 1}" for i in range(n_blocks))
    return styleopt.TransferParams(
        u=m.u if job.u_override is None else job.u_override,
        iterations=m.iterations if job.iterations_override is None else job.iterations_override,
        content_taps=content_taps,
        style_taps=style_taps,
        style_tap_weights=m.style_tap_weights,
        learning_rate=m.learning_rate,
        seed=m.seed + job.index,
        init_mode=m.init_mode,
        snapshot_every=m.snapshot_every,
    )


def execute_frame_job(job: FrameJob) -> FrameResult:
    """Render one frame; pure function of the job, safe to run in any worker."""
    t0 = time.perf_counter()
    try:
        m = job.manifest
        content = image.load_image(job.content_path)
        style = image.load_image(job.style_path)
        cfg = _net_config(m)
        divisor = 2 ** cfg.num_pools
        h, w = content.shape[:2]
        tw, th = _fit_dims(w, h, divisor, m.working_width or None)
        if (tw, th) != (w, h):
            content = image.resize(content, tw, th)
        p = _transfer_params(m, job)
        stylized, trace, snaps = styleopt.run_transfer(content, style, p, cfg)
        atomic_save(stylized, job.out_path)
        if job.trace_path:
            atomic_write_text(styleopt.trace_to_csv(trace), job.trace_path)
        for step, snap in snaps:
            root, ext = os.path.splitext(job.out_path)
            atomic_save(snap, f"{root}.snap{step:04d}{ext}")
        last = trace[-1]
        return FrameResult(job.index, "ok", time.perf_counter() - t0,
                           last.content_loss, last.style_loss, last.total_loss,
                           job.out_path)
    except Exception as exc:
        return FrameResult(job.index, "failed", time.perf_counter() - t0,
                           float("nan"), float("nan"), float("nan"),
                           job.out_path, f"{type(exc).__name__}: {exc}")


def run_pool(jobs, workers: int = 1):
    """Execute frame jobs with at most `workers` concurrent frames.

    Outputs are byte-identical regardless of worker count; the report is
    ordered by frame index. Per-job failures are captured, not raised.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = list(jobs)
    if not jobs:
        return []
    if workers == 1 or len(jobs) == 1:
        results = [execute_frame_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute_frame_job, jobs))
    return sorted(results, key=lambda r: r.index)


def report_to_csv(results) -> str:
    lines = ["frame,status,seconds,content_loss,style_loss,total_loss,output,message"]
    for r in results:
        lines.append(
            f"{r.index},{r.status},{r.seconds:.3f},{r.content_loss!r},"
            f"{r.style_loss!r},{r.total_loss!r},{r.out_path},{r.message}"
        )
    return "\n".join(lines) + "\n"


def _load_manifest_file(path: str) -> JobManifest:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def _frame_list(m: JobManifest):
    """(frame index, content path) pairs for single frames or sequences."""
    if m.frames is None:
        if "%" in m.content:
            raise ManifestError("content is a sequence pattern but no frames= range given")
        return [(0, m.content)]
    if "%" not in m.content:
        raise ManifestError("frames= given but content is not a %04d-style pattern")
    return [(i, m.content % i) for i in range(m.frames[0], m.frames[1] + 1)]


def _check_look(m: JobManifest) -> bool:
    """Emit validate() diagnostics; returns False when any is an error."""
    width = m.working_width or 1  # native width checked per frame at load
    spec = controls.LookSpec(u=m.u, iterations=m.iterations, working_width=width,
                             preview_scale=m.preview_scale, seed=m.seed)
    ok = True
    for line in controls.validate(spec, m.width_cap):
        level, code, msg = line.split(":", 2)
        diag(level, code, msg)
        ok = ok and level != "error"
    return ok


def _render_jobs(m: JobManifest, out_dir: str, name: str = "stylized"):
    jobs = []
    for i, path in _frame_list(m):
        jobs.append(FrameJob(
            index=i,
            content_path=path,
            style_path=m.style,
            out_path=os.path.join(out_dir, f"{name}.{i:04d}.png"),
            trace_path=os.path.join(out_dir, f"trace.{i:04d}.csv"),
            manifest=m,
        ))
    return jobs


def _finish_and_report(results, out_dir: str) -> int:
    atomic_write_text(report_to_csv(results), os.path.join(out_dir, "report.csv"))
    failed = [r for r in results if r.status != "ok"]
    for r in results:
        if r.status == "ok":
            diag("info", "frame", f"frame={r.index} total_loss={r.total_loss:.6g} "
                                  f"seconds={r.seconds:.1f} out={r.out_path}")
        else:
            diag("error", "frame-failed", f"frame={r.index}: {r.message}")
    return 1 if failed else 0


def cmd_render(args) -> int:
    m = _load_manifest_file(args.manifest)
    if args.out:
        m = replace(m, out=args.out)
    if not _check_look(m):
        return 1
    workers = args.workers if args.workers else m.workers
    os.makedirs(m.out, exist_ok=True)
    results = run_pool(_render_jobs(m, m.out), workers)
    return _finish_and_report(results, m.out)


def cmd_preview(args) -> int:
    m = _load_manifest_file(args.manifest)
    if args.out:
        m = replace(m, out=args.out)
    scale = args.scale if args.scale is not None else m.preview_scale
    if not 0.0 < scale <= 1.0:
        diag("error", "bad-scale", f"preview scale must be in (0, 1], got {scale}")
        return 2
    if not _check_look(m):
        return 1
    frames = _frame_list(m)
    index, content_path = frames[0]
    content = image.load_image(content_path)
    cfg = _net_config(m)
    divisor = 2 ** cfg.num_pools
    h, w = content.shape[:2]
    full_w, full_h = _fit_dims(w, h, divisor, m.working_width or None)
    prev_w, prev_h = _fit_dims(full_w, full_h, divisor, max(divisor, round(scale * full_w)))
    u_scaled = controls.scaled_u(m.u, full_w, prev_w)
    mp = replace(m, u=u_scaled, working_width=prev_w)
    os.makedirs(m.out, exist_ok=True)
    job = FrameJob(index=index, content_path=content_path, style_path=m.style,
                   out_path=os.path.join(m.out, "preview.png"),
                   trace_path=os.path.join(m.out, "preview_trace.csv"),
                   manifest=mp)
    result = execute_frame_job(job)
    diag("info", "preview",
         f"u_full={m.u:.6g} u_scaled={u_scaled:.6g} full_width={full_w} preview_width={prev_w}")
    return _finish_and_report([result], m.out)


def _parse_values(axis: str, raw: str):
    try:
        vals = [float(v) if axis == "u" else int(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ManifestError(f"bad sweep values {raw!r}: {exc}")
    return vals


def cmd_sweep(args) -> int:
    m = _load_manifest_file(args.manifest)
    if args.out:
        m = replace(m, out=args.out)
    values = _parse_values(args.axis, args.values)
    if not values:
        diag("error", "empty-sweep", "sweep needs at least one value")
        return 2
    base = controls.LookSpec(u=m.u, iterations=m.iterations,
                             working_width=m.working_width or 1,
                             preview_scale=m.preview_scale, seed=m.seed)
    specs = controls.make_sweep(controls.SweepSpec(args.axis, tuple(values), base))
    if not _check_look(m):
        return 1
    frames = _frame_list(m)
    index, content_path = frames[0]
    os.makedirs(m.out, exist_ok=True)
    jobs = []
    for k, (v, spec) in enumerate(zip(values, specs)):
        mv = replace(m, u=spec.u, iterations=spec.iterations)
        jobs.append(FrameJob(
            index=k, content_path=content_path, style_path=m.style,
            out_path=os.path.join(m.out, f"sweep_{args.axis}_{v:g}.png"),
            trace_path="", manifest=mv))
    workers = args.workers if args.workers else m.workers
    results = run_pool(jobs, workers)
    rc = _finish_and_report(results, m.out)
    if rc == 0:
        cells = [image.load_image(j.out_path) for j in jobs]
        labels = [f"{args.axis}={v:g}" for v in values]
        atomic_save(controls.contact_sheet(cells, labels),
                    os.path.join(m.out, "contact_sheet.png"))
        diag("info", "sweep", f"contact sheet: {os.path.join(m.out, 'contact_sheet.png')}")
    return rc


def cmd_finish(args) -> int:
    m = _load_manifest_file(args.manifest)
    if args.out:
        m = replace(m, out=args.out)
    if not m.original:
        diag("error", "missing-original", "finish requires original= in the manifest")
        return 1
    frames = _frame_list(m)
    stylized_pat = m.stylized or os.path.join(m.out, "stylized.%04d.png")
    try:
        stylized = [image.load_image(stylized_pat % i if "%" in stylized_pat else stylized_pat)
                    for i, _ in frames]
        originals = [image.load_image(m.original % i if "%" in m.original else m.original)
                     for i, _ in frames]
    except (image.ImageError, FileNotFoundError) as exc:
        diag("error", "finish-input", str(exc))
        return 1
    delivery = m.delivery_width or originals[0].shape[1]
    curve = finisher.DissolveCurve(m.dissolve_in_start, m.dissolve_in_end,
                                   m.dissolve_out_start, m.dissolve_out_end)
    spec = finisher.FinishSpec(
        delivery_width=delivery,
        denoise_sigma=None if m.denoise_sigma < 0 else m.denoise_sigma,
        dissolve=curve)
    start = frames[0][0]
    finished = finisher.finish_sequence(stylized, originals, spec, start_frame=start)
    os.makedirs(m.out, exist_ok=True)
    for (i, _), sty, out in zip(frames, stylized, finished):
        oh, ow = out.shape[:2]
        plain = image.resize(sty, ow, oh)
        diag("info", "finish",
             f"frame={i} hf_before={image.hf_energy(plain, 1.0):.6g} "
             f"hf_after={image.hf_energy(out, 1.0):.6g}")
        atomic_save(out, os.path.join(m.out, f"delivery.{i:04d}.png"))
    return 0


def _parse_rect(raw: str) -> image.Rect:
    try:
        x, y, w, h = (int(v) for v in raw.split(","))
    except ValueError:
        raise ManifestError(f"crop must be 'x,y,w,h', got {raw!r}")
    return image.Rect(x, y, w, h)


def cmd_prep_style(args) -> int:
    img = image.load_image(args.style)
    if args.crop:
        img = image.crop(img, _parse_rect(args.crop))
    for comp in args.composite or []:
        try:
            patch_path, at = comp.split("@", 1)
            x, y = (int(v) for v in at.split(","))
        except ValueError:
            diag("error", "bad-composite", f"expected 'patch.png@x,y', got {comp!r}")
            return 2
        patch = image.load_image(patch_path)
        img = image.composite_block(img, patch, image.Rect(x, y, patch.shape[1], patch.shape[0]))
    report = image.style_image_report(img)
    for key, val in report.items():
        diag("info", "style-report", f"{key}={val:.6g}")
    if report["clipped_highlight_fraction"] > 0.05:
        diag("warning", "blown-highlights",
             f"{report['clipped_highlight_fraction']:.1%} of pixels are clipped white; "
             "reflective highlights are likely blown out")
    atomic_save(img, args.out, args.depth)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stylelook",
        description="Look-development engine and batch pipeline for neural style transfer.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--manifest", required=True, help="job manifest path")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--workers", type=int, default=0, help="worker pool size")

    p = sub.add_parser("prep-style", help="crop/composite a style image and report quality")
    p.add_argument("--style", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--crop", default=None, help="x,y,w,h")
    p.add_argument("--composite", action="append", help="patch.png@x,y (repeatable)")
    p.add_argument("--depth", type=int, default=8, choices=(8, 16))
    p.set_defaults(func=cmd_prep_style)

    p = sub.add_parser("preview", help="low-resolution preview with rescaled u")
    add_common(p)
    p.add_argument("--scale", type=float, default=None, help="preview scale in (0, 1]")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("render", help="render frames at working resolution")
    add_common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sweep", help="render a parameter sweep plus contact sheet")
    add_common(p)
    p.add_argument("--axis", required=True, choices=("u", "iterations"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("finish", help="upscale, denoise and dissolve over originals")
    add_common(p)
    p.set_defaults(func=cmd_finish)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, image.ImageError, FileNotFoundError, ValueError) as exc:
        diag("error", "fatal", str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
