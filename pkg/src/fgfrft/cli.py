"""Command-line entry point: ``fgfrft <command> [flags]``.

Every command writes its CSV results and a ``manifest.txt`` (flat
``key=value``) into ``--out``.  ``fgfrft replay <manifest>`` reruns a
command from its manifest.  Exit codes: 0 success, 2 usage or parameter
error, 3 numerical or capacity failure, 4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime as _dt
import logging
import os
import shlex
import sys
from typing import List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .bench import accuracy_sweep, order_learning_experiment, timing_benchmark
from .data import PLANE_CLOUD, SMOOTH_IMAGE, bundled_path
from .errors import FgfrftError, ParameterError, ParseError
from .graph import NORMALIZATIONS
from .io import (
    ensure_dir,
    read_manifest,
    read_pgm,
    read_xyz,
    voxel_downsample,
    write_csv,
    write_manifest,
    write_pgm,
    write_xyz,
)
from .learn import DenoiseConfig
from .pipelines import denoise_cloud, denoise_image, quantize
from .transform import DEFAULT_MEMORY_BUDGET

log = logging.getLogger("fgfrft")

SWEEP_HEADER = ["n", "l", "alpha", "seed", "mse", "mae", "nmse"]
BENCH_HEADER = ["n", "l", "fast_s", "exact_s", "speedup", "repeats"]
SUMMARY_HEADER = ["k", "backend", "seed", "final_loss", "alpha_sum", "abs_delta", "wall_s", "speedup"]
IMAGE_HEADER = ["backend", "psnr_noisy", "ssim_noisy", "psnr", "ssim", "mean_alpha", "patches", "wall_s"]
CLOUD_HEADER = ["backend", "psnr_noisy", "psnr", "peak", "points", "batches", "mean_alpha", "wall_s"]


# ------------------------------------------------------------ list flags


def _expand(token: str, conv):
    # "a..b" is an inclusive range stepping by 1000 for ints >= 1000, else by 1
    if ".." in token and conv is int:
        lo, hi = (int(t) for t in token.split(".."))
        step = 1000 if lo >= 1000 else 1
        return list(range(lo, hi + 1, step))
    return [conv(token)]


def _list_of(conv):
    def parse(text: str) -> List:
        out = []
        for tok in text.replace(",", " ").split():
            try:
                out.extend(_expand(tok, conv))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad list item {tok!r}") from None
        if not out:
            raise argparse.ArgumentTypeError("empty list")
        return out

    return parse


def _backends(choice: str):
    return ("fast", "exact") if choice == "both" else (choice,)


# --------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, out_default: str):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--memory-budget", type=float, default=DEFAULT_MEMORY_BUDGET / 2**30,
                   help="power-cache budget in GiB (default 4)")
    p.add_argument("--csv-only", action="store_true",
                   help="write only CSV results and the manifest, no signal files")
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS threads outside timed sections (timed sections always use 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fgfrft", description="Fast graph fractional Fourier transform toolkit")
    ap.add_argument("--version", action="version", version=f"fgfrft {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="series vs eigendecomposition error sweep")
    _common(p, "results/sweep")
    p.add_argument("--n-list", type=_list_of(int), default=[2000, 3000, 4000])
    p.add_argument("--alpha-list", type=_list_of(float), default=[0.15, 0.35, 0.55, 0.75, 0.95])
    p.add_argument("--l-list", type=_list_of(int), default=[10, 20, 30])
    p.add_argument("--seeds", type=_list_of(int), default=None,
                   help="unitary seeds (default: --seed)")

    p = sub.add_parser("bench", help="online construction timing")
    _common(p, "results/bench")
    p.add_argument("--n-list", type=_list_of(int), default=[2000, 3000, 4000])
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--warmups", type=int, default=1)

    p = sub.add_parser("learn-order", help="learn cascade orders toward a target")
    _common(p, "results/learn-order")
    p.add_argument("--k", type=_list_of(int), default=[1, 2, 3], help="cascade depths")
    p.add_argument("--target", type=float, default=1.5)
    p.add_argument("--init", type=float, default=0.1, help="initial order per layer")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--backend", choices=["fast", "exact", "both"], default="both")

    p = sub.add_parser("denoise-image", help="patch-wise denoising of an 8-bit PGM")
    _common(p, "results/denoise-image")
    p.add_argument("--input", default=None, help="binary PGM (default: bundled 64x64 image)")
    p.add_argument("--sigma", type=float, default=20.0)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--alpha-init", type=float, default=0.5)
    p.add_argument("--patch", type=int, default=64)
    p.add_argument("--norm", choices=NORMALIZATIONS, default="combinatorial-laplacian")
    p.add_argument("--backend", choices=["fast", "exact", "both"], default="fast")

    p = sub.add_parser("denoise-cloud", help="batch-wise denoising of an XYZ point cloud")
    _common(p, "results/denoise-cloud")
    p.add_argument("--input", default=None, help="ASCII XYZ (default: bundled 4000-point plane)")
    p.add_argument("--k", type=int, default=40)
    p.add_argument("--batch", type=int, default=4000)
    p.add_argument("--voxel", type=float, default=0.0, help="voxel size for downsampling (0: off)")
    p.add_argument("--sigma", type=float, default=20.0)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--alpha-init", type=float, default=0.5)
    p.add_argument("--peak", type=float, default=None,
                   help="PSNR peak (default: largest per-axis range of the clean cloud)")
    p.add_argument("--graph-from", choices=["noisy", "clean"], default="noisy")
    p.add_argument("--norm", choices=NORMALIZATIONS, default="combinatorial-laplacian")
    p.add_argument("--backend", choices=["fast", "exact", "both"], default="fast")

    p = sub.add_parser("replay", help="rerun a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the recorded output directory")
    return ap


# ------------------------------------------------------------- commands


def _budget(args) -> int:
    return int(args.memory_budget * 2**30)


def cmd_sweep(args) -> List[str]:
    seeds = args.seeds if args.seeds is not None else [args.seed]
    recs = accuracy_sweep(args.n_list, args.alpha_list, args.l_list, seeds, _budget(args))
    path = os.path.join(args.out, "sweep.csv")
    write_csv(path, SWEEP_HEADER, [[r.n, r.l, r.alpha, r.seed, r.mse, r.mae, r.nmse] for r in recs])
    return [path]


def cmd_bench(args) -> List[str]:
    recs = timing_benchmark(args.n_list, args.l, args.repeats, args.warmups, args.seed, _budget(args))
    for r in recs:
        if r.warning:
            log.warning("N=%d: %s", r.n, r.warning)
    path = os.path.join(args.out, "bench.csv")
    write_csv(path, BENCH_HEADER, [[r.n, r.l, r.median_fast_seconds, r.median_exact_seconds,
                                    r.speedup, r.repeats] for r in recs])
    return [path]


def cmd_learn_order(args) -> List[str]:
    backends = _backends(args.backend)
    rows, results = order_learning_experiment(
        args.k, args.target, args.epochs, args.lr, args.n, args.l, (args.seed,), args.init,
        backends, _budget(args))
    paths = []
    for (seed, k, b), res in sorted(results.items()):
        path = os.path.join(args.out, f"trajectory_k{k}_{b}.csv")
        header = ["epoch", "loss", "alpha_sum"] + [f"alpha_{i + 1}" for i in range(k)]
        write_csv(path, header, [[s.epoch, s.loss, s.alpha_sum, *s.alphas] for s in res.trajectory])
        paths.append(path)
    path = os.path.join(args.out, "summary.csv")
    write_csv(path, SUMMARY_HEADER, [[r.k, r.backend, r.seed, r.final_loss, r.alpha_sum,
                                      r.abs_delta, r.wall_time, r.speedup] for r in rows])
    return paths + [path]


def _denoise_cfg(args) -> DenoiseConfig:
    return DenoiseConfig(l=args.l, epochs=args.epochs, lr=args.lr, alpha_init=args.alpha_init,
                         sigma=args.sigma, seed=args.seed)


def cmd_denoise_image(args) -> List[str]:
    src = args.input or bundled_path(SMOOTH_IMAGE)
    img = read_pgm(src)
    run = denoise_image(img, _denoise_cfg(args), _backends(args.backend), args.patch, args.norm,
                        _budget(args))
    paths = []
    rows = []
    for b, oc in run.outcomes.items():
        rows.append([b, run.psnr_noisy, run.ssim_noisy, oc.psnr, oc.ssim,
                     float(np.mean([r.alpha for r in oc.results])), len(oc.results), oc.seconds])
        log.info("%s: PSNR %.3f dB (noisy %.3f dB), SSIM %.4f", b, oc.psnr, run.psnr_noisy, oc.ssim)
        if not args.csv_only:
            p = os.path.join(args.out, f"denoised_{b}.pgm")
            write_pgm(p, quantize(oc.output))
            paths.append(p)
    if not args.csv_only:
        p = os.path.join(args.out, "noisy.pgm")
        write_pgm(p, quantize(run.noisy))
        paths.append(p)
    p = os.path.join(args.out, "metrics.csv")
    write_csv(p, IMAGE_HEADER, rows)
    return paths + [p]


def cmd_denoise_cloud(args) -> List[str]:
    src = args.input or bundled_path(PLANE_CLOUD)
    pts = voxel_downsample(read_xyz(src), args.voxel)
    if args.k >= len(pts):
        raise ParameterError(f"k={args.k} must be smaller than the number of points ({len(pts)})")
    run = denoise_cloud(pts, _denoise_cfg(args), _backends(args.backend), args.k, args.batch,
                        args.graph_from, args.peak, args.norm, _budget(args))
    paths, rows = [], []
    for b, oc in run.outcomes.items():
        rows.append([b, run.psnr_noisy, oc.psnr, run.peak, len(pts), len(oc.results),
                     float(np.mean([r.alpha for r in oc.results])), oc.seconds])
        log.info("%s: PSNR %.3f dB (noisy %.3f dB)", b, oc.psnr, run.psnr_noisy)
        if not args.csv_only:
            p = os.path.join(args.out, f"denoised_{b}.xyz")
            write_xyz(p, oc.output)
            paths.append(p)
    p = os.path.join(args.out, "metrics.csv")
    write_csv(p, CLOUD_HEADER, rows)
    return paths + [p]


COMMANDS = {
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "learn-order": cmd_learn_order,
    "denoise-image": cmd_denoise_image,
    "denoise-cloud": cmd_denoise_cloud,
}


def _manifest(args, argv, outputs) -> dict:
    entries = {
        "command": args.command,
        "argv": shlex.join(argv),
        "seed": args.seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": ",".join(os.path.basename(p) for p in outputs),
    }
    for key, value in sorted(vars(args).items()):
        if key not in ("command", "func"):
            entries[f"flag.{key}"] = value
    return entries


def _replay_argv(args) -> List[str]:
    entries = read_manifest(args.manifest)
    if "argv" not in entries:
        raise ParseError(f"{args.manifest}: manifest has no argv entry", 0)
    argv = shlex.split(entries["argv"])
    if args.out is not None:
        argv += ["--out", args.out]
    return argv


def run(argv: Sequence[str]) -> int:
    argv = list(argv)
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        return run(_replay_argv(args))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    ensure_dir(args.out)
    limits = threadpool_limits(args.threads) if args.threads else contextlib.nullcontext()
    with limits:
        outputs = COMMANDS[args.command](args)
    path = os.path.join(args.out, "manifest.txt")
    write_manifest(path, _manifest(args, argv, outputs))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except FgfrftError as exc:
        print(f"fgfrft: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fgfrft: error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
