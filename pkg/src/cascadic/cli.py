"""Command-line interface: ``blur``, ``restore``, ``benchmark`` and ``oracle``."""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .benchmark import BenchmarkConfig, METHODS, run_benchmark, write_outputs
from .cascade import DEFAULT_BASELINE_TOL, DEFAULT_LEVELS, IterationSchedule, PmParams, baseline, ctmg, ectmg
from .degradation import NoiseSpec, degrade, gaussian_psf
from .imageio import read_image, read_png, write_eten, write_png
from .krylov import SmootherKind
from .metrics import format_psnr
from .oracle import format_report, perturbed_kernel, run_checks
from .synthetic import SCENES, make_scene

log = logging.getLogger("cascadic")


@dataclass
class RunConfig:
    """Everything needed to reproduce one ``blur`` or ``restore`` run."""

    command: str
    input: Optional[str] = None
    sigma: float = 0.9
    noise: float = 0.0
    seed: int = 0
    method: str = "ctmg"
    smoother: str = "cr"
    levels: int = DEFAULT_LEVELS
    m_star: float = 1.0
    m0: float = 1.0
    beta: float = 4.0
    eps0: float = 0.5
    pm: dict = field(default_factory=dict)
    rel_tol: float = DEFAULT_BASELINE_TOL
    max_iters: Optional[int] = None
    restriction: str = "full_weighting"
    reference: Optional[str] = None
    outputs: dict = field(default_factory=dict)

    def validate(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.noise < 0:
            raise ValueError(f"noise amplitude must be non-negative, got {self.noise}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        SmootherKind.parse(self.smoother)
        if self.levels < 2 and self.method != "baseline":
            raise ValueError("cascades need --levels >= 2")
        self.pm_params()
        self.schedule()

    def pm_params(self):
        return PmParams(**self.pm)

    def schedule(self):
        if self.method == "ectmg":
            return IterationSchedule.economic(m_star=self.m_star, m0=self.m0, beta=self.beta, eps0=self.eps0)
        return IterationSchedule.classic(m_star=self.m_star)


def _check_divisible(X, levels):
    factor = 2 ** (levels - 1)
    if X.shape[0] % factor or X.shape[1] % factor:
        raise ValueError(f"image dims {X.shape[:2]} are not divisible by 2^(L-1) = {factor}")


def _load_source(args):
    if args.scene:
        return make_scene(args.scene, args.size, args.size)
    return read_png(args.input)


def cmd_blur(args):
    cfg = RunConfig(
        command="blur",
        input=args.input or f"scene:{args.scene}",
        sigma=args.sigma,
        noise=args.noise,
        seed=args.seed,
        levels=args.levels,
        outputs={"png": args.out_png, "eten": args.out_eten},
    )
    cfg.validate()
    F = _load_source(args)
    _check_divisible(F, cfg.levels)
    G = degrade(F, gaussian_psf(cfg.sigma), NoiseSpec(cfg.noise, cfg.seed))
    if args.out_eten:
        write_eten(args.out_eten, G)
    if args.out_png:
        write_png(args.out_png, G)
    if args.reference_out:
        write_eten(args.reference_out, F)
    if args.report:
        Path(args.report).write_text(json.dumps({"version": __version__, "config": asdict(cfg)}, indent=2))
    print(f"blurred {cfg.input} {F.shape} sigma={cfg.sigma} noise={cfg.noise} seed={cfg.seed}")
    return 0


def _pm_from_args(args):
    pm = {}
    if args.tau is not None:
        pm["tau"] = args.tau
    if args.pm_k is not None:
        pm["k_threshold"] = args.pm_k
    if args.pm_iters is not None:
        pm["iters"] = args.pm_iters
    if args.pm_k_factor is not None:
        pm["k_factor"] = args.pm_k_factor
    return pm


def restore_with(cfg, G):
    """Run the method named in ``cfg`` on ``G`` and return the report."""
    if cfg.method == "baseline":
        return baseline(G, cfg.sigma, cfg.smoother, rel_tol=cfg.rel_tol, max_iters=cfg.max_iters)
    fn = ctmg if cfg.method == "ctmg" else ectmg
    return fn(G, cfg.sigma, cfg.levels, cfg.smoother, cfg.pm_params(), cfg.schedule(), restriction=cfg.restriction)


def text_report(cfg, rep):
    lines = [
        f"cascadic {__version__}",
        f"method     {rep.method} ({rep.smoother}), levels {rep.levels}",
        f"iterations {rep.iters_per_level}",
        f"residual   {rep.final_rel_residual:.6e}",
        f"cpu        {rep.cpu_seconds:.3f} s",
    ]
    if rep.breakdown:
        lines.append(f"breakdown  {rep.breakdown}")
    if rep.quality is not None:
        lines.append(f"psnr       {format_psnr(rep.quality.psnr)} dB")
        lines.append(f"re         {rep.quality.re:.6e}")
    lines.append("config     " + json.dumps(asdict(cfg), sort_keys=True))
    return "\n".join(lines)


def cmd_restore(args):
    cfg = RunConfig(
        command="restore",
        input=args.input,
        sigma=args.sigma,
        method=args.method,
        smoother=args.smoother,
        levels=args.levels,
        m_star=args.m_star,
        m0=args.m0,
        beta=args.beta,
        eps0=args.eps0,
        pm=_pm_from_args(args),
        rel_tol=args.rel_tol,
        max_iters=args.max_iters,
        restriction=args.restriction,
        reference=args.reference,
        outputs={"png": args.out_png, "eten": args.out_eten, "report": args.report},
    )
    cfg.validate()
    G = read_image(args.input)
    rep = restore_with(cfg, G)
    if args.reference:
        rep.evaluate(read_image(args.reference))
    if args.out_png:
        write_png(args.out_png, rep.F)
    if args.out_eten:
        write_eten(args.out_eten, rep.F)
    text = text_report(cfg, rep)
    if args.report:
        doc = {"version": __version__, "config": asdict(cfg), "result": rep.to_dict()}
        Path(args.report).write_text(json.dumps(doc, indent=2))
        Path(args.report).with_suffix(".txt").write_text(text + "\n")
    print(text)
    return 0


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v)


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def cmd_benchmark(args):
    cfg = BenchmarkConfig(
        images=_names(args.images),
        sigmas=_floats(args.sigmas),
        methods=_names(args.methods),
        smoothers=_names(args.smoothers),
        levels=args.levels,
        noise=args.noise,
        seed=args.seed,
        m_star=args.m_star,
        m0=args.m0,
        baseline_budget=args.baseline_budget,
        baseline_rel_tol=args.rel_tol,
        size=args.size,
    )
    rows = run_benchmark(cfg, jobs=args.jobs)
    traces = args.traces or str(Path(args.out).with_suffix(".traces.json"))
    write_outputs(cfg, rows, args.out, __version__, traces)
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"row failed: {r.image} sigma={r.sigma} {r.method}/{r.smoother}: {r.error}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.out} ({len(failed)} failed); traces in {traces}")
    return 1 if failed else 0


def cmd_oracle(args):
    hook = perturbed_kernel(args.perturb_kernel) if args.perturb_kernel else None
    results = run_checks(hook)
    print(format_report(results))
    return 0 if all(r.passed for r in results) else 1


def _add_schedule_flags(p):
    p.add_argument("--levels", type=int, default=DEFAULT_LEVELS, help="number of grid levels L")
    p.add_argument("--m-star", type=float, default=1.0)
    p.add_argument("--m0", type=float, default=1.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="cascadic", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blur", help="blur and add noise to an image")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="PNG to degrade")
    src.add_argument("--scene", choices=sorted(SCENES), help="use a built-in synthetic scene instead")
    p.add_argument("--size", type=int, default=128, help="scene size in pixels")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="uniform noise amplitude")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", type=int, default=DEFAULT_LEVELS, help="dims must be divisible by 2^(L-1)")
    p.add_argument("--out-png")
    p.add_argument("--out-eten")
    p.add_argument("--reference-out", help="also save the clean image as ETEN")
    p.add_argument("--report")
    p.set_defaults(func=cmd_blur)

    p = sub.add_parser("restore", help="restore a degraded image")
    p.add_argument("--method", choices=METHODS, default="ctmg")
    p.add_argument("--smoother", choices=[k.value for k in SmootherKind], default="cr")
    p.add_argument("--input", required=True, help="degraded ETEN (preferred) or PNG")
    p.add_argument("--sigma", type=float, required=True, help="blur width used to degrade the input")
    p.add_argument("--reference", help="clean image (PNG or ETEN) for PSNR and RE")
    p.add_argument("--out-png")
    p.add_argument("--out-eten")
    p.add_argument("--report", help="JSON report path; a .txt twin is written next to it")
    _add_schedule_flags(p)
    p.add_argument("--beta", type=float, default=4.0)
    p.add_argument("--eps0", type=float, default=0.5)
    p.add_argument("--tau", type=float)
    p.add_argument("--pm-k", type=float, help="fixed diffusion threshold")
    p.add_argument("--pm-k-factor", type=float, help="threshold as a fraction of the peak gradient")
    p.add_argument("--pm-iters", type=int)
    p.add_argument("--rel-tol", type=float, default=DEFAULT_BASELINE_TOL, help="baseline stopping tolerance")
    p.add_argument("--max-iters", type=int, help="baseline iteration cap")
    p.add_argument("--restriction", choices=["full_weighting", "block"], default="full_weighting")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("benchmark", help="sweep sigmas, methods and smoothers")
    p.add_argument("--images", default="shapes,texture", help="comma list of scene names or PNG paths")
    p.add_argument("--sigmas", default="0.7,0.8,0.9")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--smoothers", default="bicg,cgs,cr")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--traces", help="JSON residual traces (default: next to the CSV)")
    p.add_argument("--noise", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=128, help="synthetic scene size")
    _add_schedule_flags(p)
    p.add_argument("--baseline-budget", choices=["work", "tol"], default="work")
    p.add_argument("--rel-tol", type=float, default=DEFAULT_BASELINE_TOL)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("oracle", help="run the self-check suite")
    p.add_argument("--perturb-kernel", type=float, default=0.0, metavar="EPS", help="debug: scale the fast kernel by 1+EPS")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
