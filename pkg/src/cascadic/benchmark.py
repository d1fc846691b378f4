"""Benchmark sweep over images, blur widths, methods and smoothers.

Rows come out in sweep order (image, sigma, method, smoother) whatever the
completion order, and every number is written with ``repr`` so that parsing
the CSV back gives the same floats bit for bit.
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from .cascade import (
    DEFAULT_LEVELS,
    IterationSchedule,
    PmParams,
    baseline,
    ctmg,
    ectmg,
    equivalent_fine_iters,
)
from .degradation import NoiseSpec, degrade, gaussian_psf
from .imageio import read_png
from .krylov import SmootherKind
from .metrics import format_psnr, score
from .synthetic import SCENES, make_scene

log = logging.getLogger(__name__)

__all__ = ["CSV_COLUMNS", "METHODS", "BenchmarkConfig", "BenchmarkRow", "run_benchmark", "rows_to_csv", "parse_csv"]

CSV_COLUMNS = ("image", "sigma", "method", "smoother", "levels", "cpu_seconds", "psnr_db", "re", "iters_per_level")
METHODS = ("baseline", "ctmg", "ectmg")


@dataclass(frozen=True)
class BenchmarkConfig:
    """Sweep definition.

    ``images`` holds synthetic scene names or PNG paths. ``baseline_budget``
    picks how long the single-level solver runs: ``"work"`` gives it the
    finest-grid equivalent of the classic cascade's smoothing cost,
    ``"tol"`` runs it to ``baseline_rel_tol``.
    """

    images: Tuple[str, ...] = ("shapes", "texture")
    sigmas: Tuple[float, ...] = (0.7, 0.8, 0.9)
    methods: Tuple[str, ...] = METHODS
    smoothers: Tuple[str, ...] = ("bicg", "cgs", "cr")
    levels: int = DEFAULT_LEVELS
    noise: float = 0.001
    seed: int = 0
    pm: PmParams = PmParams()
    m_star: float = 1.0
    m0: float = 1.0
    beta: float = 4.0
    eps0: float = 0.5
    baseline_budget: str = "work"
    baseline_rel_tol: float = 1e-6
    size: int = 128

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        for s in self.smoothers:
            SmootherKind.parse(s)
        if self.baseline_budget not in ("work", "tol"):
            raise ValueError(f"baseline_budget must be 'work' or 'tol', got {self.baseline_budget!r}")
        if self.noise < 0:
            raise ValueError("noise amplitude must be non-negative")

    def classic(self):
        return IterationSchedule.classic(m_star=self.m_star)

    def economic(self):
        return IterationSchedule.economic(m_star=self.m_star, m0=self.m0, beta=self.beta, eps0=self.eps0)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "pm"}
        d["images"], d["sigmas"] = list(self.images), list(self.sigmas)
        d["methods"], d["smoothers"] = list(self.methods), list(self.smoothers)
        d["pm"] = {"tau": self.pm.tau, "k_threshold": self.pm.k_threshold, "iters": self.pm.iters, "k_factor": self.pm.k_factor}
        return d


@dataclass
class BenchmarkRow:
    image: str
    sigma: float
    method: str
    smoother: str
    levels: int
    cpu_seconds: float = math.nan
    psnr: float = math.nan
    re: float = math.nan
    iters_per_level: List[int] = field(default_factory=list)
    residual_histories: Optional[list] = field(default=None, repr=False)
    error: Optional[str] = None

    def csv_fields(self):
        return [
            self.image,
            repr(float(self.sigma)),
            self.method,
            self.smoother,
            str(self.levels),
            repr(float(self.cpu_seconds)),
            format_psnr(self.psnr),
            repr(float(self.re)),
            ";".join(str(m) for m in self.iters_per_level),
        ]


def load_reference(image_id, size=128):
    if image_id in SCENES:
        return make_scene(image_id, size, size)
    return read_png(image_id)


def _run_row(cfg, image_id, sigma, method, smoother):
    row = BenchmarkRow(image_id, sigma, method, smoother, cfg.levels if method != "baseline" else 1)
    try:
        F = load_reference(image_id, cfg.size)
        # one noise draw per (image, sigma), shared by every method and smoother
        G = degrade(F, gaussian_psf(sigma), NoiseSpec(cfg.noise, cfg.seed))
        if method == "baseline":
            if cfg.baseline_budget == "work":
                budget = equivalent_fine_iters(cfg.classic(), cfg.levels)
                rep = baseline(G, sigma, smoother, rel_tol=0.0, max_iters=budget, record_history=True)
            else:
                rep = baseline(G, sigma, smoother, rel_tol=cfg.baseline_rel_tol, record_history=True)
        elif method == "ctmg":
            rep = ctmg(G, sigma, cfg.levels, smoother, cfg.pm, cfg.classic(), record_history=True)
        else:
            rep = ectmg(G, sigma, cfg.levels, smoother, cfg.pm, cfg.economic(), record_history=True)
        q = score(F, rep.F)
        row.cpu_seconds, row.psnr, row.re = rep.cpu_seconds, q.psnr, q.re
        row.iters_per_level = list(rep.iters_per_level)
        row.residual_histories = rep.residual_histories
    except Exception as exc:  # recorded per row so the sweep keeps going
        log.warning("row %s/%s/%s/%s failed: %s", image_id, sigma, method, smoother, exc)
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _run_packed(args):
    return _run_row(*args)


def run_benchmark(cfg, jobs=1):
    """Run every (image, sigma, method, smoother) combination in sweep order."""
    tasks = [
        (cfg, image, float(sigma), method, smoother)
        for image in cfg.images
        for sigma in cfg.sigmas
        for method in cfg.methods
        for smoother in cfg.smoothers
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_packed, tasks))
    return [_run_packed(t) for t in tasks]


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def parse_csv(text):
    """Parse benchmark CSV text back into dicts of typed values."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append(
            {
                "image": rec["image"],
                "sigma": float(rec["sigma"]),
                "method": rec["method"],
                "smoother": rec["smoother"],
                "levels": int(rec["levels"]),
                "cpu_seconds": float(rec["cpu_seconds"]),
                "psnr_db": float(rec["psnr_db"]),
                "re": float(rec["re"]),
                "iters_per_level": [int(v) for v in rec["iters_per_level"].split(";") if v],
            }
        )
    return out


def traces_document(cfg, rows, version):
    """Per-row residual histories and failures, for plotting and debugging."""
    return {
        "version": version,
        "config": cfg.to_dict(),
        "rows": [
            {
                "image": r.image,
                "sigma": r.sigma,
                "method": r.method,
                "smoother": r.smoother,
                "iters_per_level": r.iters_per_level,
                "residual_histories": r.residual_histories,
                "error": r.error,
            }
            for r in rows
        ],
    }


def write_outputs(cfg, rows, csv_path, version, traces_path=None):
    Path(csv_path).write_text(rows_to_csv(rows))
    if traces_path is not None:
        Path(traces_path).write_text(json.dumps(traces_document(cfg, rows, version), indent=1))
