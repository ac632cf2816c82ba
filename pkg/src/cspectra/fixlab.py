"""Fixed-point iteration experiments.

Maps: ``pi_sq(i)`` applies Pi_i twice, ``theta_sq(i)`` applies Theta_i twice
(both on S^2), and ``pgc_2d`` applies K -> (Pi Gamma K)^* on S^1. After every
application the body is rescaled and its degree-1 content removed, and a
TrajectoryRecord is emitted.
"""
from __future__ import annotations

import csv
import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .bodycalc import (
    BodySpec, SupportField, body_support, c2_proxy, centroid_body, certify_spectrum,
    project_spectrum, radial_from_support_2d, theta_spectrum, volume_i,
)
from .errors import CSpectraError, TrajectoryTruncated
from .grid import ScalarField, build_grid
from .harmonics import HarmonicSpectrum, analyze, evaluate, omega

ENERGY_DEGREES = (2, 4, 6, 8)
_MAP_RE = re.compile(r"^(pi_sq|theta_sq)\((\d+)\)$|^(pgc_2d)$")


@dataclass
class TrajectoryRecord:
    step: int
    scale: float
    c2_proxy: float
    l2: float
    e2: float
    e4: float
    e6: float
    e8: float
    ellipse_dist: float | None = None

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v is not None and not math.isfinite(v):
                raise ValueError(f"record field {name} is not finite")


@dataclass
class IterationConfig:
    map: str
    body: BodySpec
    steps: int = 20
    normalization: str = "mean_width"
    n: int = 3
    resolution: int = 48

    def __post_init__(self):
        m = _MAP_RE.match(self.map)
        if m is None:
            raise ValueError(f"unknown map {self.map!r}")
        if self.normalization not in ("mean_width", "volume"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if m.group(3):
            if self.n != 2:
                raise ValueError("pgc_2d requires n=2")
        else:
            if self.n != 3:
                raise ValueError(f"{m.group(1)} is run on S^2 (n=3)")
            if not 1 <= int(m.group(2)) <= self.n - 1:
                raise ValueError(f"i must lie in 1..{self.n - 1}")

    @property
    def kind(self) -> str:
        m = _MAP_RE.match(self.map)
        return m.group(1) or m.group(3)

    @property
    def i(self) -> int | None:
        m = _MAP_RE.match(self.map)
        return int(m.group(2)) if m.group(2) else None

    def to_dict(self) -> dict:
        return {"map": self.map, "body": self.body.to_dict(), "steps": self.steps,
                "normalization": self.normalization, "n": self.n,
                "resolution": self.resolution}

    @classmethod
    def from_dict(cls, d: dict) -> "IterationConfig":
        d = dict(d)
        d["body"] = BodySpec.from_dict(d["body"])
        return cls(**d)


# ---------------------------------------------------------------------------
# distances


def _normalized_deviation(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    c = spec.mean()
    if c <= 0.0:
        raise ValueError("mean of the support function must be positive")
    return spec.with_degrees(range(2, spec.L + 1)) * (1.0 / c)


def spectrum_ball_distance(spec: HarmonicSpectrum, grid) -> tuple[float, float]:
    d = _normalized_deviation(spec)
    return c2_proxy(d, grid), d.norm()


def ball_distance(f: SupportField) -> tuple[float, float]:
    """(C^2 proxy, L^2) distance to the nearest ball after scaling and centering.

    Scaling and centering follow the least-squares fit: the degree-0 and 1
    parts are removed and the remainder is divided by the mean.
    """
    return spectrum_ball_distance(f.spectrum, f.grid)


def second_moments_2d(rho: np.ndarray, angles: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Area-normalized second-moment matrix of a planar star body."""
    u = np.column_stack([np.cos(angles), np.sin(angles)])
    w = weights * rho ** 4 / 4.0
    M = (u * w[:, None]).T @ u
    area = float(np.sum(weights * rho ** 2 / 2.0))
    return M / area


def whiten_2d(f: SupportField) -> HarmonicSpectrum:
    """Spectrum of the support function of W K with W = M^{-1/2}."""
    grid = f.grid
    rho = radial_from_support_2d(f).values
    M = second_moments_2d(rho, grid.phi, grid.weights)
    evals, evecs = np.linalg.eigh(M)
    if evals[0] <= 1e-12 * evals[-1]:
        raise ValueError("degenerate second-moment matrix")
    W = (evecs / np.sqrt(evals)) @ evecs.T
    wu = grid.nodes @ W
    norm = np.linalg.norm(wu, axis=1)
    vals = norm * evaluate(f.spectrum, np.arctan2(wu[:, 1], wu[:, 0]))
    return analyze(ScalarField(grid, vals))


def ellipse_distance_2d(f: SupportField) -> float:
    """C^2 ball distance of the body after second-moment whitening."""
    if f.n != 2:
        raise ValueError("ellipse distance is defined on S^1")
    spec = f.spectrum
    if not spec.is_even(1e-10 * max(1.0, spec.norm())):
        raise ValueError("ellipse distance needs an origin-symmetric body")
    return spectrum_ball_distance(whiten_2d(f), f.grid)[0]


# ---------------------------------------------------------------------------
# maps


def pgc_step_2d(f: SupportField) -> SupportField:
    """(Pi Gamma K)^* on S^1, before any normalization."""
    if f.n != 2:
        raise ValueError("pgc_step_2d needs n=2")
    spec = f.spectrum
    if not spec.is_even(1e-10 * max(1.0, spec.norm())):
        raise ValueError("pgc_step_2d needs an origin-symmetric body")
    gamma = centroid_body(radial_from_support_2d(f))
    grid = f.grid
    proj = certify_spectrum(project_spectrum(gamma.spectrum, grid, 1), grid)
    h_next = 1.0 / radial_from_support_2d(proj).values
    return certify_spectrum(analyze(ScalarField(grid, h_next)), grid, require_positive=True)


def apply_map(cfg: IterationConfig, f: SupportField) -> SupportField:
    grid = f.grid
    if cfg.kind == "pgc_2d":
        return pgc_step_2d(f)
    spec = f.spectrum
    for _ in range(2):
        if cfg.kind == "pi_sq":
            spec = certify_spectrum(project_spectrum(spec, grid, cfg.i), grid).spectrum
        else:
            spec = certify_spectrum(theta_spectrum(spec, grid, cfg.i), grid).spectrum
    return certify_spectrum(spec, grid)


def normalize(f: SupportField, rule: str) -> tuple[SupportField, float]:
    """Rescale per ``rule`` and drop degree-1 content; returns (body, scale)."""
    spec = f.spectrum
    if rule == "mean_width":
        lam = 1.0 / spec.mean()
    else:
        n = f.n
        lam = (omega(n) / volume_i(f, n)) ** (1.0 / n)
    keep = [k for k in range(spec.L + 1) if k != 1]
    out = spec.with_degrees(keep) * lam
    return certify_spectrum(out, f.grid), lam


def _record(step: int, f: SupportField, scale: float, two_d: bool) -> TrajectoryRecord:
    c2, l2 = ball_distance(f)
    e = f.spectrum.energies()
    energies = [float(e[k]) if k < len(e) else 0.0 for k in ENERGY_DEGREES]
    ell = ellipse_distance_2d(f) if two_d else None
    return TrajectoryRecord(step, scale, c2, l2, *energies, ellipse_dist=ell)


def iterate(cfg: IterationConfig) -> list[TrajectoryRecord]:
    """Run ``cfg.steps`` applications; raises TrajectoryTruncated on certification loss."""
    grid = build_grid(cfg.n, cfg.resolution)
    f = body_support(cfg.body, grid)
    two_d = cfg.kind == "pgc_2d"
    records = []
    for step in range(1, cfg.steps + 1):
        try:
            f, scale = normalize(apply_map(cfg, f), cfg.normalization)
        except CSpectraError as exc:
            raise TrajectoryTruncated(f"step {step}: {exc}", records, step) from exc
        records.append(_record(step, f, scale, two_d))
    return records


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    return repr(float(v))


def write_trajectory_csv(records, path, two_d: bool | None = None) -> None:
    if two_d is None:
        two_d = bool(records) and records[0].ellipse_dist is not None
    header = ["step", "scale", "c2_proxy", "l2", "e2", "e4", "e6", "e8"]
    if two_d:
        header.append("ellipse_dist")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            row = [r.step] + [_fmt(getattr(r, h)) for h in header[1:]]
            w.writerow(row)


def read_trajectory_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def run_sweep(configs, out_dir, threads: int = 1) -> dict:
    """Run independent trajectories in parallel; outputs are merged by config index.

    Returns the manifest, which is also written to ``out_dir/manifest.json``.
    A truncated trajectory still writes its partial CSV and is flagged.
    """
    os.makedirs(out_dir, exist_ok=True)

    def run(idx_cfg):
        idx, cfg = idx_cfg
        path = os.path.join(out_dir, f"trajectory_{idx:03d}.csv")
        status, message = "ok", ""
        try:
            records = iterate(cfg)
        except TrajectoryTruncated as exc:
            records, status, message = exc.records, "truncated", str(exc)
        write_trajectory_csv(records, path, two_d=cfg.kind == "pgc_2d")
        return {"index": idx, "config": cfg.to_dict(), "output": os.path.basename(path),
                "rows": len(records), "status": status, "message": message}

    items = list(enumerate(configs))
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(run, items))
    else:
        entries = [run(it) for it in items]
    manifest = {"runs": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
