"""Computable evaluation metrics: motion accuracy against ground-truth flow,
last-frame similarity, and pixel fidelity.

The flow estimator is self-contained coarse-to-fine block matching: 3
pyramid levels, 16-px SAD windows centered per pixel (summed over RGB),
ties broken toward the smallest displacement, and a 3x3 median filter on
the final field to suppress isolated mismatches at occlusion boundaries.
It is deliberately simple and sits behind a plain function so a stronger
estimator can be swapped in.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import UndefinedMetricError
from .motion import FlowField

DEFAULT_TAU = 0.5  # px; ground-truth magnitude gate for the cosine average
PSNR_CAP = 100.0  # dB sentinel reported for identical inputs

FLOW_LEVELS = 3
FLOW_WINDOW = 16
FLOW_RADIUS = 4

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PEAK = 255.0


def _planes(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr[..., None]
    return arr


def _downsample2(image: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    even = image[: (h // 2) * 2, : (w // 2) * 2]
    return even.reshape(h // 2, 2, w // 2, 2, -1).mean(axis=(1, 3))


def _box_cost(diff: np.ndarray) -> np.ndarray:
    summed = diff.sum(axis=2)
    return ndimage.uniform_filter(summed, size=FLOW_WINDOW, mode="nearest")


def _refine_level(a: np.ndarray, b: np.ndarray, base: np.ndarray,
                  radius: int) -> np.ndarray:
    """Integer search of +-radius around the per-pixel base displacement.

    Each candidate is evaluated as a window-consistent global shift (the
    center pixel's total displacement applied to its whole window); mixing
    per-pixel bases inside one window would poison the cost near motion
    boundaries and lock in coarse-level errors. Cost maps are cached per
    unique total displacement, which the pyramid keeps small.
    """
    h, w = a.shape[:2]
    rr, cc = np.mgrid[0:h, 0:w]
    base_r = base[..., 0].astype(np.int64)
    base_c = base[..., 1].astype(np.int64)

    cache: dict[tuple[int, int], np.ndarray] = {}

    def costmap(vr: int, vc: int) -> np.ndarray:
        key = (vr, vc)
        cached = cache.get(key)
        if cached is None:
            sr = np.clip(rr + vr, 0, h - 1)
            sc = np.clip(cc + vc, 0, w - 1)
            cached = _box_cost(np.abs(a - b[sr, sc]))
            cache[key] = cached
        return cached

    best_cost = np.full((h, w), np.inf)
    best_mag = np.full((h, w), np.inf)
    best_dr = np.zeros((h, w))
    best_dc = np.zeros((h, w))
    uniques = np.unique(np.stack([base_r.ravel(), base_c.ravel()], axis=1), axis=0)
    for ur, uc in uniques:
        sel = (base_r == ur) & (base_c == uc)
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                tot_r, tot_c = int(ur + dr), int(uc + dc)
                cost = costmap(tot_r, tot_c)
                mag = tot_r * tot_r + tot_c * tot_c
                better = sel & (
                    (cost < best_cost)
                    | (
                        (cost == best_cost)
                        & (
                            (mag < best_mag)
                            | (
                                (mag == best_mag)
                                & ((tot_r < best_dr) | ((tot_r == best_dr) & (tot_c < best_dc)))
                            )
                        )
                    )
                )
                best_cost = np.where(better, cost, best_cost)
                best_mag = np.where(better, mag, best_mag)
                best_dr = np.where(better, tot_r, best_dr)
                best_dc = np.where(better, tot_c, best_dc)
    return np.stack([best_dr, best_dc], axis=-1)


def estimate_flow(frame_a: np.ndarray, frame_b: np.ndarray) -> FlowField:
    """Dense integer flow from ``frame_a`` to ``frame_b``."""
    a0 = _planes(frame_a)
    b0 = _planes(frame_b)
    if a0.shape != b0.shape:
        raise ValueError(f"frame shapes differ: {a0.shape} vs {b0.shape}")
    if min(a0.shape[:2]) < FLOW_WINDOW:
        raise ValueError(
            f"frames must be at least {FLOW_WINDOW}x{FLOW_WINDOW}, got {a0.shape[:2]}"
        )

    pyramid = [(a0, b0)]
    for _ in range(FLOW_LEVELS - 1):
        a_prev, b_prev = pyramid[-1]
        if min(a_prev.shape[:2]) // 2 < FLOW_WINDOW:
            break
        pyramid.append((_downsample2(a_prev), _downsample2(b_prev)))

    flow = np.zeros(pyramid[-1][0].shape[:2] + (2,))
    for level, (a, b) in enumerate(reversed(pyramid)):
        if level > 0:
            flow = np.repeat(np.repeat(flow, 2, axis=0), 2, axis=1)[: a.shape[0], : a.shape[1]] * 2.0
        flow = _refine_level(a, b, np.floor(flow + 0.5), FLOW_RADIUS)

    flow = np.stack(
        [ndimage.median_filter(flow[..., 0], size=3, mode="nearest"),
         ndimage.median_filter(flow[..., 1], size=3, mode="nearest")],
        axis=-1,
    )
    data = np.stack([flow[..., 1], flow[..., 0]], axis=-1)  # (dcol, drow)
    return FlowField(data=data, valid=np.ones(a0.shape[:2], dtype=bool))


def flow_cosine(estimated: FlowField, truth: FlowField, tau: float = DEFAULT_TAU) -> float:
    """Mean cosine similarity over pixels whose ground-truth magnitude passes tau.

    Pixels where the estimate is exactly zero count as cosine 0 (no
    direction to agree with). Raises when no pixel passes the gate.
    """
    gate = truth.valid & (truth.magnitude() >= tau)
    if not gate.any():
        raise UndefinedMetricError(
            f"no pixel has ground-truth flow magnitude >= {tau}; cosine undefined"
        )
    e = estimated.data[gate]
    g = truth.data[gate]
    e_norm = np.linalg.norm(e, axis=1)
    g_norm = np.linalg.norm(g, axis=1)
    dot = (e * g).sum(axis=1)
    cos = np.zeros(len(e))
    nz = e_norm > 0
    cos[nz] = dot[nz] / (e_norm[nz] * g_norm[nz])
    return float(cos.mean())


def optflow_score(video: np.ndarray, truth_flows: Sequence[FlowField],
                  tau: float = DEFAULT_TAU) -> float:
    """Motion-accuracy score of a candidate video against ground-truth flow.

    Estimates flow for every consecutive frame pair and averages the gated
    cosine similarity per pair, then over pairs. Pairs without any gated
    pixel are skipped; if every pair is empty the score is undefined.
    """
    video = np.asarray(video)
    if video.shape[0] != len(truth_flows) + 1:
        raise ValueError(
            f"video has {video.shape[0]} frames but {len(truth_flows)} flow fields given"
        )
    per_pair = []
    for t, truth in enumerate(truth_flows):
        if truth.data.shape[:2] != video.shape[1:3]:
            raise ValueError("flow field dimensions do not match video")
        estimated = estimate_flow(video[t], video[t + 1])
        try:
            per_pair.append(flow_cosine(estimated, truth, tau))
        except UndefinedMetricError:
            continue
    if not per_pair:
        raise UndefinedMetricError(
            f"no frame pair has ground-truth flow magnitude >= {tau}"
        )
    return float(np.mean(per_pair))


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def idiff(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-pixel Euclidean RGB distance, on the 0-255 scale."""
    a, b = _check_pair(a, b)
    return float(np.linalg.norm(a - b, axis=-1).mean())


def idiff_masked(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    """``idiff`` restricted to masked pixels; an empty mask yields 0 (flagged upstream)."""
    a, b = _check_pair(a, b)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {a.shape}")
    if not mask.any():
        return 0.0
    return float(np.linalg.norm(a[mask] - b[mask], axis=-1).mean())


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(PEAK * PEAK / mse)))


def _box_sums(x: np.ndarray, win: int) -> np.ndarray:
    c = np.cumsum(np.cumsum(x, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over all 8x8 windows, averaged across channels."""
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    h, w = a.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    n = SSIM_WINDOW * SSIM_WINDOW
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x = _box_sums(x, SSIM_WINDOW) / n
        mu_y = _box_sums(y, SSIM_WINDOW) / n
        var_x = _box_sums(x * x, SSIM_WINDOW) / n - mu_x * mu_x
        var_y = _box_sums(y * y, SSIM_WINDOW) / n - mu_y * mu_y
        cov = _box_sums(x * y, SSIM_WINDOW) / n - mu_x * mu_y
        score = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        )
        scores.append(score.mean())
    return float(np.mean(scores))


@dataclass
class MetricReport:
    """Per-sample metric scalars plus context needed to interpret them."""

    sample_id: str
    optflow: float | None
    idiff: float
    idiff_m: float
    idiff_m_empty_mask: bool
    psnr: float
    ssim: float
    tau: float
    frames: int
    width: int
    height: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "optflow": self.optflow,
            "idiff": self.idiff,
            "idiff_m": self.idiff_m,
            "idiff_m_empty_mask": self.idiff_m_empty_mask,
            "psnr": self.psnr,
            "ssim": self.ssim,
            "tau": self.tau,
            "frames": self.frames,
            "width": self.width,
            "height": self.height,
            "notes": self.notes,
        }


METRIC_COLUMNS = ("optflow", "idiff", "idiff_m", "psnr", "ssim")


def evaluate_sample(sample_id: str, video: np.ndarray,
                    truth_flows: Sequence[FlowField], edited_frame: np.ndarray,
                    last_mask: np.ndarray, tau: float = DEFAULT_TAU) -> MetricReport:
    """All metrics for one candidate video against its compiled ground truth."""
    notes = []
    try:
        score = optflow_score(video, truth_flows, tau)
    except UndefinedMetricError as exc:
        score = None
        notes.append(str(exc))
    last = video[-1]
    empty = not np.asarray(last_mask, dtype=bool).any()
    if empty:
        notes.append("disocclusion mask empty at the last frame; idiff_m reported as 0")
    return MetricReport(
        sample_id=sample_id,
        optflow=score,
        idiff=idiff(last, edited_frame),
        idiff_m=idiff_masked(last, edited_frame, last_mask),
        idiff_m_empty_mask=empty,
        psnr=psnr(last, edited_frame),
        ssim=ssim(last, edited_frame),
        tau=tau,
        frames=int(video.shape[0]),
        width=int(video.shape[2]),
        height=int(video.shape[1]),
        notes=notes,
    )


def write_reports(reports: Sequence[MetricReport], out_dir) -> Path:
    """One JSON per sample plus an aggregate CSV with a trailing mean row."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for report in reports:
        (out / f"{report.sample_id}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(("sample_id",) + METRIC_COLUMNS)
        for report in reports:
            row = report.to_dict()
            writer.writerow([report.sample_id] + [row[c] for c in METRIC_COLUMNS])
        if reports:
            means = []
            for c in METRIC_COLUMNS:
                values = [r.to_dict()[c] for r in reports if r.to_dict()[c] is not None]
                means.append(float(np.mean(values)) if values else None)
            writer.writerow(["mean"] + means)
    return csv_path
