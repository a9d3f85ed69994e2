"""Fits of the success-fidelity frontier to S(delta) = S0 + S1 sqrt(delta) + S2 delta."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import InsufficientDataError

DEFAULT_DELTA_MAX = 0.1
MIN_POINTS = 6

# published three-term fits (S0, S1, S2) and S1/S0 ratios
PUBLISHED_FITS = {
    "cnot": (0.0740, 0.0765, 0.0199),
    "cs90": (0.05165, 0.08368, 0.23282),
    "b": (0.0071, 0.0308, 0.0129),
    "toffoli": (0.0039, 0.0089, 0.0258),
}
PUBLISHED_RATIOS = {"cnot": 1.03, "cs90": 1.62, "toffoli": 2.28, "b": 4.34}
# perfect-fidelity optima quoted independently of the fits
PUBLISHED_S0 = {"cnot": (2 / 27,), "cs90": (0.05165,), "b": (0.00717,), "toffoli": (0.0034, 0.0039)}
TABLE_ORDER = ("cnot", "cs90", "toffoli", "b")


@dataclass(frozen=True)
class FrontierFit:
    s0: float
    s1: float
    s2: float
    delta_max: float
    rms_residual: float
    n_points: int

    @property
    def ratio(self) -> float:
        return self.s1 / self.s0

    def predict(self, delta) -> np.ndarray:
        d = np.asarray(delta, dtype=float)
        return self.s0 + self.s1 * np.sqrt(d) + self.s2 * d

    def as_dict(self) -> dict:
        out = asdict(self)
        out["ratio"] = self.ratio
        return out


def fit_frontier(points: Iterable[tuple[float, float]], delta_max: float = DEFAULT_DELTA_MAX) -> FrontierFit:
    """Unweighted least squares on {1, sqrt(delta), delta} for points with delta <= delta_max."""
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if np.any(pts[:, 0] < 0):
        raise ValueError("delta must be non-negative")
    window = pts[pts[:, 0] <= delta_max]
    if len(np.unique(window[:, 0])) < MIN_POINTS:
        raise InsufficientDataError(
            f"need {MIN_POINTS} distinct deltas in (0, {delta_max:g}], found {len(np.unique(window[:, 0]))}"
        )
    d, s = window[:, 0], window[:, 1]
    design = np.column_stack([np.ones_like(d), np.sqrt(d), d])
    coef, *_ = np.linalg.lstsq(design, s, rcond=None)
    resid = s - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    if coef[0] <= 0:
        raise InsufficientDataError(f"fit gives non-positive S0 = {coef[0]:.3g} in window (0, {delta_max:g}]")
    return FrontierFit(float(coef[0]), float(coef[1]), float(coef[2]), float(delta_max), rms, len(d))


@dataclass(frozen=True)
class RatioRow:
    gate: str
    s0: float
    s1: float
    s2: float
    ratio: float
    reference_ratio: float | None
    relative_deviation: float | None
    reference_s0: tuple[float, ...]
    closest_s0: float | None


def ratio_report(fits: Mapping[str, FrontierFit]) -> list[RatioRow]:
    """Per-gate comparison of fitted coefficients with the published S1/S0 table."""
    order = [g for g in TABLE_ORDER if g in fits] + sorted(g for g in fits if g not in TABLE_ORDER)
    rows = []
    for gate in order:
        fit = fits[gate]
        ref = PUBLISHED_RATIOS.get(gate)
        anchors = PUBLISHED_S0.get(gate, ())
        closest = min(anchors, key=lambda a: abs(a - fit.s0)) if anchors else None
        rows.append(
            RatioRow(
                gate=gate,
                s0=fit.s0,
                s1=fit.s1,
                s2=fit.s2,
                ratio=fit.ratio,
                reference_ratio=ref,
                relative_deviation=None if ref is None else (fit.ratio - ref) / ref,
                reference_s0=anchors,
                closest_s0=closest,
            )
        )
    return rows


def ordering_holds(rows: list[RatioRow]) -> bool:
    """Fitted ratios increase in the order CNOT < CS90 < Toffoli < B."""
    by_gate = {r.gate: r.ratio for r in rows}
    seq = [by_gate[g] for g in TABLE_ORDER if g in by_gate]
    return all(a < b for a, b in zip(seq, seq[1:]))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, tuple):
        return "/".join(f"{v:.6g}" for v in x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


CSV_FIELDS = ["gate", "s0", "s1", "s2", "ratio", "reference_ratio", "relative_deviation", "reference_s0", "closest_s0"]


def report_csv(rows: list[RatioRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def report_text(rows: list[RatioRow]) -> str:
    lines = [f"{'gate':<8} {'S0':>9} {'S1':>9} {'S2':>9} {'S1/S0':>7} {'ref':>6} {'dev':>8}  S0 anchors"]
    for r in rows:
        dev = "" if r.relative_deviation is None else f"{100 * r.relative_deviation:+.1f}%"
        ref = "" if r.reference_ratio is None else f"{r.reference_ratio:.2f}"
        anchors = ", ".join(
            f"{a:.5g}{' *' if a == r.closest_s0 and len(r.reference_s0) > 1 else ''}" for a in r.reference_s0
        )
        lines.append(f"{r.gate:<8} {r.s0:9.5f} {r.s1:9.5f} {r.s2:9.5f} {r.ratio:7.3f} {ref:>6} {dev:>8}  {anchors}")
    if any(len(r.reference_s0) > 1 for r in rows):
        lines.append("(* marks the S0 anchor closest to the fitted S0)")
    if len(rows) > 1:
        lines.append(f"ratio ordering CNOT < CS90 < Toffoli < B: {'yes' if ordering_holds(rows) else 'no'}")
    return "\n".join(lines) + "\n"
