"""Post-processing: distance binning, the logistic loss-curve regression,
and sweep summary tables.

The regression is a Levenberg-Marquardt minimizer with the analytic
Jacobian of the two-parameter sigmoid loss(d) = 1/(1 + exp(p1 - p2*d)),
fitted to unbinned per-second samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

FIT_INIT_P1 = 8.0
FIT_INIT_P2 = 0.02
FIT_MAX_ITERATIONS = 200
FIT_REL_TOL = 1e-9


def read_run_csv(path: str) -> list[tuple[int, float, float]]:
    """Parse an engine per-second trace back into (second, dlr, goodput) rows."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"second", "dlr", "goodput_bits"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"run trace must have columns {sorted(required)}")
        for rec in reader:
            rows.append((int(rec["second"]), float(rec["dlr"]), float(rec["goodput_bits"])))
    return rows


@dataclass(frozen=True)
class FitResult:
    p1: float
    p2: float
    residual: float
    iterations: int
    converged: bool


def logistic_loss(p1: float, p2: float, d: float) -> float:
    """Loss model value at distance d: increases with distance, midpoint p1/p2."""
    x = p1 - p2 * d
    if x > 60.0:
        return math.exp(-x)
    return 1.0 / (1.0 + math.exp(x))


def _cost(p1: float, p2: float, pts: list[tuple[float, float]]) -> float:
    return math.fsum((logistic_loss(p1, p2, d) - y) ** 2 for d, y in pts)


def fit_logistic(points: list[tuple[float, float]]) -> FitResult:
    """Least-squares fit of (p1, p2) to (distance, dlr) samples.

    Returns converged=False for degenerate inputs: fewer than two distinct
    distances, or data the model can only explain with an unbounded p1
    (e.g. all-zero loss over the observed range).
    """
    pts = [(float(d), float(y)) for d, y in points]
    for d, y in pts:
        if not (0.0 <= y <= 1.0):
            raise ValueError(f"dlr sample {y!r} outside [0, 1]")
    distinct = len({d for d, _ in pts})
    p1, p2 = FIT_INIT_P1, FIT_INIT_P2
    if distinct < 2:
        return FitResult(p1, p2, _cost(p1, p2, pts) if pts else 0.0, 0, False)

    lam = 1e-3
    cost = _cost(p1, p2, pts)
    iterations = 0
    converged = False
    for _ in range(FIT_MAX_ITERATIONS):
        iterations += 1
        a11 = a12 = a22 = b1 = b2 = 0.0
        for d, y in pts:
            f = logistic_loss(p1, p2, d)
            s = f * (1.0 - f)
            g1 = -s          # df/dp1
            g2 = d * s       # df/dp2
            r = f - y
            a11 += g1 * g1
            a12 += g1 * g2
            a22 += g2 * g2
            b1 -= g1 * r
            b2 -= g2 * r
        if a11 <= 0.0 or a22 <= 0.0:
            break
        accepted = False
        while lam <= 1e12:
            m11 = a11 * (1.0 + lam)
            m22 = a22 * (1.0 + lam)
            det = m11 * m22 - a12 * a12
            if abs(det) < 1e-300:
                lam *= 10.0
                continue
            dp1 = (b1 * m22 - b2 * a12) / det
            dp2 = (b2 * m11 - b1 * a12) / det
            trial_cost = _cost(p1 + dp1, p2 + dp2, pts)
            if trial_cost <= cost:
                p1 += dp1
                p2 += dp2
                improvement = cost - trial_cost
                cost = trial_cost
                lam = max(lam * 0.1, 1e-12)
                accepted = True
                if improvement <= FIT_REL_TOL * max(cost, 1e-300):
                    converged = True
                break
            lam *= 10.0
        if not accepted or converged:
            break

    # A fitted curve that stays at zero over the whole observed range means
    # p1 is unbounded: flag the fit as non-identifiable.
    if converged and max(logistic_loss(p1, p2, d) for d, _ in pts) < 1e-6:
        converged = False
    return FitResult(p1=p1, p2=p2, residual=cost, iterations=iterations, converged=converged)


def bin_dlr_by_distance(
    samples: list[tuple[float, float]], bin_width: float = 20.0
) -> list[tuple[float, float, int]]:
    """Mean DLR per left-closed distance bin: (bin center, mean, count).

    Empty bins are omitted; the counts sum to the number of samples.
    """
    if bin_width <= 0.0:
        raise ValueError(f"bin_width {bin_width!r} not positive")
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for d, y in samples:
        k = int(math.floor(d / bin_width))
        sums[k] = sums.get(k, 0.0) + y
        counts[k] = counts.get(k, 0) + 1
    return [
        ((k + 0.5) * bin_width, sums[k] / counts[k], counts[k])
        for k in sorted(sums)
    ]


@dataclass(frozen=True)
class SweepRow:
    protocol: str
    hello_interval: float
    alpha: float
    beta: float | None
    gamma: float | None
    mean_outage_s: float
    mean_goodput_bps: float
    outage_vs_olsr: float | None


def sweep_table(results: list[dict]) -> list[SweepRow]:
    """Summary rows for a parameter sweep.

    Each input dict carries protocol, hello_interval, alpha, beta, gamma,
    mean_outage_s and mean_goodput_bps. P-OLSR rows gain the fractional
    outage reduction against the OLSR baseline with identical hello interval
    and alpha; a missing baseline raises ValueError.
    """
    baselines: dict[tuple[float, float], float] = {}
    for r in results:
        if r["protocol"] == "olsr":
            baselines[(r["hello_interval"], r["alpha"])] = r["mean_outage_s"]
    rows: list[SweepRow] = []
    for r in results:
        relative: float | None = None
        if r["protocol"] == "polsr":
            key = (r["hello_interval"], r["alpha"])
            if key not in baselines:
                raise ValueError(
                    f"no OLSR baseline for HI={key[0]}, alpha={key[1]} in sweep results"
                )
            base = baselines[key]
            if base > 0.0:
                relative = (base - r["mean_outage_s"]) / base
            elif r["mean_outage_s"] == 0.0:
                relative = 0.0
        rows.append(SweepRow(
            protocol=r["protocol"],
            hello_interval=r["hello_interval"],
            alpha=r["alpha"],
            beta=r.get("beta"),
            gamma=r.get("gamma"),
            mean_outage_s=r["mean_outage_s"],
            mean_goodput_bps=r["mean_goodput_bps"],
            outage_vs_olsr=relative,
        ))
    return rows


def write_sweep_csv(rows: list[SweepRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["protocol", "hello_interval_s", "alpha", "beta", "gamma",
                    "mean_outage_s", "mean_goodput_bps", "outage_reduction_vs_olsr"])
        for r in rows:
            w.writerow([
                r.protocol, r.hello_interval, r.alpha,
                "" if r.beta is None else r.beta,
                "" if r.gamma is None else r.gamma,
                f"{r.mean_outage_s:.2f}", f"{r.mean_goodput_bps:.1f}",
                "" if r.outage_vs_olsr is None else f"{r.outage_vs_olsr:.4f}",
            ])


def write_dlr_samples_csv(samples: list[tuple[float, float]], fit: FitResult | None,
                          path: str) -> None:
    """Scatter data for the loss-vs-distance figure, with the fitted curve."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["distance_m", "dlr", "fit_dlr"])
        for d, y in samples:
            fitted = "" if fit is None else f"{logistic_loss(fit.p1, fit.p2, d):.6f}"
            w.writerow([f"{d:.2f}", f"{y:.6f}", fitted])


def write_binned_dlr_csv(bins: list[tuple[float, float, int]], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center_m", "mean_dlr", "count"])
        for center, mean, count in bins:
            w.writerow([f"{center:.1f}", f"{mean:.6f}", count])
