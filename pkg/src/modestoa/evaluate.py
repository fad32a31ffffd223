"""Two-receiver precision evaluation.

The two receivers share one antenna, so differencing their measured TOAs
per packet cancels the (unknown) true arrival time. What remains is the
compound clock error between the receivers, slowly varying, plus the
methods' measurement noise. A low-order polynomial, fitted by
order-recursive least squares on numerically conditioned time, absorbs the
clock term; the residuals' RMSE then estimates sqrt(2) times the
single-receiver TOA error standard deviation:

    sigma_toa = rmse(residuals) / sqrt(2)

Packets are classified L (weak: mean squared pulse height <= 0.04),
H (heavily clipped: >= 10 clipped pulses at both receivers), or M (the
rest); a packet qualifying as both L and H counts as L, where quantization
noise dominates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from .toa import ToaRecord

logger = logging.getLogger(__name__)

GAMMA_LOW_THRESHOLD = 0.04   # class L: mean gamma at or below this
BETA_HIGH_THRESHOLD = 10     # class H: at least this many clipped pulses at both receivers
CLASSES = ("L", "M", "H")
MATCH_WINDOW_SECONDS = 1e-3  # coarse-timestamp proximity for pairing
MIN_CLASS_COUNT = 10


@dataclass(frozen=True)
class PairedMeasurement:
    """One packet measured at both receivers by one method."""

    packet_index: int
    t1: float
    t2: float
    gamma_mean: float
    beta_min: int

    @property
    def delta(self) -> float:
        return self.t2 - self.t1

    @property
    def klass(self) -> str:
        if self.gamma_mean <= GAMMA_LOW_THRESHOLD:
            return "L"
        if self.beta_min >= BETA_HIGH_THRESHOLD:
            return "H"
        return "M"


@dataclass
class PairingStats:
    paired: int = 0
    unmatched: int = 0
    ambiguous: int = 0


def pair_packets(records_rx1: list[ToaRecord], records_rx2: list[ToaRecord],
                 stats_out: PairingStats | None = None) -> list[PairedMeasurement]:
    """Match one method's records across receivers by payload and coarse time.

    Packets decoded at only one receiver are dropped and counted; a payload
    with two coarse-time candidates inside the match window is ambiguous
    and both sides are dropped.
    """
    st = stats_out if stats_out is not None else PairingStats()
    by_payload: dict[str, list[ToaRecord]] = {}
    for r in records_rx2:
        by_payload.setdefault(r.payload_hex, []).append(r)
    used: set[int] = set()
    pairs: list[PairedMeasurement] = []
    for r1 in records_rx1:
        candidates = [
            r2 for r2 in by_payload.get(r1.payload_hex, ())
            if abs(r2.coarse_timestamp_s - r1.coarse_timestamp_s) <= MATCH_WINDOW_SECONDS
            and id(r2) not in used
        ]
        if len(candidates) == 1:
            r2 = candidates[0]
            used.add(id(r2))
            pairs.append(PairedMeasurement(
                packet_index=r1.packet_index,
                t1=r1.toa_s,
                t2=r2.toa_s,
                gamma_mean=(r1.gamma + r2.gamma) / 2.0,
                beta_min=min(r1.beta, r2.beta),
            ))
            st.paired += 1
        elif len(candidates) > 1:
            st.ambiguous += 1
        else:
            st.unmatched += 1
    st.unmatched += sum(1 for r2s in by_payload.values() for r2 in r2s if id(r2) not in used)
    if st.ambiguous:
        logger.info("pairing: %d ambiguous matches dropped", st.ambiguous)
    return pairs


class ClockPolynomialFit(BaseEstimator):
    """Order-recursive least-squares polynomial fit of the compound clock error.

    Fits polynomials of increasing order on time centered and scaled to
    [-1, 1] (raw epoch times make the normal equations ill-conditioned) and
    keeps the smallest order at which adding the next term improves the
    residual variance by less than `min_improvement` (relative).

    Parameters
    ----------
    max_order : int, default=5
    min_improvement : float, default=0.01

    Attributes
    ----------
    order_ : selected polynomial order
    coef_ : coefficients in plain powers of t (seconds), low order first
    residuals_ : delta minus the fitted clock error
    rss_by_order_ : residual sum of squares for each tried order
    """

    def __init__(self, max_order: int = 5, min_improvement: float = 0.01):
        self.max_order = max_order
        self.min_improvement = min_improvement

    def fit(self, times, deltas):
        times = np.asarray(times, dtype=np.float64)
        deltas = np.asarray(deltas, dtype=np.float64)
        if len(times) != len(deltas) or len(times) < 50:
            raise ValueError("need at least 50 paired measurements")
        span = times.max() - times.min()
        if span < 10.0:
            raise ValueError(f"pairs span {span:.3f} s; need at least 10 s for a stable fit")
        mid = (times.max() + times.min()) / 2.0
        half = span / 2.0
        tau = (times - mid) / half

        fits = []
        rss = []
        for order in range(self.max_order + 1):
            coef = np.polynomial.polynomial.polyfit(tau, deltas, order)
            resid = deltas - np.polynomial.polynomial.polyval(tau, coef)
            fits.append(coef)
            rss.append(float(resid @ resid))
        chosen = self.max_order
        for k in range(self.max_order):
            if rss[k] == 0.0 or (rss[k] - rss[k + 1]) < self.min_improvement * rss[k]:
                chosen = k
                break

        self.order_ = chosen
        self.rss_by_order_ = tuple(rss)
        self._mid = mid
        self._half = half
        self._coef_tau = fits[chosen]
        # express in plain powers of t for reporting / recovery tests
        poly = np.polynomial.Polynomial(self._coef_tau, domain=[mid - half, mid + half],
                                        window=[-1.0, 1.0])
        self.coef_ = poly.convert().coef
        self.residuals_ = deltas - self.predict(times)
        return self

    def predict(self, times):
        times = np.asarray(times, dtype=np.float64)
        tau = (times - self._mid) / self._half
        return np.polynomial.polynomial.polyval(tau, self._coef_tau)


def fit_clock(pairs: list[PairedMeasurement], times: np.ndarray | None = None,
              max_order: int = 5) -> ClockPolynomialFit:
    """Fit the compound clock error over paired measurements.

    `times` defaults to the rx1 TOAs (any slowly-varying time base works).
    """
    t = np.asarray([p.t1 for p in pairs]) if times is None else np.asarray(times)
    d = np.asarray([p.delta for p in pairs])
    return ClockPolynomialFit(max_order=max_order).fit(t, d)


@dataclass(frozen=True)
class ReportRow:
    method: str
    n: int
    klass: str          # "all", "L", "M" or "H"
    count: int
    rmse_ns: float
    sigma_ns: float
    low_count: bool = False


@dataclass
class EvalReport:
    """Per-class precision rows plus the residual vectors behind them."""

    method: str
    n: int
    rows: list[ReportRow]
    residuals: dict[str, np.ndarray]
    fit: ClockPolynomialFit

    def row(self, klass: str) -> ReportRow:
        for r in self.rows:
            if r.klass == klass:
                return r
        raise KeyError(klass)

    def sigma_ns(self, klass: str = "all") -> float:
        return self.row(klass).sigma_ns


def residuals_and_sigma(pairs: list[PairedMeasurement], fit: ClockPolynomialFit,
                        method: str = "", n: int = 0) -> EvalReport:
    """Remove the fitted clock error and report RMSE and sigma per class."""
    t = np.asarray([p.t1 for p in pairs])
    delta = np.asarray([p.delta for p in pairs])
    resid = delta - fit.predict(t)
    klass = np.asarray([p.klass for p in pairs])

    rows = []
    residuals = {}
    for label in ("all",) + CLASSES:
        sel = np.ones(len(resid), dtype=bool) if label == "all" else klass == label
        r = resid[sel]
        residuals[label] = r
        if len(r) == 0:
            rows.append(ReportRow(method, n, label, 0, math.nan, math.nan, low_count=True))
            continue
        rmse = float(np.sqrt(np.mean(r**2)))
        rows.append(ReportRow(
            method, n, label, int(len(r)),
            rmse_ns=rmse * 1e9,
            sigma_ns=rmse / math.sqrt(2.0) * 1e9,
            low_count=len(r) < MIN_CLASS_COUNT,
        ))
    return EvalReport(method, n, rows, residuals, fit)


@dataclass(frozen=True)
class DistributionStats:
    """ECDF, normal Q-Q points, and a Kolmogorov-Smirnov normality score."""

    ecdf_x: np.ndarray
    ecdf_p: np.ndarray
    qq_theoretical: np.ndarray
    qq_empirical: np.ndarray
    ks_statistic: float
    mean: float
    std: float


def distribution_stats(residuals) -> DistributionStats:
    """Distribution summaries of a residual set against its fitted normal."""
    r = np.sort(np.asarray(residuals, dtype=np.float64))
    n = len(r)
    if n < 30:
        raise ValueError(f"need at least 30 residuals, got {n}")
    mean = float(r.mean())
    std = float(r.std(ddof=1))
    ecdf_p = np.arange(1, n + 1) / n
    probs = (np.arange(1, n + 1) - 0.5) / n
    qq_theoretical = mean + std * stats.norm.ppf(probs)
    cdf = stats.norm.cdf(r, loc=mean, scale=std)
    ks = float(np.max(np.maximum(np.abs(ecdf_p - cdf), np.abs(ecdf_p - 1.0 / n - cdf))))
    return DistributionStats(r, ecdf_p, qq_theoretical, r.copy(), ks, mean, std)


def evaluate_method(records_rx1: list[ToaRecord], records_rx2: list[ToaRecord],
                    method: str, n: int, max_order: int = 5) -> EvalReport:
    """Pair, de-trend and summarize one (method, N) record group."""
    sel1 = [r for r in records_rx1 if r.method == method and r.n == n]
    sel2 = [r for r in records_rx2 if r.method == method and r.n == n]
    pairs = pair_packets(sel1, sel2)
    fit = fit_clock(pairs, max_order=max_order)
    return residuals_and_sigma(pairs, fit, method=method, n=n)
