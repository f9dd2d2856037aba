"""Parameter recovery from projections and delay scans.

* exponential fit of the low-KER ground-state tail, by weighted log-linear
  regression with Poisson weights (optional IRLS refinement);
* alpha/beta split of a band's KER projection;
* cosine fits at the fixed 2*omega beat frequency, plus a free-period fit;
* sideband (even-band) phases and the XUV chirp table derived from them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

log = logging.getLogger(__name__)

MIN_COUNTS = 5  # bins below this are excluded from Poisson-weighted fits


class InsufficientData(ValueError):
    """Too few usable bins for a fit."""


class RankDeficient(ValueError):
    """The design matrix of a linear fit is singular."""


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


@dataclass(frozen=True)
class ExponentialFit:
    amplitude: float
    decay: float  # reported as |a|, eV^-1
    covariance: np.ndarray = field(repr=False, compare=False)
    n_bins: int = 0
    n_excluded: int = 0

    def __call__(self, x):
        return self.amplitude * np.exp(-self.decay * np.asarray(x, dtype=float))

    @property
    def amplitude_error(self) -> float:
        return float(self.amplitude * np.sqrt(self.covariance[0, 0]))

    @property
    def decay_error(self) -> float:
        return float(np.sqrt(self.covariance[1, 1]))


def _wls(design, y, w):
    sw = np.sqrt(w)
    a = design * sw[:, None]
    b = y * sw
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    cov = np.linalg.pinv(a.T @ a)
    return coef, cov


def fit_exponential(x, counts, fit_range=(0.0, 0.35), *, min_count: float = MIN_COUNTS,
                    weighted: bool = True, refine: bool = False, max_iter: int = 20) -> ExponentialFit:
    """Fit ``A exp(-a x)`` to a histogram over ``fit_range``.

    The fit is linear in (ln A, a) on log counts; with ``weighted`` each bin
    gets the Poisson weight N (var ln N ~ 1/N).  ``refine`` repeats the
    regression with weights taken from the current model instead of the
    data, which removes the low-count bias of data weights.  Bins with
    fewer than ``min_count`` counts are dropped.
    """
    x = np.asarray(x, dtype=float)
    n = np.asarray(counts, dtype=float)
    in_range = (x >= fit_range[0]) & (x <= fit_range[1])
    good = in_range & (n >= max(min_count, np.finfo(float).tiny)) & (n > 0)
    n_excluded = int(np.count_nonzero(in_range & ~good))
    if n_excluded:
        log.warning("exponential fit: %d low-count bins excluded", n_excluded)
    if np.count_nonzero(good) < 4:
        raise InsufficientData(f"need >= 4 usable bins in {fit_range}, have {np.count_nonzero(good)}")
    xs, ns = x[good], n[good]
    design = np.column_stack([np.ones_like(xs), -xs])
    y = np.log(ns)
    w = ns if weighted else np.ones_like(ns)
    coef, cov = _wls(design, y, w)
    if refine:
        for _ in range(max_iter):
            model = np.exp(design @ coef)
            new, cov = _wls(design, y, model)
            done = np.allclose(new, coef, rtol=0, atol=1e-13)
            coef = new
            if done:
                break
    if not weighted:
        resid = y - design @ coef
        dof = max(len(y) - 2, 1)
        cov = cov * float(resid @ resid) / dof
    return ExponentialFit(float(np.exp(coef[0])), float(abs(coef[1])), cov, int(good.sum()), n_excluded)


@dataclass(frozen=True)
class AlphaBetaProfile:
    ker: np.ndarray
    alpha_sq: np.ndarray
    beta_sq: np.ndarray
    fit: ExponentialFit
    b1_sq: np.ndarray | None = None  # odd bands: |b1|^2 = |b2|^2 = beta_sq / 4

    def bump_center(self, level: float = 0.5) -> float:
        """Weighted centroid of beta_sq over its contiguous peak above ``level`` x max."""
        b = self.beta_sq
        if not np.any(b > 0):
            return float("nan")
        i = int(np.argmax(b))
        cut = level * b[i]
        lo, hi = i, i
        while lo > 0 and b[lo - 1] >= cut:
            lo -= 1
        while hi < len(b) - 1 and b[hi + 1] >= cut:
            hi += 1
        sl = slice(lo, hi + 1)
        return float(np.sum(self.ker[sl] * b[sl]) / np.sum(b[sl]))


def extract_alpha_beta(x, projection, fit: ExponentialFit, parity=None) -> AlphaBetaProfile:
    """alpha^2 from the exponential, beta^2 from the clamped remainder.

    For odd bands beta is the sum b1 + b2 with b1 = b2 assumed, so each
    path carries beta/2 in amplitude.
    """
    x = np.asarray(x, dtype=float)
    alpha = fit(x)
    beta = np.maximum(np.asarray(projection, dtype=float) - alpha, 0.0)
    b1 = None
    if parity is not None and str(getattr(parity, "value", parity)).lower() == "odd":
        b1 = beta / 4.0
    return AlphaBetaProfile(x, alpha, beta, fit, b1)


@dataclass(frozen=True)
class CosineFit:
    """value = offset + amplitude * cos(angular_frequency * tau + phase)."""

    offset: float
    amplitude: float
    phase: float
    angular_frequency: float
    residual_rms: float
    covariance: np.ndarray = field(repr=False, compare=False)  # of (offset, amplitude, phase)

    def __call__(self, tau):
        return self.offset + self.amplitude * np.cos(self.angular_frequency * np.asarray(tau) + self.phase)

    @property
    def phase_error(self) -> float:
        return float(np.sqrt(self.covariance[2, 2]))

    @property
    def amplitude_error(self) -> float:
        return float(np.sqrt(self.covariance[1, 1]))

    @property
    def period(self) -> float:
        return 2 * np.pi / self.angular_frequency

    def as_dict(self) -> dict:
        return {"offset": self.offset, "amplitude": self.amplitude, "phase": self.phase,
                "angular_frequency": self.angular_frequency, "residual_rms": self.residual_rms,
                "phase_error": self.phase_error, "amplitude_error": self.amplitude_error}


def _cosine_design(tau, angular_frequency):
    arg = angular_frequency * tau
    return np.column_stack([np.ones_like(tau), np.cos(arg), np.sin(arg)])


def fit_cosine(tau, values, omega: float, sigma=None, *, harmonic: int = 2) -> CosineFit:
    """Weighted linear least squares at the fixed frequency ``harmonic * omega``.

    Args:
        tau: delays, fs.
        values: samples.
        omega: IR angular frequency, rad/fs. The default beat is 2*omega.
        sigma: per-sample standard deviations; unit weights if omitted, in
            which case the covariance is scaled by the residual variance.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(values, dtype=float)
    ok = np.isfinite(y)
    if sigma is not None:
        s = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
        ok &= np.isfinite(s) & (s > 0)
    tau, y = tau[ok], y[ok]
    if len(tau) < 5:
        raise InsufficientData(f"cosine fit needs >= 5 samples, have {len(tau)}")
    w_freq = harmonic * omega
    design = _cosine_design(tau, w_freq)
    w = np.ones_like(y) if sigma is None else 1.0 / s[ok] ** 2
    a = design * np.sqrt(w)[:, None]
    if np.linalg.matrix_rank(a, tol=1e-9 * max(np.abs(a).max(), 1.0)) < 3:
        raise RankDeficient("delays do not resolve the cosine and sine terms")
    coef, cov = _wls(design, y, w)
    resid = y - design @ coef
    if sigma is None:
        dof = max(len(y) - 3, 1)
        cov = cov * float(resid @ resid) / dof
    c0, ca, sb = coef
    amp = float(np.hypot(ca, sb))
    phase = float(np.arctan2(-sb, ca)) if amp > 0 else 0.0
    # Jacobian of (offset, amplitude, phase) wrt (c0, ca, sb)
    jac = np.zeros((3, 3))
    jac[0, 0] = 1.0
    if amp > 0:
        jac[1, 1:] = [ca / amp, sb / amp]
        jac[2, 1:] = [sb / amp**2, -ca / amp**2]
    pcov = jac @ cov @ jac.T
    return CosineFit(float(c0), amp, wrap_phase(phase), w_freq,
                     float(np.sqrt(np.mean(resid**2))), pcov)


def fit_period(tau, values, *, period_range: tuple[float, float] | None = None,
               n_scan: int = 2000, n_harmonics: int = 1) -> CosineFit:
    """Fit a periodic signal with free fundamental frequency.

    A least-squares periodogram over ``period_range`` locates the peak,
    refined by bounded scalar minimisation of the residual.  With
    ``n_harmonics`` > 1 the model includes that many harmonics of the
    fundamental, which removes the bias a single cosine has on
    non-sinusoidal periodic data.  Returns the fundamental's CosineFit.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(values, dtype=float)
    span = tau.max() - tau.min()
    if period_range is None:
        dt = np.min(np.diff(np.unique(tau)))
        period_range = (2.5 * dt, span)
    f_lo, f_hi = 2 * np.pi / period_range[1], 2 * np.pi / period_range[0]

    def rss(w):
        d = np.column_stack([_cosine_design(tau, w)] + [_cosine_design(tau, k * w)[:, 1:]
                                                        for k in range(2, n_harmonics + 1)])
        coef, *_ = np.linalg.lstsq(d, y, rcond=None)
        r = y - d @ coef
        return float(r @ r)

    grid = np.linspace(f_lo, f_hi, n_scan)
    vals = np.array([rss(w) for w in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_scan - 1)]
    res = optimize.minimize_scalar(rss, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12 * f_hi})
    return fit_cosine(tau, y, res.x, harmonic=1)


@dataclass(frozen=True)
class ChirpTable:
    """Sideband oscillation phases and the chirp relative to the lowest band."""

    orders: tuple[int, ...]
    phases: dict
    relative: dict  # q -> Delta phi_q - Delta phi_lowest
    errors: dict
    fits: dict = field(default_factory=dict, compare=False, repr=False)

    def as_dict(self) -> dict:
        return {"orders": list(self.orders),
                "phases": {str(k): v for k, v in self.phases.items()},
                "relative_chirp": {str(k): v for k, v in self.relative.items()},
                "errors": {str(k): v for k, v in self.errors.items()}}


def sideband_chirp(tau, yields: dict, omega: float, sigmas: dict | None = None) -> ChirpTable:
    """Chirp steps from the 2*omega beat of even-band (sideband) yields.

    A sideband yield oscillates as cos(2 omega tau - Delta phi_q), so the
    fitted phase is -Delta phi_q up to a constant shared by all bands.

    Args:
        tau: delays, fs.
        yields: mapping order q -> yield per delay.
        omega: IR angular frequency, rad/fs.
        sigmas: optional per-delay uncertainties (default Poisson sqrt(N)).
    """
    if len(yields) < 2:
        raise InsufficientData("chirp retrieval needs at least two sidebands")
    orders = tuple(sorted(yields))
    fits, phases, errors = {}, {}, {}
    for q in orders:
        y = np.asarray(yields[q], dtype=float)
        s = None if sigmas is None else sigmas[q]
        if s is None and np.all(y >= 0) and np.any(y > 0):
            s = np.sqrt(np.maximum(y, 1.0))
        fit = fit_cosine(tau, y, omega, s)
        fits[q], phases[q], errors[q] = fit, fit.phase, fit.phase_error
    ref = orders[0]
    relative = {q: wrap_phase(-(phases[q] - phases[ref])) for q in orders}
    errs = {q: float(np.hypot(errors[q], errors[ref])) if q != ref else 0.0 for q in orders}
    return ChirpTable(orders, phases, relative, errs, fits)
