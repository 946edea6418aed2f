"""Receiver-signal processing: downconversion, filtering, decimation, diagnostics.

The homodyne difference current is mixed down with a real carrier,
low-pass filtered with a linear-phase FIR filter and decimated to the
measurement rate. The filter transient (``taps - 1`` samples) is dropped.

Two filter responses are offered. ``"sinc"`` is a windowed-sinc design.
``"root_nyquist"`` is a windowed root-raised-cosine whose squared response
is Nyquist at ``2 * cutoff``, so that white input noise decimated to
``2 * cutoff`` comes out uncorrelated; a plain windowed sinc leaves a
residual correlation of a few percent at those lags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import signal, stats

from .errors import (
    InsufficientDataError,
    InvalidParameterError,
    NoLinearRegionError,
)
from .seeding import SeedLike, rng_from_seed

CAPTURE_RATE = 5e9
MEASUREMENT_RATE = 1.25e9
CARRIER = 1.055e9
CUTOFF = 625e6


@dataclass(frozen=True, eq=False)
class SignalStream:
    """Real samples at a fixed rate.

    Attributes
    ----------
    samples : ndarray of float64
    sample_rate : float
        In Hz.
    origin : dict
        Provenance, e.g. ``{"kind": "simulated", ...}``; processing stages
        append themselves to ``origin["stages"]``.
    """

    samples: np.ndarray
    sample_rate: float
    origin: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise InvalidParameterError("samples must be one-dimensional")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise InvalidParameterError("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise InvalidParameterError("samples must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return int(self.samples.size)

    def derive(self, samples, sample_rate: Optional[float] = None, **stage) -> "SignalStream":
        origin = dict(self.origin)
        origin["stages"] = list(origin.get("stages", [])) + [stage]
        rate = self.sample_rate if sample_rate is None else sample_rate
        return SignalStream(samples, rate, origin)


def downmix(stream: SignalStream, f0: float, amplitude: float = 1.0) -> SignalStream:
    """Multiply by ``amplitude * cos(2 pi f0 t)``."""
    if not 0 < f0 < stream.sample_rate / 2:
        raise InvalidParameterError(
            f"carrier {f0:g} Hz outside (0, {stream.sample_rate / 2:g}) Hz"
        )
    t = np.arange(len(stream)) / stream.sample_rate
    carrier = amplitude * np.cos(2 * np.pi * f0 * t)
    return stream.derive(stream.samples * carrier, stage="downmix", f0=f0)


def _root_raised_cosine(taps: int, rolloff: float, ratio: float) -> np.ndarray:
    # ratio = sample_rate / symbol_rate, symbol_rate = 2 * cutoff
    x = (np.arange(taps) - (taps - 1) / 2) / ratio
    b = rolloff
    h = np.empty(taps)
    for i, xi in enumerate(x):
        if abs(xi) < 1e-12:
            h[i] = 1 - b + 4 * b / np.pi
        elif abs(abs(xi) - 1 / (4 * b)) < 1e-9:
            h[i] = b / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                                     + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
        else:
            h[i] = (np.sin(np.pi * xi * (1 - b)) + 4 * b * xi * np.cos(np.pi * xi * (1 + b))) / (
                np.pi * xi * (1 - (4 * b * xi) ** 2))
    return h


def design_lowpass(
    cutoff: float,
    sample_rate: float,
    taps: int = 129,
    response: str = "sinc",
    window=("kaiser", 6.0),
    rolloff: float = 0.1,
) -> np.ndarray:
    """Symmetric FIR coefficients with unit DC gain.

    Parameters
    ----------
    cutoff : float
        -6 dB edge for ``"sinc"``, Nyquist frequency of the decimated
        stream for ``"root_nyquist"``.
    taps : int
        Odd, at least 3.
    response : {"sinc", "root_nyquist"}
    window
        Any window accepted by :func:`scipy.signal.get_window`.
    rolloff : float
        Excess bandwidth of the root-Nyquist response.
    """
    if taps < 3 or taps % 2 == 0:
        raise InvalidParameterError(f"taps must be odd and >= 3, got {taps}")
    if not 0 < cutoff < sample_rate / 2:
        raise InvalidParameterError(f"cutoff {cutoff:g} Hz outside (0, fs/2)")
    if response == "sinc":
        h = signal.firwin(taps, cutoff, fs=sample_rate, window=window)
    elif response == "root_nyquist":
        if not 0 < rolloff < 1 or cutoff * (1 + rolloff) >= sample_rate / 2:
            raise InvalidParameterError("rolloff must lie in (0, 1) with the band below fs/2")
        h = _root_raised_cosine(taps, rolloff, sample_rate / (2 * cutoff))
        h *= signal.get_window(window, taps, fftbins=False)
    else:
        raise InvalidParameterError(f"unknown response {response!r}")
    return h / h.sum()


def fir_lowpass(
    stream: SignalStream,
    cutoff: float,
    taps: int = 129,
    *,
    response: str = "sinc",
    window=("kaiser", 6.0),
    rolloff: float = 0.1,
) -> SignalStream:
    """Linear-phase FIR low-pass; the first ``taps - 1`` outputs are discarded."""
    h = design_lowpass(cutoff, stream.sample_rate, taps, response, window, rolloff)
    if len(stream) < taps:
        raise InsufficientDataError(f"stream shorter than the filter ({taps} taps)")
    y = signal.oaconvolve(stream.samples, h, mode="valid")
    return stream.derive(y, stage="fir_lowpass", cutoff=cutoff, taps=taps, response=response)


def downsample(stream: SignalStream, factor: int) -> SignalStream:
    """Keep every ``factor``-th sample."""
    if int(factor) != factor or factor < 1:
        raise InvalidParameterError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return stream
    return stream.derive(stream.samples[::factor], stream.sample_rate / factor,
                         stage="downsample", factor=factor)


def downconvert(
    stream: SignalStream,
    f0: Optional[float] = CARRIER,
    cutoff: float = CUTOFF,
    factor: int = 4,
    taps: int = 513,
    response: str = "root_nyquist",
) -> SignalStream:
    """Downmix (skipped when ``f0`` is None), low-pass and decimate."""
    if f0 is not None:
        stream = downmix(stream, f0)
    stream = fir_lowpass(stream, cutoff, taps, response=response)
    return downsample(stream, factor)


def autocorrelation(stream, max_lag: int) -> np.ndarray:
    """Normalised autocorrelation ``rho_k`` for ``k = 0 .. max_lag``.

    Uses the biased estimator ``sum_t x_t x_{t+k} / sum_t x_t**2`` on the
    mean-removed samples.
    """
    x = stream.samples if isinstance(stream, SignalStream) else np.asarray(stream, dtype=float)
    if max_lag < 0:
        raise InvalidParameterError("max_lag must be >= 0")
    if x.size <= 10 * max_lag or x.size < 2:
        raise InsufficientDataError(f"need more than {10 * max_lag} samples, got {x.size}")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0:
        raise InsufficientDataError("constant stream has no autocorrelation")
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for k in range(1, max_lag + 1):
        rho[k] = np.dot(x[:-k], x[k:]) / denom
    return rho


def filter_autocorrelation(h, max_lag: int, step: int = 1) -> np.ndarray:
    """Autocorrelation of white noise passed through ``h``, at lags ``0, step, ...``."""
    h = np.asarray(h, dtype=float)
    full = np.correlate(h, h, mode="full")[h.size - 1:]
    full = full / full[0]
    lags = np.arange(max_lag + 1) * step
    out = np.zeros(max_lag + 1)
    inside = lags < full.size
    out[inside] = full[lags[inside]]
    return out


def simulate_receiver_signal(
    n: int,
    *,
    sample_rate: float = CAPTURE_RATE,
    quantum_variance: float = 0.5,
    noise_variance: float = 0.0,
    band: Optional[Tuple[float, float]] = None,
    seed: SeedLike = 0,
) -> SignalStream:
    """Gaussian receiver output with classical noise added in variance.

    Parameters
    ----------
    n : int
        Number of samples.
    quantum_variance, noise_variance : float
        Total sample variance is their sum.
    band : (f_low, f_high), optional
        Confine the noise to this band with an ideal (FFT) filter. ``f_low=0``
        gives baseband noise.
    seed : int, bytes or str
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if quantum_variance < 0 or noise_variance < 0 or quantum_variance + noise_variance <= 0:
        raise InvalidParameterError("variances must be non-negative with a positive sum")
    rng = rng_from_seed(seed)
    total = quantum_variance + noise_variance
    x = rng.standard_normal(int(n))
    if band is not None:
        lo, hi = band
        if not 0 <= lo < hi <= sample_rate / 2:
            raise InvalidParameterError("band must satisfy 0 <= f_low < f_high <= fs/2")
        spec = np.fft.rfft(x)
        f = np.fft.rfftfreq(x.size, 1 / sample_rate)
        spec[(f < lo) | (f > hi)] = 0
        x = np.fft.irfft(spec, n=x.size)
        x /= x.std()
    origin = {
        "kind": "simulated",
        "quantum_variance": quantum_variance,
        "noise_variance": noise_variance,
        "band": None if band is None else list(band),
        "seed": seed if isinstance(seed, (int, str)) else bytes(seed).hex(),
    }
    return SignalStream(x * math.sqrt(total), sample_rate, origin)


@dataclass(frozen=True)
class CalibrationFit:
    """Shot-noise calibration line ``variance = intercept + slope * power``.

    ``linear_range`` spans the powers used in the fit; points above it
    deviate by more than the saturation threshold.
    """

    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    linear_range: Tuple[float, float]
    saturation_detected: bool
    n_linear: int
    residual_spread: float

    def confidence_interval(self, which: str = "slope", level: float = 0.95) -> Tuple[float, float]:
        value, err = {
            "slope": (self.slope, self.slope_stderr),
            "intercept": (self.intercept, self.intercept_stderr),
        }[which]
        dof = max(self.n_linear - 2, 1)
        q = stats.t.ppf(0.5 + level / 2, dof)
        return value - q * err, value + q * err

    @property
    def noise_floor(self) -> float:
        return self.intercept


def _line(p, v):
    if np.ptp(p) == 0:
        raise NoLinearRegionError("powers must not all coincide")
    fit = stats.linregress(p, v)
    resid = v - (fit.intercept + fit.slope * p)
    dof = max(p.size - 2, 1)
    spread = math.sqrt(float(resid @ resid) / dof)
    return fit, spread


def _local_noise(p, v) -> float:
    """Robust noise level from each point's deviation from its neighbours' chord.

    A kink in otherwise linear data affects only the triples around it, so
    the median absolute deviation is insensitive to the saturation onset.
    """
    if p.size < 5:
        return 0.0
    p0, p1, p2 = p[:-2], p[1:-1], p[2:]
    width = p2 - p0
    ok = width > 0
    a = np.where(ok, (p2 - p1) / np.where(ok, width, 1), 0.5)
    r = v[1:-1] - (a * v[:-2] + (1 - a) * v[2:])
    scale = np.sqrt(1 + a * a + (1 - a) ** 2)
    z = (r / scale)[ok]
    return float(1.4826 * np.median(np.abs(z - np.median(z)))) if z.size else 0.0


def shot_noise_calibration(
    points: Sequence[Tuple[float, float]],
    threshold: float = 3.0,
    min_points: int = 5,
    confirm: int = 2,
) -> CalibrationFit:
    """Fit the linear variance-vs-power region and flag saturation.

    The region grows from the lowest powers. A point joins it while its
    deviation from the current line stays within ``threshold`` times the
    region's residual spread. The first run of ``confirm`` consecutive points
    beyond that ends the linear region and marks the data as saturated.

    Parameters
    ----------
    points : sequence of (power, variance)
        Powers in W, variances in V**2.
    threshold : float
    min_points : int
        Size of the initial region (at least 3).
    confirm : int
        Consecutive exceedances needed to declare saturation.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParameterError("points must be (power, variance) pairs")
    if arr.shape[0] < 3:
        raise InsufficientDataError(f"need at least 3 points, got {arr.shape[0]}")
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    p, v = arr[:, 0], arr[:, 1]
    n0 = min(max(3, min_points), p.size)
    fit, spread = _line(p[:n0], v[:n0])
    if not fit.slope > 0:
        raise NoLinearRegionError("no region with positive slope at the lowest powers")
    # scale-aware floor so that noiseless data is not flagged by rounding
    floor = max(1e-9 * float(np.abs(v).max()), _local_noise(p, v))
    end = n0
    while end < p.size:
        limit = threshold * max(spread, floor)
        ahead = v[end:end + confirm] - (fit.intercept + fit.slope * p[end:end + confirm])
        # saturation is persistent; a lone outlier followed by a good point is kept
        if np.all(np.abs(ahead) > limit):
            break
        end += 1
        fit, spread = _line(p[:end], v[:end])
    if not fit.slope > 0:
        raise NoLinearRegionError("fitted slope is not positive")
    return CalibrationFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        slope_stderr=float(fit.stderr),
        intercept_stderr=float(fit.intercept_stderr),
        linear_range=(float(p[0]), float(p[end - 1])),
        saturation_detected=bool(end < p.size),
        n_linear=int(end),
        residual_spread=float(spread),
    )


def synthetic_calibration(
    powers,
    slope: float = 0.0108,
    intercept: float = 2.579e-5,
    saturation_power: Optional[float] = 7e-3,
    compression: float = 0.2,
    noise: float = 0.0,
    seed: SeedLike = 0,
) -> np.ndarray:
    """Variance-vs-power points with optional roll-off above ``saturation_power``.

    Above the roll-off point the slope drops to ``compression * slope``.
    """
    p = np.asarray(powers, dtype=float)
    eff = p.copy()
    if saturation_power is not None:
        over = p > saturation_power
        eff[over] = saturation_power + compression * (p[over] - saturation_power)
    v = intercept + slope * eff
    if noise > 0:
        v = v + rng_from_seed(seed).normal(0.0, noise, size=p.size)
    return np.column_stack([p, v])
