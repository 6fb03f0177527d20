"""Residual validation (whiteness, normality, noise energy) and PSNR/MSE metrics.

Normality uses the D'Agostino-Pearson K^2 omnibus statistic, built from the
D'Agostino (1970) skewness transform and the Anscombe-Glynn (1983) kurtosis
transform as given by D'Agostino, Belanger & D'Agostino (1990). With n
samples, m_j the biased central moments, b1 = m3 / m2^1.5, b2 = m4 / m2^2:

Skewness::

    Y      = b1 * sqrt((n+1)(n+3) / (6(n-2)))
    beta2  = 3(n^2 + 27n - 70)(n+1)(n+3) / ((n-2)(n+5)(n+7)(n+9))
    W^2    = -1 + sqrt(2(beta2 - 1))
    delta  = 1 / sqrt(ln W)
    alpha  = sqrt(2 / (W^2 - 1))
    Z1     = delta * asinh(Y / alpha)

Kurtosis::

    E      = 3(n-1) / (n+1)
    V      = 24n(n-2)(n-3) / ((n+1)^2 (n+3)(n+5))
    x      = (b2 - E) / sqrt(V)
    rb1    = 6(n^2 - 5n + 2) / ((n+7)(n+9)) * sqrt(6(n+3)(n+5) / (n(n-2)(n-3)))
    A      = 6 + (8 / rb1) * (2 / rb1 + sqrt(1 + 4 / rb1^2))
    q      = (1 - 2/A) / (1 + x sqrt(2 / (A-4)))
    Z2     = (1 - 2/(9A) - sign(q)|q|^(1/3)) / sqrt(2/(9A))

K^2 = Z1^2 + Z2^2 and p = exp(-K^2 / 2), the chi-square(2) survival function.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import PostsampleError, ShapeError, Signal


class StatsError(PostsampleError, ValueError):
    pass


class DegenerateResidualError(StatsError):
    pass


# Fixed evaluation order; ties in |rho| go to the earliest offset.
OFFSETS: tuple[tuple[int, int], ...] = (
    (0, 1), (1, 0), (1, 1), (1, -1),
    (0, -1), (-1, 0), (-1, -1), (-1, 1),
)


def _shifted_pairs(grid: np.ndarray, dy: int, dx: int):
    h, w = grid.shape[:2]
    ys, yd = slice(max(0, -dy), h - max(0, dy)), slice(max(0, dy), h - max(0, -dy))
    xs, xd = slice(max(0, -dx), w - max(0, dx)), slice(max(0, dx), w - max(0, -dx))
    return grid[ys, xs], grid[yd, xd]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if den == 0.0:
        raise DegenerateResidualError("zero variance in shifted residual pair")
    return float(np.dot(a, b)) / den


def neighbour_correlations(residual: Signal, valid: np.ndarray | None = None) -> dict[tuple[int, int], float]:
    """Pearson rho between the residual and each of its 8 one-pixel shifts.

    Pairs come from the overlap of the grid with its shifted copy (no
    wrap-around), pooled over channels. With ``valid`` (an (h, w) boolean
    array) only pairs whose two pixels are both valid are used.
    """
    if residual.height < 2 or residual.width < 2:
        raise StatsError("whiteness needs at least a 2x2 grid")
    grid = residual.grid()
    if valid is not None:
        valid = np.asarray(valid, dtype=bool).reshape(residual.height, residual.width)
    out = {}
    for dy, dx in OFFSETS:
        a, b = _shifted_pairs(grid, dy, dx)
        if valid is not None:
            va, vb = _shifted_pairs(valid, dy, dx)
            keep = va & vb
            a, b = a[keep], b[keep]
        a, b = a.ravel(), b.ravel()
        if a.size < 2:
            raise StatsError(f"no valid pixel pairs for offset {(dy, dx)}")
        out[(dy, dx)] = _pearson(a, b)
    return out


def whiteness_rho(residual: Signal, valid: np.ndarray | None = None) -> tuple[float, tuple[int, int]]:
    """Signed correlation with the largest magnitude over the 8 neighbour offsets."""
    rhos = neighbour_correlations(residual, valid)
    best = OFFSETS[0]
    for off in OFFSETS[1:]:
        if abs(rhos[off]) > abs(rhos[best]) + 1e-12:
            best = off
    return rhos[best], best


def _moments(x: np.ndarray) -> tuple[float, float, float]:
    c = x - x.mean()
    m2 = float(np.mean(c**2))
    if m2 == 0.0:
        raise DegenerateResidualError("zero-variance sample")
    return m2, float(np.mean(c**3)), float(np.mean(c**4))


def skew_z(x: np.ndarray) -> float:
    n = x.size
    m2, m3, _ = _moments(x)
    b1 = m3 / m2**1.5
    Y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = 3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3) / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9))
    W2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(W2))
    alpha = math.sqrt(2.0 / (W2 - 1.0))
    return delta * math.asinh(Y / alpha)


def kurtosis_z(x: np.ndarray) -> float:
    n = x.size
    m2, _, m4 = _moments(x)
    b2 = m4 / (m2 * m2)
    E = 3.0 * (n - 1) / (n + 1)
    V = 24.0 * n * (n - 2) * (n - 3) / ((n + 1.0) ** 2 * (n + 3) * (n + 5))
    xs = (b2 - E) / math.sqrt(V)
    rb1 = 6.0 * (n * n - 5 * n + 2) / ((n + 7.0) * (n + 9)) * math.sqrt(
        6.0 * (n + 3) * (n + 5) / (n * (n - 2.0) * (n - 3))
    )
    A = 6.0 + 8.0 / rb1 * (2.0 / rb1 + math.sqrt(1.0 + 4.0 / rb1**2))
    denom = 1.0 + xs * math.sqrt(2.0 / (A - 4.0))
    if denom == 0.0:
        return math.copysign(math.inf, xs)
    q = (1.0 - 2.0 / A) / denom
    cube = math.copysign(abs(q) ** (1.0 / 3.0), q)
    return (1.0 - 2.0 / (9.0 * A) - cube) / math.sqrt(2.0 / (9.0 * A))


MIN_NORMALITY_SAMPLES = 20


def dagostino_k2(x) -> tuple[float, float, float]:
    """(K^2, Z1, Z2) for a 1-D sample."""
    x = np.asarray(x.values if isinstance(x, Signal) else x, dtype=np.float64).ravel()
    if x.size < MIN_NORMALITY_SAMPLES:
        raise StatsError(f"normality test needs at least {MIN_NORMALITY_SAMPLES} samples, got {x.size}")
    z1 = skew_z(x)
    z2 = kurtosis_z(x)
    return z1 * z1 + z2 * z2, z1, z2


def k2_pvalue(k2: float) -> float:
    return math.exp(-0.5 * k2)


def normality_p(residual) -> float:
    return k2_pvalue(dagostino_k2(residual)[0])


@dataclass(frozen=True)
class Thresholds:
    rho_max: float = 0.05
    p_min: float = 0.05
    std_rel_tol: float = 0.05


CSV_SCHEMA_VERSION = 1
REPORT_FIELDS = (
    "max_abs_rho", "rho_dy", "rho_dx", "normality_p", "empirical_std",
    "sigma0", "white", "gaussian", "energy_ok", "passed",
)


@dataclass(frozen=True)
class ResidualReport:
    max_abs_rho: float
    rho_direction: tuple[int, int]
    normality_p: float
    empirical_std: float
    sigma0: float
    white: bool
    gaussian: bool
    energy_ok: bool

    @property
    def passed(self) -> bool:
        return self.white and self.gaussian and self.energy_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rho_direction"] = list(self.rho_direction)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_values(self) -> list[str]:
        return [
            f"{self.max_abs_rho:.6f}", str(self.rho_direction[0]), str(self.rho_direction[1]),
            f"{self.normality_p:.6f}", f"{self.empirical_std:.6f}", f"{self.sigma0:.6f}",
            str(int(self.white)), str(int(self.gaussian)), str(int(self.energy_ok)), str(int(self.passed)),
        ]

    def to_csv_row(self) -> str:
        return ",".join(self.csv_values())


def validate_residual(
    y: Signal,
    x_hat: Signal,
    sigma0: float,
    thresholds: Thresholds = Thresholds(),
    observed: np.ndarray | None = None,
) -> ResidualReport:
    """Test whether y - x_hat looks like white N(0, sigma0^2) noise.

    ``observed`` (boolean, one flag per pixel or per value) restricts the
    tests to observed entries; correlations then use only observed pairs.
    Raises DegenerateResidualError for a constant residual.
    """
    if y.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch {y.shape} vs {x_hat.shape}")
    if not sigma0 > 0:
        raise StatsError("sigma0 must be positive")
    residual = Signal(y.values - x_hat.values, y.shape)
    valid = None
    values = residual.values
    if observed is not None:
        flags = np.asarray(observed, dtype=bool).ravel()
        h, w, c = y.shape
        if flags.size == h * w * c:
            per_value = flags
            valid = flags.reshape(h, w, c).all(axis=2)
        elif flags.size == h * w:
            valid = flags.reshape(h, w)
            per_value = np.repeat(flags, c)
        else:
            raise ShapeError("observed mask does not match the signal grid")
        values = values[per_value]
    rho, direction = whiteness_rho(residual, valid)
    p = normality_p(values)
    std = float(np.std(values, ddof=1))
    return ResidualReport(
        max_abs_rho=rho,
        rho_direction=direction,
        normality_p=p,
        empirical_std=std,
        sigma0=float(sigma0),
        white=abs(rho) <= thresholds.rho_max,
        gaussian=p >= thresholds.p_min,
        energy_ok=abs(std - sigma0) / sigma0 <= thresholds.std_rel_tol,
    )


def validate_residual_per_channel(y: Signal, x_hat: Signal, sigma0: float, thresholds: Thresholds = Thresholds()):
    if y.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch {y.shape} vs {x_hat.shape}")
    h, w, c = y.shape
    yg, xg = y.grid(), x_hat.grid()
    return [
        validate_residual(Signal(yg[..., k], (h, w, 1)), Signal(xg[..., k], (h, w, 1)), sigma0, thresholds)
        for k in range(c)
    ]


def mse(a: Signal, b: Signal) -> float:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a.values - b.values
    return float(np.mean(d * d))


def psnr(reference: Signal, test: Signal, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) in dB; identical signals give ``math.inf``."""
    if not peak > 0:
        raise StatsError("peak must be positive")
    err = mse(reference, test)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def mse_ratio(reference: Signal, candidate: Signal, mmse_output: Signal) -> float:
    den = mse(mmse_output, reference)
    if den == 0.0:
        raise StatsError("MMSE output equals the reference; ratio undefined")
    return mse(candidate, reference) / den
