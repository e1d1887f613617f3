"""Ergodic spectral efficiency of the combined link.

The instantaneous SINR is modeled as the ratio |x_s|^2 / |x_i|^2 of a
complex Gaussian signal term x_s ~ CN(mu_s, sigma_s2) to an independent
zero-mean complex Gaussian interference-plus-noise term
x_i ~ CN(0, sigma_i2). Everything here is parameterized by

    k_s     = |mu_s| / sigma_s       (deterministic-to-diffuse signal ratio)
    c_sigma = sigma_s2 / sigma_i2    (signal-to-interference variance ratio)

which this module derives from precoders and a symbol constellation,
turns into a density/CDF for the SINR, and integrates against log2(1+eta)
both in closed form and by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .channel import RicianFactor

EULER_GAMMA = 0.5772156649015329

LOG2E = 1.0 / math.log(2.0)

# exp overflows just above 709; beyond this the scaled form takes over
_EI_DIRECT_LIMIT = 700.0


# ---------------------------------------------------------------------------
# exponential integral
# ---------------------------------------------------------------------------

def ei(x: float) -> float:
    """Exponential integral Ei(x), principal value for x > 0.

    Power series for small arguments, a continued fraction for negative
    arguments beyond -1, and the asymptotic series for large positive
    arguments. Relative accuracy is ~1e-13 over |x| in [1e-6, 700].
    """
    x = float(x)
    if x == 0.0 or not math.isfinite(x):
        raise ValueError(f"Ei is not defined at x={x}")
    if x > 0.0:
        if x <= 40.0:
            # all-positive series: gamma + ln x + sum_n x^n / (n n!)
            total = EULER_GAMMA + math.log(x)
            term = 1.0
            for n in range(1, 500):
                term *= x / n
                contrib = term / n
                total += contrib
                if contrib < 1e-18 * max(abs(total), 1.0):
                    break
            return total
        return math.exp(x) * _ei_asymptotic_scaled(x)
    y = -x
    if y <= 1.0:
        # alternating series for E1(y), no harmful cancellation below 1
        total = -EULER_GAMMA - math.log(y)
        term = 1.0
        for n in range(1, 100):
            term *= -y / n
            total -= term / n
            if abs(term) / n < 1e-18:
                break
        return -total
    return -math.exp(-y) * _e1_cf_scaled(y)


def ei_scaled(x: float) -> float:
    """exp(-x) * Ei(x), stable for arbitrarily large |x|."""
    x = float(x)
    if x == 0.0 or not math.isfinite(x):
        raise ValueError(f"Ei is not defined at x={x}")
    if abs(x) <= _EI_DIRECT_LIMIT:
        return math.exp(-x) * ei(x)
    if x > 0.0:
        return _ei_asymptotic_scaled(x)
    return -_e1_cf_scaled(-x)


def _ei_asymptotic_scaled(x: float) -> float:
    """exp(-x) Ei(x) via the asymptotic series, for large positive x."""
    total = 1.0
    term = 1.0
    for k in range(1, 200):
        nxt = term * k / x
        if nxt >= term:
            break
        term = nxt
        total += term
        if term < 1e-18 * total:
            break
    return total / x


def _e1_cf_scaled(y: float) -> float:
    """exp(y) E1(y) by modified-Lentz continued fraction, y > 1."""
    tiny = 1e-300
    b = y + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for k in range(1, 500):
        a = -float(k) * float(k)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


# ---------------------------------------------------------------------------
# symbol constellations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Constellation:
    """Discrete symbol alphabet with prior probabilities.

    bit_labels, when present, give the bit pattern of each symbol so that
    detection errors can be counted bit by bit.
    """

    symbols: np.ndarray
    probabilities: np.ndarray
    bit_labels: np.ndarray | None = None

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=complex)
        probs = np.asarray(self.probabilities, dtype=float)
        if symbols.ndim != 1 or symbols.size == 0:
            raise ValueError("symbols must be a nonempty 1-d array")
        if probs.shape != symbols.shape:
            raise ValueError("probabilities must match symbols in shape")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        labels = self.bit_labels
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != symbols.shape:
                raise ValueError("bit_labels must match symbols in shape")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "bit_labels", labels)

    @property
    def size(self) -> int:
        return self.symbols.size

    @property
    def mean_energy(self) -> float:
        return float(np.sum(self.probabilities * np.abs(self.symbols) ** 2))

    @property
    def is_unit_energy(self) -> bool:
        return abs(self.mean_energy - 1.0) < 1e-9

    @property
    def bits_per_symbol(self) -> int:
        b = int(round(math.log2(self.size)))
        if 2**b != self.size:
            raise ValueError("bits_per_symbol requires a power-of-two alphabet")
        return b


def square_qam(order: int) -> Constellation:
    """Gray-mapped, unit-mean-energy square QAM (4, 16, 64, 256, ...)."""
    side = math.isqrt(order)
    if side * side != order or side < 2 or (side & (side - 1)) != 0:
        raise ValueError("order must be an even power of two (square QAM)")
    bits_axis = side.bit_length() - 1
    idx = np.arange(side)
    levels = 2 * idx - (side - 1)
    gray = idx ^ (idx >> 1)
    norm = math.sqrt(2.0 * (order - 1) / 3.0)
    ii, qq = np.meshgrid(idx, idx, indexing="ij")
    symbols = (levels[ii] + 1j * levels[qq]).ravel() / norm
    labels = ((gray[ii] << bits_axis) | gray[qq]).ravel()
    probs = np.full(order, 1.0 / order)
    return Constellation(symbols, probs, labels)


# ---------------------------------------------------------------------------
# SINR moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SinrMoments:
    """Gaussian-model parameters of the instantaneous SINR."""

    mu_s: complex
    sigma_s2: float
    sigma_i2: float

    def __post_init__(self):
        if not (self.sigma_s2 >= 0 and math.isfinite(self.sigma_s2)):
            raise ValueError("sigma_s2 must be finite and nonnegative")
        if not (self.sigma_i2 > 0 and math.isfinite(self.sigma_i2)):
            raise ValueError("sigma_i2 must be finite and positive")

    @property
    def k_s(self) -> float:
        if self.sigma_s2 == 0.0:
            return math.inf if abs(self.mu_s) > 0 else 0.0
        return abs(self.mu_s) / math.sqrt(self.sigma_s2)

    @property
    def c_sigma(self) -> float:
        return self.sigma_s2 / self.sigma_i2

    @classmethod
    def from_ratios(cls, k_s: float, c_sigma: float) -> "SinrMoments":
        """Moments with unit interference variance and the given ratios."""
        if k_s < 0 or c_sigma <= 0:
            raise ValueError("need k_s >= 0 and c_sigma > 0")
        return cls(complex(k_s * math.sqrt(c_sigma)), c_sigma, 1.0)


def sinr_moments(
    weights: np.ndarray,
    desired_response: np.ndarray,
    interferer_weights: Sequence[np.ndarray] | np.ndarray,
    constellation: Constellation,
    pr_linear: float,
    k,
    noise_var: float,
    num_arrays: int = 2,
    interference: str = "coherent",
) -> SinrMoments:
    """Signal and interference moments for one user's link.

    Parameters
    ----------
    weights : (M,) precoder serving the user.
    desired_response : (M,) true line-of-sight response of the user
        (sum of the per-array responses for a combined link).
    interferer_weights : precoders of the co-channel users, as a sequence
        of (M,) vectors or an (M, N) matrix.
    constellation : symbol alphabet with priors.
    pr_linear : received power scale (linear).
    k : RicianFactor or linear K.
    noise_var : receiver noise variance (linear).
    num_arrays : how many per-array channels sum into the link; scales the
        diffuse variance (2 for the cooperative link, 1 single-array).
    interference : "coherent" uses |sum of interferer precoders|^2,
        "independent" uses the sum of their squared norms.
    """
    kl = k.linear if isinstance(k, RicianFactor) else float(k)
    if kl < 0 or math.isnan(kl):
        raise ValueError("Rician K must be nonnegative")
    if not (pr_linear > 0 and noise_var > 0):
        raise ValueError("pr_linear and noise_var must be positive")
    w = np.asarray(weights, dtype=complex)
    d = np.asarray(desired_response, dtype=complex)
    if math.isinf(kl):
        los_scale, nlos_scale = 1.0, 0.0
    else:
        los_scale = kl / (kl + 1.0)
        nlos_scale = float(num_arrays) / (kl + 1.0)

    p = constellation.probabilities
    s = constellation.symbols
    gain = np.vdot(d, w)  # d^H w
    mu_m = math.sqrt(pr_linear * los_scale) * gain * s
    mu_s = complex(np.sum(p * mu_m))
    w_energy = float(np.real(np.vdot(w, w)))
    sigma_s2 = float(
        np.sum(p * (pr_linear * np.abs(s) ** 2 * nlos_scale * w_energy + np.abs(mu_m - mu_s) ** 2))
    )

    if isinstance(interferer_weights, np.ndarray) and interferer_weights.ndim == 2:
        others = interferer_weights
    else:
        others = (
            np.column_stack(list(interferer_weights))
            if len(interferer_weights)
            else np.zeros((w.shape[0], 0), dtype=complex)
        )
    if others.shape[1] == 0:
        interferer_energy = 0.0
    elif interference == "coherent":
        total = others.sum(axis=1)
        interferer_energy = float(np.real(np.vdot(total, total)))
    elif interference == "independent":
        interferer_energy = float(np.sum(np.abs(others) ** 2))
    else:
        raise ValueError(f"interference must be 'coherent' or 'independent', got {interference!r}")

    mean_energy = float(np.sum(p * np.abs(s) ** 2))
    sigma_i2 = mean_energy * pr_linear * nlos_scale * interferer_energy + noise_var
    return SinrMoments(mu_s, sigma_s2, sigma_i2)


# ---------------------------------------------------------------------------
# SINR distribution
# ---------------------------------------------------------------------------

def sinr_density(m: SinrMoments, eta):
    """Density of the SINR ratio model at eta (vectorized).

    f(eta) = (1+k^2) c exp(-k^2 c/(eta+c)) (eta + c/(1+k^2)) / (eta+c)^3
    with k = k_s and c = c_sigma. The exponent is always nonpositive, so
    the expression never overflows.
    """
    eta = np.asarray(eta, dtype=float)
    if (eta <= 0).any():
        raise ValueError("eta must be positive")
    k2 = m.k_s**2
    c = m.c_sigma
    if not math.isfinite(k2):
        raise ValueError("density undefined for a deterministic signal term")
    return (1.0 + k2) * c * np.exp(-k2 * c / (eta + c)) * (eta + c / (1.0 + k2)) / (eta + c) ** 3


def sinr_cdf(m: SinrMoments, eta):
    """Distribution function of the SINR ratio model (vectorized).

    F(eta) = eta/(eta+c) exp(-k^2 c/(eta+c)); the density integrated in
    closed form.
    """
    eta = np.asarray(eta, dtype=float)
    if (eta < 0).any():
        raise ValueError("eta must be nonnegative")
    k2 = m.k_s**2
    c = m.c_sigma
    if not math.isfinite(k2):
        raise ValueError("cdf undefined for a deterministic signal term")
    return eta / (eta + c) * np.exp(-k2 * c / (eta + c))


def capacity_quadrature(m: SinrMoments, epsabs: float = 1e-10) -> float:
    """Mean of log2(1+eta) against sinr_density by adaptive quadrature.

    Substitutes t = c/(eta+c) to map the half-line onto (0, 1], which
    leaves only an integrable log endpoint singularity. This is the
    numeric oracle for the closed forms. Raises ArithmeticError if the
    quadrature does not converge.
    """
    c = m.c_sigma

    def g(t):
        eta = c * (1.0 - t) / t
        return np.log2(1.0 + eta) * sinr_density(m, eta) * c / (t * t)

    out = integrate.quad(g, 0.0, 1.0, epsabs=epsabs, epsrel=1e-12, limit=500, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 or abserr > max(100.0 * epsabs, 1e-7):
        raise ArithmeticError(
            f"capacity quadrature did not converge: value={value}, abserr={abserr}, "
            f"k_s={m.k_s}, c_sigma={c}" + (f", message={out[3]!r}" if len(out) > 3 else "")
        )
    return float(value)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def capacity_zero_mean(c_sigma: float) -> float:
    """Mean log2(1+eta) when the signal term has zero mean (k_s = 0).

    Equals c log2(c)/(c-1), continued across c = 1 where the limit is
    log2(e).
    """
    c = float(c_sigma)
    if not (c > 0 and math.isfinite(c)):
        raise ValueError("c_sigma must be positive and finite")
    eps = c - 1.0
    if abs(eps) < 1e-8:
        # series of (1+e) ln(1+e)/e around e = 0 avoids the 0/0
        return (1.0 + eps / 2.0 - eps * eps / 6.0 + eps**3 / 12.0) * LOG2E
    return c * math.log2(c) / eps


def capacity_closed_form(k_s: float, c_sigma: float) -> float:
    """Mean log2(1+eta) for the Gaussian-ratio SINR model, general k_s.

    With k2 = k_s^2, c = c_sigma and E(x) = exp(-x) Ei(x):

        [ ln(c k2) + gamma - Ei(-k2) + (E(ck2/(c-1)) - exp(-k2) E(k2/(c-1)))/(c-1) ] / ln 2

    continued across c = 1, where the last term tends to (1-exp(-k2))/k2.
    Reduces to capacity_zero_mean at k_s = 0.
    """
    k = float(k_s)
    c = float(c_sigma)
    if not (k >= 0 and math.isfinite(k)):
        raise ValueError("k_s must be nonnegative and finite")
    if not (c > 0 and math.isfinite(c)):
        raise ValueError("c_sigma must be positive and finite")
    if k == 0.0:
        return capacity_zero_mean(c)
    k2 = k * k
    if c == 1.0:
        tail = (1.0 - math.exp(-k2)) / k2
    else:
        a = c * k2 / (c - 1.0)
        b = k2 / (c - 1.0)
        tail = (ei_scaled(a) - math.exp(-k2) * ei_scaled(b)) / (c - 1.0)
    # Ei(-k2) underflows to zero for very large k2, which is the right limit
    ei_neg = ei(-k2) if k2 < 745.0 else 0.0
    return (math.log(c * k2) + EULER_GAMMA - ei_neg + tail) * LOG2E


def capacity_for_moments(m: SinrMoments) -> float:
    """Dispatch on the moment ratios; handles degenerate moments.

    A vanishing diffuse signal part makes the SINR deterministic, in which
    case the capacity is just log2(1 + |mu_s|^2/sigma_i2).
    """
    if m.sigma_s2 == 0.0:
        return math.log2(1.0 + abs(m.mu_s) ** 2 / m.sigma_i2)
    k_s = m.k_s
    if k_s < 1e-9:
        return capacity_zero_mean(m.c_sigma)
    return capacity_closed_form(k_s, m.c_sigma)


# ---------------------------------------------------------------------------
# volumetric spectral efficiency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VolumeSpec:
    """Geometry that converts ergodic capacity into a volumetric density.

    kind "small_cell": reuse_factor co-channel cells of the given sphere
    diameter share the band, so one cell's capacity is charged for the
    whole co-channel volume. kind "cell_free": num_users links share the
    entire region volume.
    """

    kind: str
    cell_diameter_m: float | None = None
    reuse_factor: int | None = None
    region_volume_m3: float | None = None
    num_users: int | None = None

    def __post_init__(self):
        if self.kind == "small_cell":
            if self.cell_diameter_m is None or not self.cell_diameter_m > 0:
                raise ValueError("small_cell needs a positive cell_diameter_m")
            if self.reuse_factor is None or self.reuse_factor < 1:
                raise ValueError("small_cell needs reuse_factor >= 1")
        elif self.kind == "cell_free":
            if self.region_volume_m3 is None or not self.region_volume_m3 > 0:
                raise ValueError("cell_free needs a positive region_volume_m3")
            if self.num_users is None or self.num_users < 1:
                raise ValueError("cell_free needs num_users >= 1")
        else:
            raise ValueError(f"unknown VolumeSpec kind {self.kind!r}")


def vse(avg_capacity: float, vol: VolumeSpec) -> float:
    """Volumetric spectral efficiency in bps/Hz per cubic kilometer."""
    if not (avg_capacity >= 0 and math.isfinite(avg_capacity)):
        raise ValueError("avg_capacity must be finite and nonnegative")
    if vol.kind == "small_cell":
        sphere = (4.0 / 3.0) * math.pi * (vol.cell_diameter_m / 2.0) ** 3
        per_m3 = avg_capacity / (vol.reuse_factor * sphere)
    else:
        per_m3 = avg_capacity * vol.num_users / vol.region_volume_m3
    return per_m3 * 1e9
