"""Monte Carlo engine: per-trial pipeline, SE/BER estimators and sweeps.

Each trial draws a fresh deployment, builds every user's precoder from the
assumed (precoding) positions, draws the desired user's channel from the
true positions, and scores one instantaneous SINR sample next to the
moment-based capacity prediction for the same trial. Trials are seeded
independently from (seed, trial index), so results do not depend on
execution order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import capacity, channel, deployment, geometry, precoding

PRECODER_KINDS = ("zfp", "zfp-d", "zfp-general", "mpdr", "conventional-zf")


@dataclass(frozen=True)
class SimOptions:
    """Model switches that are not part of the deployment itself.

    zfpd_scope: which users contribute derivative nulls to a zfp-d
        precoder; "all-users" or "desired-only".
    interference: how interferer precoders combine into the predicted
        interference variance; "coherent" or "independent".
    """

    zfpd_scope: str = "all-users"
    interference: str = "coherent"
    sinr_cap: float = 1e12

    def __post_init__(self):
        if self.zfpd_scope not in ("all-users", "desired-only"):
            raise ValueError("zfpd_scope must be 'all-users' or 'desired-only'")
        if self.interference not in ("coherent", "independent"):
            raise ValueError("interference must be 'coherent' or 'independent'")
        if not self.sinr_cap > 0:
            raise ValueError("sinr_cap must be positive")


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    """Per-user precoding vectors as columns; column 0 serves the desired user."""

    weights: np.ndarray
    method: str


@dataclass
class MetricsRecord:
    """One experiment cell: averages over trials plus the resolved config."""

    scenario_kind: str
    precoder: str
    k_db: float
    n_trials: int
    seed: int
    avg_se_sim: float = math.nan
    se_stderr: float = math.nan
    avg_se_theory: float = math.nan
    avg_vse_sim: float = math.nan
    avg_vse_theory: float = math.nan
    ber: float | None = None
    error: str | None = None
    config: dict = field(default_factory=dict)
    runtime_s: float = 0.0


def build_precoders(
    scen: deployment.Scenario,
    wavelength: float,
    kind: str,
    options: SimOptions | None = None,
) -> PrecoderSet:
    """Precoders for every user of a scenario from the assumed positions."""
    options = options or SimOptions()
    if kind not in PRECODER_KINDS:
        raise ValueError(f"precoder kind must be one of {PRECODER_KINDS}, got {kind!r}")
    left, right = scen.arrays
    if np.array_equal(scen.precoding_positions, scen.true_positions):
        ang_l, ang_r = scen.true_angles
    else:
        ang_l = scen.precoding_angles(0)
        ang_r = scen.precoding_angles(1)
    el = geometry.steering_bank(left, ang_l, wavelength)
    er = geometry.steering_bank(right, ang_r, wavelength)
    nu = el.shape[1]

    if kind == "conventional-zf":
        w = precoding.zfp_bank(el)
    elif kind == "zfp":
        w = precoding.zfp_bank(el + er)
    elif kind == "zfp-general":
        cols = []
        for u in range(nu):
            others = [v for v in range(nu) if v != u]
            cs_l = precoding.ConstraintSet(el[:, u], tuple(el[:, v] for v in others))
            cs_r = precoding.ConstraintSet(er[:, u], tuple(er[:, v] for v in others))
            cols.append(precoding.zfp_general(cs_l, cs_r).weights)
        w = np.column_stack(cols)
    elif kind == "mpdr":
        s = el + er
        cols = []
        for u in range(nu):
            others = tuple(s[:, v] for v in range(nu) if v != u)
            cols.append(precoding.mpdr(precoding.ConstraintSet(s[:, u], others)).weights)
        w = np.column_stack(cols)
    else:  # zfp-d
        s = el + er
        derivs = []
        for u in range(nu):
            d_az = geometry.steering_derivative(
                left, ang_l[u], wavelength, "azimuth"
            ) + geometry.steering_derivative(right, ang_r[u], wavelength, "azimuth")
            d_ze = geometry.steering_derivative(
                left, ang_l[u], wavelength, "zenith"
            ) + geometry.steering_derivative(right, ang_r[u], wavelength, "zenith")
            derivs.append((d_az, d_ze))
        all_derivs = tuple(d for pair in derivs for d in pair)
        cols = []
        for u in range(nu):
            others = tuple(s[:, v] for v in range(nu) if v != u)
            dv = all_derivs if options.zfpd_scope == "all-users" else derivs[u]
            cols.append(precoding.zfp_d(precoding.ConstraintSet(s[:, u], others, dv)).weights)
        w = np.column_stack(cols)
    return PrecoderSet(w, kind)


def instantaneous_sinr(
    h,
    precoders,
    symbols,
    pr_linear: float,
    noise_var: float,
    rng: np.random.Generator,
    cap: float = 1e12,
) -> float:
    """One capped SINR sample for the desired user.

    eta = pr |h^H w_0 s_0|^2 / |sqrt(pr) h^H sum_n w_n s_n + noise|^2 with
    noise ~ CN(0, noise_var). `h` may be an effective channel vector or a
    ChannelRealization (its combined link is used).
    """
    if isinstance(h, channel.ChannelRealization):
        h = h.h_combined
    h = np.asarray(h, dtype=complex)
    w = precoders.weights if isinstance(precoders, PrecoderSet) else np.asarray(precoders, dtype=complex)
    symbols = np.asarray(symbols, dtype=complex)
    if w.ndim != 2 or symbols.shape != (w.shape[1],):
        raise ValueError("need (M, NU) weights and NU symbols")
    if not (pr_linear > 0 and noise_var > 0):
        raise ValueError("pr_linear and noise_var must be positive")
    g = h.conj() @ w
    num = pr_linear * abs(g[0] * symbols[0]) ** 2
    den = 0.0
    for _ in range(100):  # zero denominator has probability zero; redraw noise
        noise = math.sqrt(noise_var / 2.0) * complex(rng.standard_normal(), rng.standard_normal())
        den = abs(math.sqrt(pr_linear) * (g[1:] @ symbols[1:]) + noise) ** 2
        if den > 0:
            break
    return min(num / den, cap)


def _single_trial(scen, link, kind, constellation, k, options, rng, with_ber):
    lam = link.wavelength_m
    pset = build_precoders(scen, lam, kind, options)
    w = pset.weights
    left, right = scen.arrays

    e_l0 = geometry.steering_vector(left, scen.true_angles[0][0], lam)
    if kind == "conventional-zf":
        desired_response = e_l0
        num_arrays = 1
    else:
        e_r0 = geometry.steering_vector(right, scen.true_angles[1][0], lam)
        desired_response = e_l0 + e_r0
        num_arrays = 2

    mid = (left.reference + right.reference) / 2.0
    dist = float(np.linalg.norm(scen.true_positions[0] - mid))
    pr_dbm, noise_dbm = channel.received_power(link, left.num_elements, dist)
    pr = float(channel.db2pow(pr_dbm))
    nv = float(channel.db2pow(noise_dbm))

    moments = capacity.sinr_moments(
        w[:, 0],
        desired_response,
        w[:, 1:],
        constellation,
        pr,
        k,
        nv,
        num_arrays=num_arrays,
        interference=options.interference,
    )
    se_theory = max(capacity.capacity_for_moments(moments), 0.0)

    if kind == "conventional-zf":
        h = channel.rician_sample(e_l0, k, rng)
    else:
        h = channel.rician_sample(e_l0, k, rng) + channel.rician_sample(e_r0, k, rng)

    g = h.conj() @ w
    idx = rng.integers(constellation.size, size=scen.num_users)
    s = constellation.symbols[idx]
    signal = math.sqrt(pr) * g[0] * s[0]
    interf = 0.0
    for _ in range(100):
        noise = math.sqrt(nv / 2.0) * complex(rng.standard_normal(), rng.standard_normal())
        interf = math.sqrt(pr) * (g[1:] @ s[1:]) + noise
        if abs(interf) > 0:
            break
    eta = min(abs(signal) ** 2 / abs(interf) ** 2, options.sinr_cap)
    se_sim = math.log2(1.0 + eta)

    bit_errors = 0
    if with_ber:
        y = signal + interf
        det = int(np.argmin(np.abs(y - math.sqrt(pr) * g[0] * constellation.symbols)))
        sent = int(constellation.bit_labels[idx[0]])
        bit_errors = (sent ^ int(constellation.bit_labels[det])).bit_count()
    return se_sim, se_theory, bit_errors


def run_se_trials(
    cfg: deployment.ScenarioConfig,
    precoder_kind: str,
    n_trials: int,
    seed: int,
    *,
    link: channel.LinkBudget | None = None,
    options: SimOptions | None = None,
    constellation: capacity.Constellation | None = None,
    with_ber: bool = False,
) -> MetricsRecord:
    """Average SE/VSE (and optionally BER) over independent scenario draws."""
    link = link or channel.LinkBudget()
    options = options or SimOptions()
    constellation = constellation or capacity.square_qam(64)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if precoder_kind not in PRECODER_KINDS:
        raise ValueError(f"precoder kind must be one of {PRECODER_KINDS}, got {precoder_kind!r}")
    if with_ber and constellation.bit_labels is None:
        raise ValueError("BER runs need a constellation with bit labels")

    k = channel.RicianFactor(cfg.k_db)
    se = np.empty(n_trials)
    th = np.empty(n_trials)
    vse_sim = np.empty(n_trials)
    vse_th = np.empty(n_trials)
    bit_errors = 0
    record = MetricsRecord(
        scenario_kind=cfg.kind,
        precoder=precoder_kind,
        k_db=cfg.k_db,
        n_trials=n_trials,
        seed=seed,
        config=_config_echo(cfg, link, options, precoder_kind, n_trials, seed),
    )
    t0 = time.perf_counter()
    try:
        for i in range(n_trials):
            rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
            scen = deployment.draw_scenario(cfg, rng)
            if cfg.position_error_var_m2 > 0:
                scen = deployment.perturb_positions(scen, cfg.position_error_var_m2, rng)
            se[i], th[i], errs = _single_trial(
                scen, link, precoder_kind, constellation, k, options, rng, with_ber
            )
            vspec = scen.volume_spec()
            vse_sim[i] = capacity.vse(se[i], vspec)
            vse_th[i] = capacity.vse(th[i], vspec)
            bit_errors += errs
    except precoding.InfeasibleConstraints as exc:
        record.error = str(exc)
        record.runtime_s = time.perf_counter() - t0
        return record

    record.avg_se_sim = float(np.mean(se))
    record.se_stderr = float(np.std(se, ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
    record.avg_se_theory = float(np.mean(th))
    record.avg_vse_sim = float(np.mean(vse_sim))
    record.avg_vse_theory = float(np.mean(vse_th))
    if with_ber:
        record.ber = bit_errors / (constellation.bits_per_symbol * n_trials)
    record.runtime_s = time.perf_counter() - t0
    return record


def run_ber_trials(
    cfg: deployment.ScenarioConfig,
    precoder_kind: str,
    n_trials: int,
    seed: int,
    **kwargs,
) -> MetricsRecord:
    """Same trial pipeline as run_se_trials with bit-error counting on."""
    return run_se_trials(cfg, precoder_kind, n_trials, seed, with_ber=True, **kwargs)


def sweep(
    cfg_grid,
    precoder_kinds,
    n_trials: int,
    master_seed: int,
    *,
    link: channel.LinkBudget | None = None,
    options: SimOptions | None = None,
    with_ber: bool = False,
) -> list[MetricsRecord]:
    """Run every (config, precoder kind) cell with a derived per-cell seed.

    Infeasible cells produce records with the error field set; the sweep
    continues. An empty grid returns an empty list.
    """
    records = []
    cell = 0
    for cfg in cfg_grid:
        for kind in precoder_kinds:
            cell_seed = int(
                np.random.SeedSequence((int(master_seed), cell)).generate_state(1, np.uint64)[0]
            )
            records.append(
                run_se_trials(
                    cfg, kind, n_trials, cell_seed, link=link, options=options, with_ber=with_ber
                )
            )
            cell += 1
    return records


def _config_echo(cfg, link, options, precoder_kind, n_trials, seed) -> dict:
    return {
        "scenario": asdict(cfg),
        "link": asdict(link),
        "options": asdict(options),
        "precoder": precoder_kind,
        "n_trials": n_trials,
        "seed": seed,
    }
