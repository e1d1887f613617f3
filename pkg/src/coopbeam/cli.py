"""Command-line front end: canned studies, theory tables and self-checks.

Every experiment subcommand writes one CSV row per (sweep point x precoder
kind). Identical configs and seeds give byte-identical CSVs; pass
--no-runtime-col to drop the only wall-clock-dependent column.

Exit codes: 0 success, 1 config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys

import numpy as np

from . import capacity, channel, deployment, geometry, precoding, simulation

CSV_COLUMNS = [
    "subcommand",
    "seed",
    "scenario_kind",
    "precoder",
    "sweep_param",
    "sweep_value",
    "k_db",
    "n_trials",
    "avg_se_sim",
    "se_stderr",
    "avg_se_theory",
    "avg_vse_sim",
    "avg_vse_theory",
    "ber",
    "error",
    "config",
    "runtime_s",
]


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class ExperimentSpec:
    scenario: deployment.ScenarioConfig
    link: channel.LinkBudget
    options: simulation.SimOptions
    precoders: list
    n_trials: int
    seed: int
    sweep_param: str | None
    sweep_values: list | None


_SECTION_TYPES = {
    "scenario": deployment.ScenarioConfig,
    "link": channel.LinkBudget,
    "options": simulation.SimOptions,
}
_TOP_KEYS = {"scenario", "link", "options", "precoders", "n_trials", "seed", "sweep"}


def _build_section(cls, data: dict, where: str):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    if cls is deployment.ScenarioConfig and "region_m" in data:
        data = dict(data, region_m=tuple(data["region_m"]))
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in {where}: {exc}") from exc


def load_spec(config_path: str | None, defaults: dict, set_overrides: list) -> ExperimentSpec:
    """Merge subcommand defaults, an optional JSON config file and --set
    overrides (dotted keys, JSON-parsed values) into an ExperimentSpec."""
    merged = json.loads(json.dumps(defaults))  # deep copy
    if config_path:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
        for key, value in loaded.items():
            if key in _SECTION_TYPES or key == "sweep":
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be a JSON object")
                merged.setdefault(key, {}).update(value)
            else:
                merged[key] = value
    for item in set_overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = merged
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value

    unknown = set(merged) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    sweep = merged.get("sweep", {})
    unknown = set(sweep) - {"param", "values"}
    if unknown:
        raise ConfigError(f"unknown key(s) in sweep: {', '.join(sorted(unknown))}")
    spec = ExperimentSpec(
        scenario=_build_section(_SECTION_TYPES["scenario"], merged.get("scenario", {}), "scenario"),
        link=_build_section(_SECTION_TYPES["link"], merged.get("link", {}), "link"),
        options=_build_section(_SECTION_TYPES["options"], merged.get("options", {}), "options"),
        precoders=merged.get("precoders", ["zfp"]),
        n_trials=int(merged.get("n_trials", 1000)),
        seed=int(merged.get("seed", 0)),
        sweep_param=sweep.get("param"),
        sweep_values=sweep.get("values"),
    )
    if spec.n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if spec.seed < 0:
        raise ConfigError("seed must be >= 0")
    for kind in spec.precoders:
        if kind not in simulation.PRECODER_KINDS:
            raise ConfigError(
                f"unknown precoder {kind!r}; choose from {', '.join(simulation.PRECODER_KINDS)}"
            )
    return spec


def _swept_configs(spec: ExperimentSpec):
    """(sweep_value, ScenarioConfig) pairs for the spec's sweep axis."""
    if not spec.sweep_param:
        return [(None, spec.scenario)]
    valid = {f.name for f in dataclasses.fields(deployment.ScenarioConfig)}
    if spec.sweep_param not in valid:
        raise ConfigError(f"sweep param {spec.sweep_param!r} is not a scenario field")
    out = []
    for value in spec.sweep_values or []:
        try:
            out.append((value, dataclasses.replace(spec.scenario, **{spec.sweep_param: value})))
        except ValueError as exc:
            raise ConfigError(f"sweep value {value!r} rejected: {exc}") from exc
    return out


def _records_to_csv(rows, out_path: str | None, runtime_col: bool):
    columns = CSV_COLUMNS if runtime_col else CSV_COLUMNS[:-1]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    text = buf.getvalue()
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _row(subcommand, record, sweep_param, sweep_value):
    return {
        "subcommand": subcommand,
        "seed": record.seed,
        "scenario_kind": record.scenario_kind,
        "precoder": record.precoder,
        "sweep_param": sweep_param if sweep_param else "",
        "sweep_value": "" if sweep_value is None else repr(sweep_value),
        "k_db": repr(record.k_db),
        "n_trials": record.n_trials,
        "avg_se_sim": _fmt(record.avg_se_sim),
        "se_stderr": _fmt(record.se_stderr),
        "avg_se_theory": _fmt(record.avg_se_theory),
        "avg_vse_sim": _fmt(record.avg_vse_sim),
        "avg_vse_theory": _fmt(record.avg_vse_theory),
        "ber": "" if record.ber is None else repr(record.ber),
        "error": record.error or "",
        "config": json.dumps(record.config, separators=(",", ":")),
        "runtime_s": repr(record.runtime_s),
    }


def _fmt(x) -> str:
    return "" if x != x else repr(x)  # NaN prints empty


def _run_experiment(subcommand, spec, args, with_ber=False):
    pairs = _swept_configs(spec)
    rows = []
    cell = 0
    for sweep_value, cfg in pairs:
        for kind in spec.precoders:
            cell_seed = int(
                np.random.SeedSequence((spec.seed, cell)).generate_state(1, np.uint64)[0]
            )
            record = simulation.run_se_trials(
                cfg,
                kind,
                spec.n_trials,
                cell_seed,
                link=spec.link,
                options=spec.options,
                with_ber=with_ber,
            )
            rows.append(_row(subcommand, record, spec.sweep_param, sweep_value))
            cell += 1
    _records_to_csv(rows, args.out, not args.no_runtime_col)
    return 0


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_smallcell_sweep(args, spec):
    return _run_experiment("smallcell-sweep", spec, args)


def _cmd_cellfree_sweep(args, spec):
    return _run_experiment("cellfree-sweep", spec, args)


def _cmd_precoder_compare(args, spec):
    return _run_experiment("precoder-compare", spec, args)


def _compare_arch_rows(args, spec, subcommand, with_ber):
    """Small-cell and cell-free rows at matched element counts, swept over K."""
    k_values = spec.sweep_values or [0.0, 5.0, 10.0, 15.0]
    small = dataclasses.replace(spec.scenario, kind="small_cell")
    free = dataclasses.replace(spec.scenario, kind="cell_free")
    rows = []
    cell = 0
    for k_db in k_values:
        for cfg in (small, free):
            for kind in spec.precoders:
                cfg_k = dataclasses.replace(cfg, k_db=float(k_db))
                cell_seed = int(
                    np.random.SeedSequence((spec.seed, cell)).generate_state(1, np.uint64)[0]
                )
                record = simulation.run_se_trials(
                    cfg_k,
                    kind,
                    spec.n_trials,
                    cell_seed,
                    link=spec.link,
                    options=spec.options,
                    with_ber=with_ber,
                )
                rows.append(_row(subcommand, record, "k_db", k_db))
                cell += 1
    _records_to_csv(rows, args.out, not args.no_runtime_col)
    return 0


def _cmd_compare_arch(args, spec):
    return _compare_arch_rows(args, spec, "compare-arch", with_ber=False)


def _cmd_ber(args, spec):
    return _compare_arch_rows(args, spec, "ber", with_ber=True)


def _cmd_theory_table(args, spec):
    ks_grid = [0.0, 0.5, 1.0, 2.0, 5.0]
    cs_grid = [0.5, 2.0, 10.0, 100.0, 10000.0]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k_s", "c_sigma", "closed_form", "quadrature", "abs_residual"])
    for k_s in ks_grid:
        for c_sigma in cs_grid:
            closed = capacity.capacity_closed_form(k_s, c_sigma)
            quadr = capacity.capacity_quadrature(capacity.SinrMoments.from_ratios(k_s, c_sigma))
            writer.writerow([repr(k_s), repr(c_sigma), repr(closed), repr(quadr), repr(abs(closed - quadr))])
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _validate_checks():
    rng = np.random.default_rng(2026)
    checks = []

    # steering derivative vs finite differences
    geom = geometry.planar_array(4, 4, 0.002, (0.0, 0.0, 0.0))
    ang = geometry.AnglePair(0.4, 1.2)
    lam = 0.004
    step = 1e-7
    worst = 0.0
    for axis, bumped in (
        ("azimuth", geometry.AnglePair(ang.azimuth + step, ang.zenith)),
        ("zenith", geometry.AnglePair(ang.azimuth, ang.zenith + step)),
    ):
        fd = (geometry.steering_vector(geom, bumped, lam) - geometry.steering_vector(geom, ang, lam)) / step
        an = geometry.steering_derivative(geom, ang, lam, axis)
        worst = max(worst, float(np.max(np.abs(fd - an))))
    checks.append(("steering derivative vs finite difference", worst < 1e-4, f"max abs dev {worst:.2e}"))

    # precoder nulling on random constraint sets
    m = 64
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 17))
        vs = rng.standard_normal((m, n + 1)) + 1j * rng.standard_normal((m, n + 1))
        cs = precoding.ConstraintSet(vs[:, 0], tuple(vs[:, 1:].T))
        w = precoding.zfp(cs).weights
        for v in cs.interferers:
            worst = max(worst, abs(np.vdot(w, v)) / (m * np.linalg.norm(v)))
    checks.append(("zfp nulling on random sets", worst < 1e-9, f"worst scaled residual {worst:.2e}"))

    # zero-mean closed form vs quadrature
    worst = 0.0
    for c in np.logspace(-2, 6, 10):
        quadr = capacity.capacity_quadrature(capacity.SinrMoments.from_ratios(0.0, c))
        worst = max(worst, abs(capacity.capacity_zero_mean(c) - quadr))
    checks.append(("zero-mean capacity vs quadrature", worst < 1e-6, f"worst abs dev {worst:.2e}"))

    # general closed form vs quadrature
    worst = 0.0
    for k_s in (0.2, 1.0, 5.0):
        for c in (0.3, 4.0, 300.0):
            quadr = capacity.capacity_quadrature(capacity.SinrMoments.from_ratios(k_s, c))
            worst = max(worst, abs(capacity.capacity_closed_form(k_s, c) - quadr) / quadr)
    checks.append(("general capacity vs quadrature", worst < 1e-6, f"worst rel dev {worst:.2e}"))

    # density mass
    worst = 0.0
    for _ in range(5):
        mom = capacity.SinrMoments.from_ratios(float(rng.uniform(0, 4)), float(10 ** rng.uniform(-1, 3)))

        def g(t, mom=mom):
            eta = mom.c_sigma * (1.0 - t) / t
            return capacity.sinr_density(mom, eta) * mom.c_sigma / (t * t)

        from scipy import integrate

        mass, _ = integrate.quad(g, 0.0, 1.0, epsabs=1e-12, limit=300)
        worst = max(worst, abs(mass - 1.0))
    checks.append(("sinr density mass", worst < 1e-6, f"worst |mass-1| {worst:.2e}"))

    # scaled-Ei identity against quadrature of the defining integral
    from scipy import integrate

    worst = 0.0
    for x in (0.5, 3.0, 10.0, -0.5, -4.0):
        if x > 0:
            val, _ = integrate.quad(lambda t: np.expm1(t) / t, 0.0, x, epsabs=1e-13, limit=200)
            ref = capacity.EULER_GAMMA + np.log(x) + val
        else:
            val, _ = integrate.quad(lambda t: np.exp(-t) / t, -x, np.inf, epsabs=1e-13, limit=200)
            ref = -val
        worst = max(worst, abs(capacity.ei(x) - ref) / max(abs(ref), 1e-300))
    checks.append(("exponential integral vs quadrature", worst < 1e-10, f"worst rel dev {worst:.2e}"))
    return checks


def _cmd_validate(args, spec):
    checks = _validate_checks()
    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name:<{width}}  {detail}")
        failed += 0 if ok else 1
    if failed:
        print(f"{failed} check(s) failed")
        return 2
    print("all checks passed")
    return 0


# ---------------------------------------------------------------------------
# per-subcommand defaults (desk-scale studies)
# ---------------------------------------------------------------------------

_MATCHED_ARCH_DEFAULTS = {
    "scenario": {
        "kind": "small_cell",
        "nu": 28,
        "micro_cell_radius_m": 20.0,
        "aa_rows": 16,
        "aa_cols": 16,
        "na": 32,
        "ne_rows": 4,
        "ne_cols": 4,
        # architecture comparison runs both kinds under the same user model
        "co_angle_interferer": False,
    },
    "precoders": ["zfp"],
    "n_trials": 1000,
}

_DEFAULTS = {
    "smallcell-sweep": {
        "scenario": {"kind": "small_cell"},
        "precoders": ["zfp"],
        "n_trials": 1000,
        "sweep": {"param": "micro_cell_radius_m", "values": [15.0, 20.0, 25.0, 30.0, 35.0, 40.0]},
    },
    "cellfree-sweep": {
        "scenario": {"kind": "cell_free", "na": 16, "ne_rows": 4, "ne_cols": 4},
        "precoders": ["zfp"],
        "n_trials": 1000,
        "sweep": {"param": "nu", "values": [5, 10, 20, 40]},
    },
    "compare-arch": _MATCHED_ARCH_DEFAULTS,
    "ber": _MATCHED_ARCH_DEFAULTS,
    "precoder-compare": {
        "scenario": {"kind": "small_cell"},
        "precoders": ["zfp", "zfp-d", "mpdr"],
        "n_trials": 1000,
        "sweep": {"param": "position_error_var_m2", "values": [0.0, 1.0]},
    },
    "theory-table": {},
    "validate": {},
}

_HANDLERS = {
    "smallcell-sweep": _cmd_smallcell_sweep,
    "cellfree-sweep": _cmd_cellfree_sweep,
    "compare-arch": _cmd_compare_arch,
    "precoder-compare": _cmd_precoder_compare,
    "ber": _cmd_ber,
    "theory-table": _cmd_theory_table,
    "validate": _cmd_validate,
}

_HELP = {
    "smallcell-sweep": "sweep small-cell radius and report SE/VSE",
    "cellfree-sweep": "sweep cell-free user count and report SE/VSE",
    "compare-arch": "small-cell vs cell-free at matched element counts over K",
    "precoder-compare": "precoder kinds with and without position error",
    "ber": "bit error rate for both architectures over K",
    "theory-table": "closed-form capacities with quadrature residuals",
    "validate": "run the built-in self checks",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopbeam",
        description="Cooperative dual-array 3D beamforming studies",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, handler in _HANDLERS.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--trials", type=int, help="trials per cell (overrides config)")
        p.add_argument("--out", help="output CSV path (default stdout)")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted config override, e.g. scenario.nu=12 (repeatable)",
        )
        p.add_argument(
            "--no-runtime-col",
            action="store_true",
            help="omit the wall-clock column for byte-stable output",
        )
        p.set_defaults(handler=handler, defaults=_DEFAULTS[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config, args.defaults, args.set)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be >= 0")
            spec.seed = args.seed
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("trials must be >= 1")
            spec.n_trials = args.trials
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.handler(args, spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # simulation failures should not traceback at users
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def entry():
    raise SystemExit(main())
