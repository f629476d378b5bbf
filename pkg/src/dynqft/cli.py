"""Experiment runner: sweeps, demos, and rewrites from the command line.

Every artifact it writes is deterministic for a given configuration: rows
are sorted, floats are fixed at 12 significant digits, JSON keys are
sorted, and no timestamps are embedded. Each CSV starts with comment
lines carrying the package version and a hash of the physics-relevant
configuration so results can be traced to their settings.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields

from . import __version__
from .certify import plurality_vote_success, sampled_process_fidelity
from .dd import dd_effectiveness, insert_dd
from .ir import stats
from .qft import (
    build_dynamic_qft,
    build_unitary_qft,
    compose,
    prepare_periodic_state,
)
from .rewrite import advance_measurements
from .sim import NoiseModel, run_exact, run_trajectories
from .text_format import ParseError, parse_text, print_text
from .timing import TimingModel

__all__ = ["ExperimentConfig", "main"]


@dataclass
class ExperimentConfig:
    """Knobs shared by the experiment subcommands."""

    variant: str = "both"
    n_min: int = 2
    n_max: int = 4
    dd: str = "none"
    m: int = 20
    shots: int = 2000
    seed: int = 7
    mitigate: bool = False
    p1: float = 0.0
    p2: float = 0.005
    eps_ro: float = 0.01
    sigma: float = 5e-4
    over_rotation: float = 0.0
    ff_idle: bool = True
    t_1q_gate: float = 0.0
    t_cphase: float = 300.0
    t_measure_pulse: float = 781.0
    t_post_measure_delay: float = 463.0
    t_ff: float = 653.0

    def noise(self) -> NoiseModel:
        return NoiseModel(
            p1=self.p1,
            p2=self.p2,
            eps_ro=self.eps_ro,
            idle_detuning_sigma=self.sigma,
            apply_idle_during_feedforward=self.ff_idle,
            pulse_over_rotation=self.over_rotation,
        )

    def timing(self) -> TimingModel:
        return TimingModel(
            t_1q_gate=self.t_1q_gate,
            t_cphase=self.t_cphase,
            t_measure_pulse=self.t_measure_pulse,
            t_post_measure_delay=self.t_post_measure_delay,
            t_ff=self.t_ff,
        )

    def record(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        payload = json.dumps(self.record(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


class ConfigError(ValueError):
    pass


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    valid = {f.name: f.type for f in fields(ExperimentConfig)}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in data.items():
            if key not in valid:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for name in valid:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if cfg.variant not in ("unitary", "dynamic", "both"):
        raise ConfigError(f"unknown variant {cfg.variant!r}")
    if cfg.n_min < 1 or cfg.n_max < cfg.n_min:
        raise ConfigError("need 1 <= n_min <= n_max")
    if cfg.m < 1 or cfg.shots < 1:
        raise ConfigError("m and shots must be positive")
    for prob in (cfg.p1, cfg.p2, cfg.eps_ro):
        if not 0.0 <= prob <= 1.0:
            raise ConfigError("probabilities must lie in [0, 1]")
    if cfg.sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    return cfg


def _resolve_dd(dd: str, variant: str) -> str:
    if dd == "auto":
        return "ur10" if variant == "unitary" else "fc_dd"
    return dd


def _builder(variant: str):
    return build_unitary_qft if variant == "unitary" else build_dynamic_qft


def _variants(cfg: ExperimentConfig) -> list[str]:
    return ["unitary", "dynamic"] if cfg.variant == "both" else [cfg.variant]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_csv(path: str, cfg: ExperimentConfig, columns: list[str], rows: list) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# version={__version__}\n")
        fh.write(f"# config_hash={cfg.hash()}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _figure(svg_path: str):
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigError(
            "matplotlib is required for --svg (install the 'plot' extra)"
        ) from exc
    matplotlib.use("svg")
    matplotlib.rcParams["svg.hashsalt"] = "dynqft"
    import matplotlib.pyplot as plt

    return plt


def _cmd_fidelity_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    noise, timing = cfg.noise(), cfg.timing()
    rows = []
    records = []
    for n in range(cfg.n_min, cfg.n_max + 1):
        for variant in _variants(cfg):
            seq = _resolve_dd(cfg.dd, variant)
            circuit = insert_dd(_builder(variant)(n), seq, timing)
            est = sampled_process_fidelity(
                circuit,
                m=cfg.m,
                shots=cfg.shots,
                seed=cfg.seed,
                noise=noise,
                timing=timing,
                mitigate=cfg.mitigate,
            )
            rows.append(
                (
                    variant,
                    seq,
                    n,
                    est.m,
                    est.shots,
                    est.seed,
                    est.point,
                    est.bias_corrected,
                    est.ci_low,
                    est.ci_high,
                    est.sigma_boot,
                )
            )
            records.append(est.as_record(variant=variant, dd=seq))
            print(
                f"n={n} variant={variant} dd={seq} "
                f"fidelity={est.bias_corrected:.6f} "
                f"ci=[{est.ci_low:.6f}, {est.ci_high:.6f}]"
            )
    columns = [
        "variant",
        "dd",
        "n",
        "m",
        "shots",
        "seed",
        "point",
        "bias_corrected",
        "ci_low",
        "ci_high",
        "sigma_boot",
    ]
    if args.out:
        _write_csv(args.out, cfg, columns, rows)
    if args.json:
        _write_json(args.json, {"config": cfg.record(), "rows": records})
    if args.svg:
        plt = _figure(args.svg)
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for variant in _variants(cfg):
            pts = [(r[2], r[7], r[8], r[9]) for r in rows if r[0] == variant]
            ns = [p[0] for p in pts]
            mid = [p[1] for p in pts]
            lo = [p[1] - p[2] for p in pts]
            hi = [p[3] - p[1] for p in pts]
            ax.errorbar(ns, mid, yerr=[lo, hi], marker="o", capsize=3, label=variant)
        ax.set_xlabel("qubits")
        ax.set_ylabel("channel fidelity")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.svg, metadata={"Date": None})
        plt.close(fig)
    return 0


def _cmd_periodic_demo(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    noise, timing = cfg.noise(), cfg.timing()
    prep = prepare_periodic_state(args.n, args.period, args.offset)
    outcomes: set[int] = set()
    ideal = None
    freqs: dict[str, dict[int, float]] = {}
    tvs: dict[str, float] = {}
    for i, variant in enumerate(("unitary", "dynamic")):
        circuit = compose(prep, _builder(variant)(args.n))
        if ideal is None:
            ideal = run_exact(circuit)
            outcomes.update(ideal.probs)
        seq = _resolve_dd(cfg.dd, variant)
        filled = insert_dd(circuit, seq, timing)
        res = run_trajectories(
            filled, noise, shots=cfg.shots, seed=(cfg.seed, 5, i), timing=timing
        )
        emp = res.empirical()
        freqs[variant] = emp.probs
        outcomes.update(emp.probs)
        tvs[variant] = ideal.total_variation(emp)
        print(f"variant={variant} dd={seq} tv_from_ideal={tvs[variant]:.6f}")
    rows = [
        (
            k,
            format(k, f"0{args.n}b"),
            ideal.prob(k),
            freqs["unitary"].get(k, 0.0),
            freqs["dynamic"].get(k, 0.0),
        )
        for k in sorted(outcomes)
    ]
    if args.out:
        _write_csv(
            args.out, cfg, ["outcome", "bitstring", "ideal", "unitary", "dynamic"], rows
        )
    if args.json:
        _write_json(
            args.json,
            {
                "config": cfg.record(),
                "n": args.n,
                "period": args.period,
                "offset": args.offset,
                "tv": tvs,
            },
        )
    if args.svg:
        plt = _figure(args.svg)
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ks = [r[0] for r in rows]
        width = 0.27
        ax.bar([k - width for k in ks], [r[2] for r in rows], width, label="ideal")
        ax.bar(ks, [r[3] for r in rows], width, label="unitary")
        ax.bar([k + width for k in ks], [r[4] for r in rows], width, label="dynamic")
        ax.set_xlabel("outcome")
        ax.set_ylabel("probability")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.svg, metadata={"Date": None})
        plt.close(fig)
    return 0


def _cmd_rewrite(args: argparse.Namespace) -> int:
    if args.infile:
        with open(args.infile) as fh:
            circuit = parse_text(fh.read())
    else:
        if args.n is None:
            raise ConfigError("rewrite needs --in FILE or --n N")
        circuit = build_unitary_qft(args.n)
    report = advance_measurements(circuit, verify=args.verify)
    text = print_text(report.circuit)
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    before, after = stats(circuit), stats(report.circuit)
    print(
        f"two-qubit gates: {before.two_qubit_gate_count} -> "
        f"{after.two_qubit_gate_count} "
        f"(removed {report.removed_two_qubit_gates})",
        file=sys.stderr,
    )
    print(
        f"mid-circuit measurements: {before.mid_circuit_measurement_count} -> "
        f"{after.mid_circuit_measurement_count}",
        file=sys.stderr,
    )
    if report.unconverted_gate_indices:
        print(
            "unconverted gate indices: "
            + ", ".join(map(str, report.unconverted_gate_indices)),
            file=sys.stderr,
        )
    if report.max_total_variation is not None:
        print(
            f"worst output disagreement: {report.max_total_variation:.3g}",
            file=sys.stderr,
        )
    return 0


def _cmd_plurality(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    variant = cfg.variant if cfg.variant != "both" else "unitary"
    circuit = insert_dd(
        _builder(variant)(args.n), _resolve_dd(cfg.dd, variant), cfg.timing()
    )
    result = plurality_vote_success(
        circuit,
        shots=cfg.shots,
        seed=cfg.seed,
        noise=cfg.noise(),
        timing=cfg.timing(),
    )
    rows = [
        (
            k,
            format(k, f"0{args.n}b"),
            "" if result.modal_outcomes[k] is None else result.modal_outcomes[k],
            result.successes[k],
        )
        for k in range(1 << args.n)
    ]
    print(f"plurality success rate: {result.success_rate:.6f}")
    if args.out:
        _write_csv(args.out, cfg, ["k", "bitstring", "modal", "success"], rows)
    return 0


def _cmd_dd_table(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    variant = cfg.variant if cfg.variant != "both" else "dynamic"
    circuit = _builder(variant)(args.n)
    sequences = [s.strip() for s in args.sequences.split(",") if s.strip()]
    if not sequences:
        raise ConfigError("no sequences given")
    table = dd_effectiveness(
        circuit,
        sequences,
        noise=cfg.noise(),
        timing=cfg.timing(),
        m=cfg.m,
        shots=cfg.shots,
        seed=cfg.seed,
        mitigate=cfg.mitigate,
    )
    rows = []
    for name in sequences:
        est = table[name]
        rows.append(
            (name, est.point, est.bias_corrected, est.ci_low, est.ci_high, est.sigma_boot)
        )
        print(
            f"dd={name} fidelity={est.bias_corrected:.6f} "
            f"ci=[{est.ci_low:.6f}, {est.ci_high:.6f}]"
        )
    if args.out:
        _write_csv(
            args.out,
            cfg,
            ["sequence", "point", "bias_corrected", "ci_low", "ci_high", "sigma_boot"],
            rows,
        )
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of ExperimentConfig settings")
    p.add_argument("--variant", choices=["unitary", "dynamic", "both"])
    p.add_argument("--dd", help="none | x2 | xy4 | ur<p> | fc_dd | auto")
    p.add_argument("--m", type=int, help="sampled inputs per estimate")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mitigate", action="store_const", const=True)
    p.add_argument("--p1", type=float, help="single-qubit depolarizing probability")
    p.add_argument("--p2", type=float, help="two-qubit depolarizing probability")
    p.add_argument("--eps-ro", dest="eps_ro", type=float, help="readout flip rate")
    p.add_argument("--sigma", type=float, help="idle detuning spread (rad/ns)")
    p.add_argument("--over-rotation", dest="over_rotation", type=float)
    p.add_argument(
        "--no-ff-idle",
        dest="ff_idle",
        action="store_const",
        const=False,
        help="idle windows concurrent with feed-forward do not dephase",
    )
    p.add_argument("--t-1q-gate", dest="t_1q_gate", type=float)
    p.add_argument("--t-cphase", dest="t_cphase", type=float)
    p.add_argument("--t-measure-pulse", dest="t_measure_pulse", type=float)
    p.add_argument("--t-post-measure-delay", dest="t_post_measure_delay", type=float)
    p.add_argument("--t-ff", dest="t_ff", type=float)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynqft",
        description="Transform circuits, simulate them under noise, and "
        "certify their process fidelity.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fidelity-sweep", help="fidelity vs register size")
    _add_config_flags(p)
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--json", help="JSON sidecar path")
    p.add_argument("--svg", help="SVG plot path (needs matplotlib)")
    p.set_defaults(func=_cmd_fidelity_sweep)

    p = sub.add_parser("periodic-demo", help="peak recovery from a periodic state")
    _add_config_flags(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--period", type=int, default=4)
    p.add_argument("--offset", type=int, default=3)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--json", help="JSON sidecar path")
    p.add_argument("--svg", help="SVG plot path (needs matplotlib)")
    p.set_defaults(func=_cmd_periodic_demo)

    p = sub.add_parser("rewrite", help="advance measurements in a circuit file")
    p.add_argument("--in", dest="infile", help="circuit text file")
    p.add_argument("--n", type=int, help="or: rewrite a freshly built transform")
    p.add_argument("--out", help="write the rewritten circuit here")
    p.add_argument("--verify", action="store_true", help="check equivalence")
    p.set_defaults(func=_cmd_rewrite)

    p = sub.add_parser("plurality", help="strict plurality-vote success per input")
    _add_config_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=_cmd_plurality)

    p = sub.add_parser("dd-table", help="compare decoupling sequences")
    _add_config_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument(
        "--sequences", default="none,x2,xy4,ur10,fc_dd", help="comma separated"
    )
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=_cmd_dd_table)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
