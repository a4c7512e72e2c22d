"""Command-line front end.

Exit codes: 0 secure (or validation passed), 2 insecure (or validation
failed), 1 on any error.  Every CSV starts with '#' comment lines recording
the run (config digest, version, command, overrides, timestamp) and is
written to a temporary file that is renamed into place.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .keyrate import PROTOCOLS, KeyRateResult, key_rate, optimize_nu2, secure_key_capacity, sweep_distance
from .monte_carlo import estimate_observables, sample_frames, validation_table
from .scenario import ScenarioError, derive_scenario, dump_config, load_config, reference_config

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INSECURE = 2

SWEEP_FIELDS = ("delta_i_bpc", "mi_term", "multiphoton_penalty", "holevo_penalty", "f_mu_lb", "xi_ub", "nu2_opt")


class CliError(Exception):
    pass


def fmt(value) -> str:
    """Full-precision, locale-free cell text; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def load_run_config(args) -> tuple[dict, str]:
    """Flat config plus the SHA-256 of its source (file bytes or built-in defaults)."""
    if args.config:
        data = Path(args.config).read_bytes()
        raw = load_config(args.config)
    else:
        raw = reference_config()
        data = dump_config(raw).encode()
    for key, value in args.overrides:
        raw[key] = value
    return raw, hashlib.sha256(data).hexdigest()


def manifest_lines(args, digest: str, command: str) -> list[str]:
    overrides = ", ".join(f"{k}={v}" for k, v in args.overrides) or "none"
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return [
        f"tool: hdqkd {__version__}",
        f"command: {command}",
        f"config_sha256: {digest}",
        f"overrides: {overrides}",
        f"timestamp: {stamp}",
    ]


def _default_mode() -> int:
    umask = os.umask(0)
    os.umask(umask)
    return 0o666 & ~umask


def write_atomic(path: str | Path, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, _default_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(comments: list[str], header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def length_grid(lmin: float, lmax: float, step: float) -> list[float]:
    if not step > 0:
        raise CliError(f"--step must be positive, got {step}")
    if lmin < 0 or lmax < lmin:
        raise CliError(f"need 0 ≤ lmin ≤ lmax, got lmin={lmin}, lmax={lmax}")
    n = int(math.floor((lmax - lmin) / step + 1e-9))
    return [lmin + i * step for i in range(n + 1)]


def _protocol_list(text: str) -> list[str]:
    protocols = [p.strip() for p in text.split(",") if p.strip()]
    if not protocols:
        raise CliError("--protocols is empty")
    bad = [p for p in protocols if p not in PROTOCOLS]
    if bad:
        raise CliError(f"unknown protocol(s) {bad}; choose from {', '.join(PROTOCOLS)}")
    return protocols


def report(result: KeyRateResult, length_km: float) -> str:
    b = result.bounds
    lines = [
        f"protocol              {result.protocol}",
        f"length_km             {fmt(float(length_km))}",
        f"delta_I_bpc           {fmt(result.delta_I)}",
        f"  beta*I(A;B)         {fmt(result.mutual_info_term)}",
        f"  multiphoton penalty {fmt(result.multiphoton_penalty)}",
        f"  holevo penalty      {fmt(result.holevo_penalty)}",
        f"I(A;B)_mu             {fmt(result.mutual_info)}",
        f"chi_UB                {fmt(result.chi_ub)}",
        f"F_mu_LB               {fmt(b.F_mu_LB)}",
        f"xi_t_UB               {fmt(b.xi_t_UB)}",
        f"xi_omega_UB           {fmt(b.xi_omega_UB)}",
        f"n_ECC                 {fmt(result.n_ecc)}",
    ]
    if result.nu2 is not None:
        lines.append(f"nu2                   {fmt(result.nu2)}")
    lines.append(f"secure                {'yes' if result.secure else 'no'}")
    if result.cause:
        lines.append(f"cause                 {result.cause}")
    return "\n".join(lines)


def cmd_keyrate(args) -> int:
    raw, _ = load_run_config(args)
    raw["channel.length_km"] = args.length_km
    scenario = derive_scenario(raw)
    if args.protocol == "two_decoy" and args.nu2 is not None:
        result = secure_key_capacity(scenario, "two_decoy", args.nu2)
    elif args.protocol == "two_decoy" and len(scenario.protocol.decoy_levels) == 2 and not args.optimize:
        result = secure_key_capacity(scenario, "two_decoy")
    else:
        result = key_rate(scenario, args.protocol)
    print(report(result, args.length_km))
    return EXIT_OK if result.secure else EXIT_INSECURE


def _sweep_cells(result) -> list[str]:
    if not isinstance(result, KeyRateResult):
        return [""] * len(SWEEP_FIELDS)
    b = result.bounds
    return [
        fmt(result.delta_I_clamped),
        fmt(result.mutual_info_term),
        fmt(result.multiphoton_penalty),
        fmt(result.holevo_penalty),
        fmt(b.F_mu_LB),
        fmt(b.xi_UB),
        fmt(result.nu2),
    ]


def cmd_sweep(args) -> int:
    raw, digest = load_run_config(args)
    scenario = derive_scenario(raw)
    protocols = _protocol_list(args.protocols)
    lengths = length_grid(args.lmin, args.lmax, args.step)
    rows = sweep_distance(scenario, lengths, protocols, threads=args.threads)

    comments = manifest_lines(args, digest, "sweep")
    header = ["length_km"] + [f"{p}_{f}" for p in protocols for f in SWEEP_FIELDS]
    body = []
    for row in rows:
        cells = [fmt(row.length_km)]
        for p in protocols:
            result = row.results[p]
            if isinstance(result, Exception):
                comments.append(f"error: length_km={fmt(row.length_km)} {p}: {result}")
                print(f"warning: L={row.length_km} km, {p}: {result}", file=sys.stderr)
            cells += _sweep_cells(result)
        body.append(cells)
    write_atomic(args.out, render_csv(comments, header, body))
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(args.out, args.plot, title=f"μ = {scenario.mu}, d = {scenario.d:g}")
    return EXIT_OK


def cmd_optimize_nu2(args) -> int:
    raw, digest = load_run_config(args)
    scenario = derive_scenario(raw)
    lengths = length_grid(args.lmin, args.lmax, args.step)
    body = []
    for length in lengths:
        nu2, result = optimize_nu2(scenario.with_length(length))
        body.append([fmt(length), fmt(nu2), fmt(result.delta_I_clamped)])
    comments = manifest_lines(args, digest, "optimize-nu2")
    write_atomic(args.out, render_csv(comments, ["length_km", "nu2_opt", "delta_i_bpc"], body))
    if args.plot:
        from .plotting import plot_nu2

        plot_nu2(args.out, args.plot, title=f"μ = {scenario.mu}, ν₁ = {scenario.protocol.decoy_levels[0]}")
    return EXIT_OK


def cmd_mc_validate(args) -> int:
    raw, digest = load_run_config(args)
    scenario = derive_scenario(raw)
    lam = scenario.mu if args.intensity is None else args.intensity
    if args.frames < 1:
        raise CliError(f"--frames must be at least 1, got {args.frames}")
    estimate = estimate_observables(sample_frames(lam, scenario, args.seed, args.frames))
    table = validation_table(lam, scenario, estimate)

    header = ["quantity", "analytic", "empirical", "sigma", "z", "within_4sigma"]
    body = [
        [r.quantity, fmt(r.analytic), fmt(r.empirical), fmt(r.se), fmt(r.z), "yes" if r.within(4.0) else "no"]
        for r in table
    ]
    comments = manifest_lines(args, digest, "mc-validate")
    comments.append(f"intensity: {fmt(float(lam))}, frames: {args.frames}, seed: {args.seed}")
    text = render_csv(comments, header, body)
    if args.out:
        write_atomic(args.out, text)
    print(text, end="")
    return EXIT_OK if all(r.within(4.0) for r in table) else EXIT_INSECURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI config file (default: built-in reference link)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (unsigned 64-bit)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        type=_parse_override,
        default=[],
        metavar="KEY=VALUE",
        help="override a config key, e.g. --set source.mu=0.1 (repeatable)",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keyrate", help="ΔI decomposition at one distance")
    p.add_argument("--protocol", choices=PROTOCOLS, default="two_decoy")
    p.add_argument("--length-km", type=float, default=0.0)
    p.add_argument("--nu2", type=float, help="fixed ν₂ for two_decoy")
    p.add_argument("--optimize", action="store_true", help="optimise ν₂ even if the config gives one")
    p.set_defaults(func=cmd_keyrate)

    p = sub.add_parser("sweep", help="ΔI versus distance, as CSV")
    p.add_argument("--lmin", type=float, default=0.0)
    p.add_argument("--lmax", type=float, default=250.0)
    p.add_argument("--step", type=float, default=10.0)
    p.add_argument("--protocols", default="infinite,two_decoy,one_decoy,no_decoy")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="also render the curves to this image file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize-nu2", help="optimal ν₂ versus distance, as CSV")
    p.add_argument("--lmin", type=float, default=0.0)
    p.add_argument("--lmax", type=float, default=250.0)
    p.add_argument("--step", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="also render ν₂ versus distance to this image file")
    p.set_defaults(func=cmd_optimize_nu2)

    p = sub.add_parser("mc-validate", help="Monte Carlo check of P_λ, F_λ, C₁ and π₁…π₅")
    p.add_argument("--frames", type=int, default=10_000_000)
    p.add_argument("--intensity", type=float, help="mean pair number (default: μ)")
    p.add_argument("--out", help="also write the table to this CSV file")
    p.set_defaults(func=cmd_mc_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_ERROR
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (CliError, ScenarioError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
