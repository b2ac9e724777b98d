"""Command-line front end: ``uwbnbi {env,specgram,outage,linksim,report}``.

Every run writes ``<primary output stem>.manifest.json`` last, listing its
inputs, parameters, seed, tool version and every file it produced.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__

PRESETS = {
    "hirate-los": {"rate": [124.75e6], "interval": 40.96e-6, "env": "office_los", "channel": 3},
    "lorate-nlos": {"rate": [31.25e3, 110e3, 250e3], "interval": 30e-3, "env": "office_nlos",
                    "channel": 3},
}
PLOT_FLOOR = 1e-4


class CliError(Exception):
    pass


def _parse_distances(text: str) -> list[float]:
    """``a:b:step`` (inclusive of b), or a comma-separated list."""
    try:
        if ":" in text:
            a, b, step = (float(v) for v in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 10) for i in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad distance spec {text!r}; use a:b:step or d1,d2,...") from None


def _manifest(args, primary: Path, inputs, outputs, params) -> Path:
    path = primary.with_name(primary.stem + ".manifest.json")
    missing = [str(p) for p in outputs if not Path(p).exists()]
    if missing:
        raise CliError(f"outputs not written: {missing}")
    doc = {
        "subcommand": args.command,
        "inputs": [str(p) for p in inputs],
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs] + [str(path)],
    }
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n")
    return path


def _plot_setup():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.fonttype"] = "none"
    plt.rcParams["svg.hashsalt"] = "uwbnbi"
    return plt


def _floor(values):
    return np.maximum(np.asarray(values, dtype=float), PLOT_FLOOR)


# ---------------------------------------------------------------------------

def cmd_env(args) -> int:
    from .envgen import EnvironmentSpec, export_iq, synth_environment
    from .scenarios import CHAIN_SPACING_HZ, chain_centers

    try:
        raw = json.loads(Path(args.spec).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.spec}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise CliError(f"cannot read {args.spec}: {exc.strerror}")
    if not isinstance(raw, dict):
        raise CliError(f"{args.spec}: top level must be an object")
    try:
        spec = EnvironmentSpec.from_dict(raw)
    except KeyError as exc:
        raise CliError(f"{args.spec}: missing field {exc.args[0]!r}")
    except (TypeError, ValueError) as exc:
        raise CliError(f"{args.spec}: {exc}")
    if args.seed is not None:
        spec = EnvironmentSpec(spec.noise_psd_dbm_per_mhz, spec.duration_s, args.seed, spec.emitters)
    out = Path(args.out)
    outputs = []
    if args.chains == 1:
        targets = [(args.chain_cf, out)]
    else:
        targets = [(cf, out.with_name(f"{out.stem}_c{i}{out.suffix}"))
                   for i, cf in enumerate(chain_centers(args.chain_cf, args.chains, CHAIN_SPACING_HZ))]
    for cf, path in targets:
        try:
            cap = synth_environment(spec, cf, args.chain_rate,
                                    out_of_band="error" if args.chains == 1 else "clip")
        except ValueError as exc:
            raise CliError(str(exc))
        outputs.extend(export_iq(cap, path))
    args.seed = spec.seed
    _manifest(args, out, [args.spec], outputs,
              {"chain_cf_hz": args.chain_cf, "chain_rate_hz": args.chain_rate, "chains": args.chains,
               "environment": spec.to_dict()})
    return 0


def cmd_specgram(args) -> int:
    from .envgen import import_iq
    from .specgram import compute_spectrogram, save_grid, stitch

    if len(args.inputs) > 1 and not args.stitch:
        raise CliError("several captures given; pass --stitch to join them")
    grids = []
    rates = set()
    for p in args.inputs:
        try:
            cap = import_iq(p)
        except (OSError, ValueError) as exc:
            raise CliError(str(exc))
        rates.add(cap.sample_rate_hz)
        grids.append(compute_spectrogram(cap, args.nfft))
    if len(rates) > 1:
        raise CliError(f"captures have different sample rates: {sorted(rates)}")
    try:
        grid = stitch(grids, args.keep) if args.stitch else grids[0]
    except ValueError as exc:
        raise CliError(str(exc))
    out = save_grid(grid, args.out)
    _manifest(args, out, args.inputs, [out],
              {"nfft": args.nfft, "stitch": args.stitch, "keep_fraction": args.keep,
               "df_hz": grid.df_hz, "dt_s": grid.dt_s, "n_time": grid.n_time, "n_freq": grid.n_freq})
    return 0


def _apply_preset(args):
    if args.preset:
        p = PRESETS[args.preset]
        args.rate = args.rate or p["rate"]
        args.interval = args.interval or p["interval"]
        args.env = args.env or p["env"]
        args.channel = args.channel or p["channel"]
    missing = [f"--{k}" for k in ("rate", "interval", "env", "channel") if getattr(args, k) in (None, [])]
    if missing:
        raise CliError(f"missing {', '.join(missing)} (or choose a --preset)")


def cmd_outage(args) -> int:
    from .capacity import outage_curve
    from .propagation import NoiseModel, channel_plan, load_pathloss
    from .specgram import load_grid

    _apply_preset(args)
    try:
        grid = load_grid(args.grid)
        plan = channel_plan(args.channel)
        plp = load_pathloss(args.env)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc))
    nm = NoiseModel(args.noise)
    out = Path(args.out)
    curves, outputs = [], []
    for rate in args.rate:
        path = out if len(args.rate) == 1 else out.with_name(f"{out.stem}_{rate:g}bps{out.suffix}")
        try:
            curve = outage_curve(grid, plan, plp, nm, rate, args.interval, args.dist)
        except ValueError as exc:
            raise CliError(str(exc))
        outputs.extend(curve.write(path))
        curves.append(curve)
    if args.plot:
        plt = _plot_setup()
        fig, ax = plt.subplots(figsize=(6, 4))
        for c in curves:
            tag = f" {c.rate_bps / 1e6:g} Mbps" if len(curves) > 1 else ""
            line, = ax.semilogy(c.distances_m, _floor(c.pout_suppressed), ":", marker="o",
                                label=f"suppressed{tag}")
            ax.semilogy(c.distances_m, _floor(c.pout_unsuppressed), "-", marker="s",
                        color=line.get_color(), label=f"unsuppressed{tag}")
        ax.set_xlabel("Distance (m)")
        ax.set_ylabel("Outage probability (-)")
        ax.set_ylim(PLOT_FLOOR / 2, 1.5)
        ax.set_title(f"Channel {plan.id}, {args.env}, T = {args.interval * 1e6:g} us")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, format="svg", metadata={"Date": None})
        plt.close(fig)
        outputs.append(Path(args.plot))
    _manifest(args, out, [args.grid], outputs,
              {"preset": args.preset, "channel": args.channel, "rate_bps": args.rate,
               "interval_s": args.interval, "environment": args.env, "distances_m": args.dist,
               "noise_dbm_per_mhz": args.noise})
    return 0


def cmd_linksim(args) -> int:
    from .envgen import import_iq
    from .fbmcss.filterbank import FbmcConfig
    from .fbmcss.link import simulate_sweep, write_fer_csv, write_link_json
    from .propagation import NoiseModel, channel_plan, load_pathloss
    from .specgram import load_grid

    if args.trials < 1:
        raise CliError("--trials must be at least 1")
    if args.grid and args.interference:
        raise CliError("give either --grid or --interference, not both")
    try:
        plan = channel_plan(args.channel)
        plp = load_pathloss(args.env)
        interference = None
        if args.grid:
            interference = load_grid(args.grid)
        elif args.interference:
            interference = import_iq(args.interference)
        cfg = FbmcConfig(channel=plan.id)
        modes = ("on", "off") if args.suppression == "both" else (args.suppression,)
        res = simulate_sweep(cfg, interference, args.dist, plp, NoiseModel(args.noise), args.trials,
                             args.seed, modes, plan, args.env)
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(str(exc))
    results = [r for m in modes for r in res[m]]
    out = write_link_json(results, args.out)
    outputs = [out]
    if args.fer_csv:
        if len(modes) != 2:
            raise CliError("--fer-csv needs --suppression both")
        outputs.append(write_fer_csv(res["on"], res["off"], args.fer_csv))
    inputs = [p for p in (args.grid, args.interference) if p]
    _manifest(args, out, inputs, outputs,
              {"channel": plan.id, "environment": args.env, "distances_m": args.dist,
               "trials": args.trials, "suppression": args.suppression,
               "noise_dbm_per_mhz": args.noise, "config": cfg.to_dict()})
    return 0


def _read_curve_csv(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise CliError(f"{path}: no data rows")
    cols = set(rows[0])
    if {"distance_m", "pout_suppressed", "pout_unsuppressed"} <= cols:
        keys, kind = ("pout_suppressed", "pout_unsuppressed"), "outage"
    elif {"distance_m", "fer_suppressed", "fer_unsuppressed"} <= cols:
        keys, kind = ("fer_suppressed", "fer_unsuppressed"), "FER"
    else:
        raise CliError(f"{path}: unrecognised columns {sorted(cols)}")
    d = [float(r["distance_m"]) for r in rows]
    return kind, d, [float(r[keys[0]]) for r in rows], [float(r[keys[1]]) for r in rows]


def cmd_report(args) -> int:
    curves = []
    for p in args.inputs:
        try:
            curves.append((Path(p), *_read_curve_csv(Path(p))))
        except OSError as exc:
            raise CliError(f"cannot read {p}: {exc.strerror}")
    plt = _plot_setup()
    fig, ax = plt.subplots(figsize=(6, 4))
    for path, kind, d, sup, unsup in curves:
        line, = ax.semilogy(d, _floor(sup), ":" if kind == "outage" else "--", marker="o",
                            label=f"{kind} suppressed ({path.stem})")
        ax.semilogy(d, _floor(unsup), "-", marker="s", color=line.get_color(),
                    label=f"{kind} unsuppressed ({path.stem})")
    ax.set_xlabel("Distance (m)")
    ax.set_ylabel("Outage probability / FER (-)")
    ax.set_ylim(PLOT_FLOOR / 2, 1.5)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    _manifest(args, out, args.inputs, [out], {"floor": PLOT_FLOOR})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uwbnbi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("env", help="synthesize an interference environment as IQ")
    p.add_argument("spec", help="environment JSON")
    p.add_argument("--out", required=True, help="IQ payload path; sidecar goes next to it")
    p.add_argument("--seed", type=int, default=None, help="override the seed in the environment file")
    p.add_argument("--chain-cf", type=float, default=3993.6e6, help="chain centre frequency, Hz")
    p.add_argument("--chain-rate", type=float, default=200e6, help="chain sample rate, Hz")
    p.add_argument("--chains", type=int, default=1, help="adjacent chains spaced 160 MHz apart")
    p.set_defaults(func=cmd_env)

    p = sub.add_parser("specgram", help="calibrated spectrogram of one or more captures")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stitch", action="store_true")
    p.add_argument("--nfft", type=int, default=8192)
    p.add_argument("--keep", type=float, default=0.8, help="kept fraction of each chain's bins")
    p.set_defaults(func=cmd_specgram)

    p = sub.add_parser("outage", help="outage probability versus distance")
    p.add_argument("--grid", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--channel", type=int, choices=[1, 2, 3, 4])
    p.add_argument("--rate", type=float, nargs="+", help="bit rate(s), bps")
    p.add_argument("--interval", type=float, help="packet interval, s")
    p.add_argument("--env", help="path-loss environment")
    p.add_argument("--dist", type=_parse_distances, default=_parse_distances("1:20:1"))
    p.add_argument("--noise", type=float, default=-107.0, help="equipment noise, dBm/MHz")
    p.add_argument("--out", required=True)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_outage)

    p = sub.add_parser("linksim", help="FBMC-SS link simulation")
    p.add_argument("--grid")
    p.add_argument("--interference", help="IQ capture at the modem sample rate")
    p.add_argument("--channel", type=int, choices=[1, 2, 3, 4], default=3)
    p.add_argument("--env", default="office_los")
    p.add_argument("--dist", type=_parse_distances, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--suppression", choices=["on", "off", "both"], default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=-107.0, help="equipment noise, dBm/MHz")
    p.add_argument("--out", required=True)
    p.add_argument("--fer-csv")
    p.set_defaults(func=cmd_linksim)

    p = sub.add_parser("report", help="overlay outage and FER CSVs in one SVG")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"uwbnbi {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
