"""Command-line entry point: ``solver <command> --config <path> [--out <dir>]``.

Exit codes: 0 success, 1 validation or solver failure, 2 usage error.
The environment variable ``SOLVER_OUT_DIR`` overrides the configured output
directory; ``--out`` overrides both.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .asymptotics import asymptotic_row, gaussian
from .checks import parity_union, scaled_correspondence
from .config import ConfigError, RunConfig, load
from .errors import CavityError
from .geometry import CavityGeometry, classify_stability, horwitz_params
from .operators import (
    MAX_PHASE_STEP,
    align_half_width,
    build_operator,
    check_unitarity,
    default_half_width,
    grid_adequacy,
    kernel_phase_step,
    make_grid,
    scaled_optics,
)
from .output import write_csv, write_json, write_pgm
from .spectrum import refine_resonance, resonance_wavelengths, solve_spectrum, spectrum_values

log = logging.getLogger("coupledcavity")

SPECTRUM_HEADER = ["index", "re_gamma", "im_gamma", "abs_gamma", "arg_gamma", "parity", "residual"]
MODE_HEADER = ["y", "re_v", "im_v", "intensity"]
TOP = 5
BEAM_TOL = 0.05
NORM_TOL = 1e-14
UNION_TOL = 1e-8
CORR_RTOL = 1e-5
CORR_COS = 0.999


def _horwitz_or_none(geom):
    if not classify_stability(geom).subcavity_unstable:
        return None
    return horwitz_params(geom)


def make_grid_for(cfg: RunConfig, geom: CavityGeometry):
    W = cfg.grid.half_width
    if W is None:
        hp = _horwitz_or_none(geom)
        W = default_half_width(hp.M if hp else 1.0)
    if cfg.grid.align_edges:
        W = align_half_width(cfg.grid.n, W)
    return make_grid(cfg.grid.n, W)


def _parity_label(p) -> str:
    return {1: "+1", -1: "-1"}.get(p, "none")


def _meta(cfg, geom, grid, kind):
    hp = _horwitz_or_none(geom)
    st = classify_stability(geom)
    return {
        "tool": "coupledcavity",
        "version": __version__,
        "operator_kind": kind,
        "geometry": geom.as_dict(),
        "grid": {
            "n": grid.n,
            "half_width": grid.half_width,
            "weight": grid.weight,
            "align_edges": cfg.grid.align_edges,
            "apodization": cfg.grid.apodization,
            "units": "a",
        },
        "horwitz": None if hp is None else {"M": hp.M, "F": hp.F, "t": hp.t},
        "stability": {
            "whole_cavity_stable": st.whole_cavity_stable,
            "subcavity_unstable": st.subcavity_unstable,
            "subcavity_stable": st.subcavity_stable,
            "half_trace_m": st.half_trace_m,
        },
    }


# --- validate -----------------------------------------------------------------

def cmd_validate(cfg: RunConfig, out: Path, stream=None) -> int:
    stream = stream or sys.stdout
    geom = cfg.geometry.build()
    kind = cfg.solve.operator_kind
    results = []

    def record(name, ok, detail):
        results.append((name, ok, detail))
        return ok

    def stability():
        st = classify_stability(geom)
        if kind in ("decoupled", "scaled") and not st.subcavity_unstable:
            return False, f"{kind} needs an unstable sub-cavity (l < R - r); l={geom.l:g}, R-r={geom.R - geom.r:g}"
        if kind in ("coupled", "parity_plus", "parity_minus") and not st.whole_cavity_stable:
            return False, f"coupled cavity needs L < 2R; L={geom.L:g}, 2R={2 * geom.R:g}"
        return True, f"m={st.half_trace_m:.6g}, L<2R={st.whole_cavity_stable}, unstable={st.subcavity_unstable}"

    grid = None

    def adequacy():
        nonlocal grid
        grid = make_grid_for(cfg, geom)
        abcd, _, lam = scaled_optics(geom)
        step = kernel_phase_step(grid, abcd, lam)
        hp = _horwitz_or_none(geom)
        ok = step < MAX_PHASE_STEP
        detail = f"kernel step {step:.3g} rad"
        if hp is not None:
            ok = ok and grid_adequacy(grid, hp.t, hp.M)
            detail += f", chirp step {grid.weight * 2 * hp.t * grid.half_width * (1 + 1 / hp.M):.3g} rad"
        return ok, detail + f" (limit {MAX_PHASE_STEP:.3g})"

    def unitarity():
        rep = check_unitarity(grid, geom)
        ok = (
            rep.mask_sum == 0.0
            and rep.mask_cross == 0.0
            and rep.norm_conservation <= NORM_TOL
            and rep.kernel_beam < BEAM_TOL
        )
        return ok, (
            f"mask_sum={rep.mask_sum:.2g} mask_cross={rep.mask_cross:.2g} "
            f"norm={rep.norm_conservation:.2g} beam={rep.kernel_beam:.3g} "
            f"spectral={rep.kernel_spectral:.3g} (info)"
        )

    def union():
        if not geom.L < 2 * geom.R:
            return True, "skipped: cavity not globally stable"
        pu = parity_union(grid, geom)
        return pu.max_distance <= UNION_TOL, f"max matched distance {pu.max_distance:.3g}"

    def correspondence():
        if _horwitz_or_none(geom) is None or not geom.L < 2 * geom.R:
            return True, "skipped: needs unstable sub-cavity and L < 2R"
        c = scaled_correspondence(grid, geom, cfg.solve.parity)
        ok = c.max_relative_error <= CORR_RTOL and c.min_cosine > CORR_COS
        return ok, f"max rel err {c.max_relative_error:.3g}, min cosine {c.min_cosine:.6f}"

    checks = [
        ("stability", stability),
        ("grid_adequacy", adequacy),
        ("unitarity", unitarity),
        ("parity_union", union),
        ("scaled_correspondence", correspondence),
    ]
    failed = None
    for name, fn in checks:
        if failed is not None:
            record(name, None, "not run")
            continue
        try:
            ok, detail = fn()
        except CavityError as exc:
            ok, detail = False, str(exc)
        record(name, ok, detail)
        if not ok:
            failed = name

    width = max(len(n) for n, _, _ in results)
    for name, ok, detail in results:
        status = "PASS" if ok else ("SKIP" if ok is None else "FAIL")
        print(f"{name:<{width}}  {status}  {detail}", file=stream)
    if failed:
        print(f"validation failed: {failed}", file=stream)
        return 1
    print("all checks passed", file=stream)
    return 0


# --- spectrum / modes ---------------------------------------------------------

def _solve(cfg: RunConfig):
    geom = cfg.geometry.build()
    grid = make_grid_for(cfg, geom)
    kind = cfg.solve.operator_kind
    op = build_operator(kind, grid, geom, cfg.solve.parity, cfg.grid.apodization)
    return geom, grid, solve_spectrum(op, geom)


def cmd_spectrum(cfg: RunConfig, out: Path, stream=None) -> int:
    stream = stream or sys.stdout
    geom, grid, res = _solve(cfg)
    kind = cfg.solve.operator_kind
    pairs = res.pairs[: cfg.solve.n_modes]
    fmts = cfg.output.formats
    rows = [
        (k, p.gamma.real, p.gamma.imag, abs(p.gamma), np.angle(p.gamma), _parity_label(p.parity), p.residual)
        for k, p in enumerate(pairs)
    ]
    write_csv(out / "spectrum.csv", SPECTRUM_HEADER, rows)
    meta = _meta(cfg, geom, grid, kind)
    meta["n_modes"] = len(pairs)

    if cfg.solve.q_range is not None:
        res_rows = []
        for k, p in enumerate(pairs):
            for q, lam in resonance_wavelengths(p.gamma, geom.l, cfg.solve.q_range):
                row = [k, q, lam]
                if cfg.solve.refine:
                    ref = refine_resonance(geom, grid, kind, k, q, cfg.solve.parity)
                    row += [ref.refined_wavelength, ref.shift]
                res_rows.append(row)
        header = ["index", "q", "wavelength"]
        if cfg.solve.refine:
            header += ["refined_wavelength", "shift"]
        write_csv(out / "resonances.csv", header, res_rows)

    if "json" in fmts:
        write_json(out / "meta.json", meta)
    if "png" in fmts:
        plotting.plot_spectrum(res.gammas, out / "spectrum.png", title=f"{kind}, n={grid.n}")
    print(f"wrote {len(rows)} eigenvalues to {out / 'spectrum.csv'}", file=stream)
    return 0


def cmd_modes(cfg: RunConfig, out: Path, modes=None, pgm=False, stream=None) -> int:
    stream = stream or sys.stdout
    geom, grid, res = _solve(cfg)
    if modes is None:
        modes = range(min(cfg.solve.n_modes, len(res)))
    n = grid.n
    coupled = res.operator_kind == "coupled"
    for k in modes:
        if not 0 <= k < len(res):
            raise IndexError(f"mode index {k} out of range (0..{len(res) - 1})")
        v = res[k].mode
        inten = np.abs(v) ** 2
        if coupled:
            rows = [
                (c + 1, grid.points[i], v[c * n + i].real, v[c * n + i].imag, inten[c * n + i])
                for c in range(2)
                for i in range(n)
            ]
            header = ["component"] + MODE_HEADER
        else:
            rows = list(zip(grid.points, v.real, v.imag, inten))
            header = MODE_HEADER
        write_csv(out / f"mode_{k}.csv", header, rows)
        if pgm or "pgm" in cfg.output.formats:
            write_pgm(out / f"mode_{k}.pgm", inten)
        if "png" in cfg.output.formats:
            plotting.plot_mode(
                grid.points, v, out / f"mode_{k}.png",
                title=f"mode {k}, gamma={res[k].gamma:.4f}", components=2 if coupled else 1,
            )
    if "json" in cfg.output.formats:
        meta = _meta(cfg, geom, grid, res.operator_kind)
        meta["modes"] = [
            {"index": k, "re_gamma": res[k].gamma.real, "im_gamma": res[k].gamma.imag,
             "parity": _parity_label(res[k].parity), "degeneracy": res[k].degeneracy}
            for k in modes
        ]
        write_json(out / "modes.json", meta)
    print(f"wrote {len(list(modes))} mode files to {out}", file=stream)
    return 0


# --- sweep --------------------------------------------------------------------

SWEEP_FIELDS = {"a": "a", "l": "l", "lambda": "lambda_"}


def cmd_sweep(cfg: RunConfig, out: Path, parameter: str, start: float, stop: float, steps: int,
              stream=None) -> int:
    stream = stream or sys.stdout
    if parameter not in SWEEP_FIELDS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_FIELDS)}")
    base = cfg.geometry.build()
    kind = cfg.solve.operator_kind
    header = ["value", "F", "t"] + [f"abs_gamma_{k}" for k in range(TOP)] + [f"arg_gamma_{k}" for k in range(TOP)] + ["error"]
    rows, ok_vals, ok_abs = [], [], []
    for value in np.linspace(start, stop, steps):
        F = t = None
        top = [None] * (2 * TOP)
        err = ""
        try:
            geom = replace(base, **{SWEEP_FIELDS[parameter]: float(value)})
            hp = _horwitz_or_none(geom)
            if hp is not None:
                F, t = hp.F, hp.t
            grid = make_grid_for(cfg, geom)
            g = spectrum_values(build_operator(kind, grid, geom, cfg.solve.parity, cfg.grid.apodization))[:TOP]
            top = list(np.abs(g)) + list(np.angle(g))
            ok_vals.append(value)
            ok_abs.append(np.abs(g))
        except CavityError as exc:
            err = f"{type(exc).__name__}: {exc}"
        rows.append([value, F, t] + top + [err])
    write_csv(out / "sweep.csv", header, rows)
    if "png" in cfg.output.formats and ok_vals:
        plotting.plot_sweep(ok_vals, ok_abs, out / "sweep.png", parameter)
    print(f"wrote {len(rows)} sweep rows to {out / 'sweep.csv'}", file=stream)
    return 0


# --- asymptotics --------------------------------------------------------------

ASYMPTOTICS_HEADER = [
    "y", "t", "M", "region",
    "re_i1", "im_i1", "re_i2", "im_i2", "re_i3", "im_i3",
    "re_leading", "im_leading", "rel_error", "additivity",
]


def cmd_asymptotics(cfg: RunConfig, out: Path, y_list, t_list, width: float = 1.0,
                    stream=None) -> int:
    stream = stream or sys.stdout
    geom = cfg.geometry.build()
    M = horwitz_params(geom).M
    g = gaussian(width)
    rows, table = [], []
    for y in y_list:
        for t in t_list:
            r = asymptotic_row(float(y), float(t), M, g)
            table.append(r)
            q = r.quadrature
            if q is None:
                rows.append([y, t, M, r.region] + [None] * 10)
                continue
            lead = r.leading
            add = abs(q.total - q.full)
            rows.append([
                y, t, M, r.region,
                q.i1.real, q.i1.imag, q.i2.real, q.i2.imag, q.i3.real, q.i3.imag,
                None if lead is None else lead.real, None if lead is None else lead.imag,
                r.relative_error, add,
            ])
    write_csv(out / "asymptotics.csv", ASYMPTOTICS_HEADER, rows)
    if "png" in cfg.output.formats:
        plotting.plot_asymptotics(table, out / "asymptotics.png")
    print(f"wrote {len(rows)} rows to {out / 'asymptotics.csv'}", file=stream)
    return 0


# --- entry point --------------------------------------------------------------

def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="solver", description="Coupled unstable strip cavity eigenmode solver")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides config and SOLVER_OUT_DIR)")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("validate", help="run unitarity, sampling and spectral cross-checks"))
    common(sub.add_parser("spectrum", help="write spectrum.csv and meta.json"))
    p = sub.add_parser("modes", help="write mode_k.csv profiles")
    common(p)
    p.add_argument("--modes", type=_ints, help="comma-separated mode indices (default: first n_modes)")
    p.add_argument("--pgm", action="store_true", help="also write 8-bit PGM intensity strips")
    p = sub.add_parser("sweep", help="sweep a, l or lambda and tabulate the top eigenvalues")
    common(p)
    p.add_argument("--parameter", required=True, choices=sorted(SWEEP_FIELDS))
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p = sub.add_parser("asymptotics", help="partial integrals vs leading stationary phase")
    common(p)
    p.add_argument("--y", type=_floats, default=[0.0, 0.5, 2.0, -2.0, 6.0])
    p.add_argument("--t", type=_floats, default=[50.0, 200.0, 800.0])
    p.add_argument("--width", type=float, default=1.0, help="Gaussian test-function width")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config)
    except (OSError, ConfigError) as exc:
        print(f"solver: config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or os.environ.get("SOLVER_OUT_DIR") or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "validate":
            return cmd_validate(cfg, out)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, out)
        if args.command == "modes":
            return cmd_modes(cfg, out, args.modes, args.pgm)
        if args.command == "sweep":
            if args.steps < 1:
                print("solver: --steps must be positive", file=sys.stderr)
                return 2
            return cmd_sweep(cfg, out, args.parameter, args.start, args.stop, args.steps)
        if args.command == "asymptotics":
            return cmd_asymptotics(cfg, out, args.y, args.t, args.width)
    except ConfigError as exc:
        print(f"solver: {exc}", file=sys.stderr)
        return 2
    except (CavityError, IndexError) as exc:
        print(f"solver: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
