"""Command-line front end.

Every command writes its matrices (CSV by default, or JSON with
``--format json``), a JSON report, optional SVG figures and a
``manifest.json`` into ``--out-dir``. ``mcrnorm --manifest DIR/manifest.json``
re-runs a recorded command and checks the outputs are byte-identical.

Exit codes: 0 success, 1 negative verdict (reducible matrix, interior SCF
extremum, replay mismatch), 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import kinetics as kin
from .bilinear import (
    SPECTRUM_PRESETS, NoiseSpec, add_noise, estimate_spectra, estimate_with_known, gaussian_spectra,
    get_spectrum_preset, load_spectrum_set,
)
from .csvio import read_matrix_csv, write_json, write_matrix_csv, write_matrix_json
from .datasets import MATRICES, get_matrix
from .manifest import RunManifest, sha256_file
from .matcore import estimate_rank, flipped_svd, matrix_rank_report
from .normalization import (
    NormalizationError, closure_stats, fsvt1n_external, fsvt1n_internal, internal_normalize_sum,
    normalize_rows_sum,
)
from .odeint import IntegrationError, IntegratorConfig
from .reducibility import is_irreducible
from .schemas import SchemaError
from .scf import TWO_COMPONENT_PRESETS, feasible_region_2comp, scf_boundary_study, two_component_data
from .speciation import DYE_COLUMNS, dye_model, dye_protocol, load_protocol, titrate

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

# relative singular-value threshold for the titration rank verdict; the
# speciation solve is accurate to roughly 1e-10 relative, so smaller
# ratios are solver noise
TITRATION_REL_TOL = 1e-9

NORMALIZE_KINDS = ("l1-rows", "l1-abs", "internal-sum", "fsvt1n-int", "fsvt1n-ext")


class RunContext:
    """Collects outputs and inputs of one command for the manifest."""

    def __init__(self, args, argv: list[str]):
        self.args = args
        self.argv = list(argv)
        self.out_dir = Path(args.out_dir)
        self.fmt = args.format
        self.figures = not args.no_figures
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.params: dict = {}

    def input(self, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"input file not found: {path}")
        absolute = str(p.resolve())
        self.inputs[absolute] = sha256_file(p)
        self.argv = [absolute if a == str(path) else a for a in self.argv]
        return p

    def matrix(self, stem: str, M, names=None) -> Path:
        if self.fmt == "json":
            path = write_matrix_json(self.out_dir / f"{stem}.json", M, names)
        else:
            path = write_matrix_csv(self.out_dir / f"{stem}.csv", M, names)
        self.outputs.append(path.name)
        return path

    def report(self, stem: str, obj) -> Path:
        path = write_json(self.out_dir / f"{stem}.json", obj)
        self.outputs.append(path.name)
        return path

    def figure(self, name: str, draw, *args, **kw):
        if not self.figures:
            return None
        path = draw(self.out_dir / name, *args, **kw)
        self.outputs.append(path.name)
        return path

    def manifest(self) -> RunManifest:
        outputs = {name: sha256_file(self.out_dir / name) for name in sorted(set(self.outputs))}
        return RunManifest(self.args.command, self.argv, self.params, int(self.args.seed),
                           self.inputs, outputs, __version__)


def _plots():
    from . import plotting

    return plotting


def _load_matrix(ctx: RunContext, path: str | None, preset: str | None) -> np.ndarray:
    if (path is None) == (preset is None):
        raise ValueError("give either a matrix CSV file or --matrix PRESET")
    if preset is not None:
        return get_matrix(preset)
    return read_matrix_csv(ctx.input(path))[0]


def _integrator(args) -> IntegratorConfig:
    return IntegratorConfig(args.method.upper(), abs_tol=args.abs_tol, rel_tol=args.rel_tol,
                            max_step=args.max_step, fixed_step=args.fixed_step)


def _kinetic_setup(ctx: RunContext, args):
    """(system, grid, doses, natural_steps, laws, preset_name) from the flags."""
    laws = ()
    if args.system:
        system, doses, grid = kin.load_system(ctx.input(args.system))
        natural = False
        name = None
        if grid is None:
            grid = np.linspace(0.0, 10.0, 101)
    else:
        p = kin.get_preset(args.preset)
        system, doses, grid, natural, laws, name = p.system, list(p.doses), p.grid, p.natural_steps, p.laws, p.name
    doses = list(doses) + [kin.parse_dose(d) for d in args.dose]
    if args.stop is not None or args.points is not None:
        stop = grid[-1] if args.stop is None else args.stop
        points = grid.size if args.points is None else args.points
        if points < 2:
            raise ValueError("--points must be at least 2")
        grid = np.linspace(grid[0], stop, points)
    if args.natural_steps:
        natural = True
    return system, grid, doses, natural, laws, name


# ---------------------------------------------------------------- commands

def cmd_simulate(args, ctx: RunContext) -> int:
    system, grid, doses, natural, laws, name = _kinetic_setup(ctx, args)
    cfg = _integrator(args)
    sim = kin.simulate(system, grid, cfg, doses, natural_steps=natural)
    ctx.params.update({"system": system.to_dict(), "integrator": cfg.to_dict(),
                       "doses": [d.to_dict() for d in doses], "natural_steps": natural,
                       "grid_points": int(grid.size)})
    ctx.matrix("concentrations", sim.C, list(system.species))
    ctx.matrix("times", sim.times[:, None], ["time"])

    rank = matrix_rank_report(sim.C, args.rank_tol)
    report = {
        "system": system.name or "system",
        "rows": int(sim.C.shape[0]),
        "steps_accepted": sim.steps_accepted,
        "steps_rejected": sim.steps_rejected,
        "rank": rank.to_dict(),
        "closure": closure_stats(sim.C).to_dict(),
    }
    if doses:
        report["conservation"] = "not checked: doses change the conserved totals"
    else:
        laws = list(laws) or kin.stoichiometric_conservation(system)
        res = kin.conservation_residuals(sim.C, laws)
        report["conservation"] = [{"law": law.name, "kind": law.kind, "max_residual": float(r)}
                                  for law, r in zip(laws, res)]
    if name in ("bimolecular", "bimolecular-swapped") and not doses:
        X0, Y0, Z0 = system.y0
        exact = kin.bimolecular_closed_form(system.reactions[0].k, X0, Y0, Z0, sim.times)
        report["closed_form_max_deviation"] = float(np.max(np.abs(sim.C - exact)))
    ctx.report("report", report)

    plots = _plots()
    ctx.figure("concentrations.svg", plots.line_plot, sim.times, sim.C, list(system.species),
               title=f"{system.name or 'system'} ({cfg.method})", xlabel="time", ylabel="concentration")
    ctx.figure("scree.svg", plots.scree_plot, rank.singular_values)
    print(f"{sim.C.shape[0]} rows, rank {rank.estimated_rank}, "
          f"singular values {' '.join(f'{v:.4g}' for v in rank.singular_values)}")
    if "closed_form_max_deviation" in report:
        print(f"closed-form deviation {report['closed_form_max_deviation']:.3e}")
    if isinstance(report["conservation"], list):
        for c in report["conservation"]:
            print(f"conservation {c['law']}: {c['max_residual']:.3e}")
    return EXIT_OK


def cmd_rank(args, ctx: RunContext) -> int:
    mats = [read_matrix_csv(ctx.input(p))[0] for p in args.matrices]
    widths = {m.shape[1] for m in mats}
    if len(widths) != 1:
        raise ValueError(f"stacked matrices need equal column counts, got {sorted(widths)}")
    M = np.vstack(mats)
    ctx.params.update({"rel_tol": args.rel_tol, "stacked": len(mats)})
    rank = matrix_rank_report(M, args.rel_tol)
    ctx.matrix("singular_values", rank.singular_values[:, None], ["singular_value"])
    ctx.report("rank", {"shape": list(M.shape), **rank.to_dict()})
    ctx.figure("scree.svg", _plots().scree_plot, rank.singular_values)
    print(f"rank {rank.estimated_rank} (elbow at {rank.elbow_index}) of {M.shape[0]} x {M.shape[1]}")
    return EXIT_OK


def cmd_normalize(args, ctx: RunContext) -> int:
    R = _load_matrix(ctx, args.matrix_file, args.matrix)
    ctx.params.update({"kind": args.kind, "eps": args.eps, "max_iter": args.max_iter, "rank": args.rank})
    kind = args.kind
    if kind in ("l1-rows", "l1-abs"):
        out = normalize_rows_sum(R, "plain_sum" if kind == "l1-rows" else "abs_sum")
        ctx.matrix("normalized", out)
        print(f"normalized {out.shape[0]} rows")
        return EXIT_OK
    if kind in ("internal-sum", "fsvt1n-int"):
        X, V = flipped_svd(R, args.rank)
        out = internal_normalize_sum(X) if kind == "internal-sum" else fsvt1n_internal(X)
        ctx.matrix("scores", X)
        ctx.matrix("loadings", V)
        ctx.matrix("normalized", out)
        print(f"normalized {out.shape[0]} score rows")
        return EXIT_OK
    res = fsvt1n_external(R, args.rank, args.eps, args.max_iter)
    ctx.matrix("normalized", res.normalized)
    ctx.matrix("scores", res.scores)
    ctx.report("fsvt1n", res.to_dict())
    if args.history:
        ctx.matrix("history", np.array([X[:, 0] for X in res.history]))
    print(f"iterations {res.iterations}, converged {res.converged}, cycle detected {res.cycle_detected}")
    if res.cycle_detected:
        for X in res.accumulation_points:
            print("accumulation point, first scores:", " ".join(f"{v:.5f}" for v in X[:, 0]))
    return EXIT_OK


def cmd_titrate(args, ctx: RunContext) -> int:
    if args.protocol:
        model, protocol = load_protocol(ctx.input(args.protocol))
        columns = list(range(model.ncomp, model.nspec)) or list(range(model.nspec))
    else:
        model, protocol = dye_model(), dye_protocol(args.indicator_in_titrant, args.base)
        columns = DYE_COLUMNS
    ctx.params.update({"model": model.to_dict(), "protocol": protocol.to_dict(), "rank_tol": args.rank_tol})
    res = titrate(model, protocol, warm_start=not args.cold_start)
    ctx.matrix("species", res.C, list(model.species_names))
    ctx.matrix("totals", res.c_tot, list(model.component_names))
    ctx.matrix("volumes", protocol.v_added[:, None], ["v_added"])
    s = np.linalg.svd(res.C[:, columns], compute_uv=False)
    rank = estimate_rank(s, args.rank_tol)
    verdict = "full rank" if rank.estimated_rank == len(columns) else "rank deficient"
    ctx.report("report", {
        "verdict": verdict,
        "columns": [model.species_names[j] for j in columns],
        "rank": rank.to_dict(),
        "ratios": (s / s[0]).tolist(),
        "max_mass_balance_residual": float(np.max(res.residuals)),
        "max_iterations": int(np.max(res.iterations)),
        "failed_points": res.failed_points,
    })
    plots = _plots()
    ctx.figure("species.svg", plots.line_plot, 1e3 * protocol.v_added, res.C[:, columns],
               [model.species_names[j] for j in columns], title="Titration", xlabel="added volume (mL)",
               ylabel="concentration (mol/L)")
    ctx.figure("scree.svg", plots.scree_plot, s)
    print(f"{verdict}: singular values {' '.join(f'{v:.4g}' for v in s)}")
    if not res.all_converged:
        print(f"speciation did not converge at points {res.failed_points}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_reduce(args, ctx: RunContext) -> int:
    M = _load_matrix(ctx, args.matrix_file, args.matrix)
    ctx.params.update({"threshold": args.threshold})
    res = is_irreducible(M, args.threshold)
    labels = np.empty(M.shape[0])
    for c, members in enumerate(res.components):
        labels[members] = c
    ctx.matrix("components", np.column_stack([np.arange(M.shape[0]), labels]), ["node", "component"])
    ctx.report("reduce", res.to_dict())
    print(res.to_dict()["verdict"])
    print("components:", " ".join("{" + ",".join(map(str, c)) + "}" for c in res.components))
    return EXIT_OK if res.irreducible else EXIT_NEGATIVE


def cmd_scf(args, ctx: RunContext) -> int:
    if (args.data is None) == (args.preset is None):
        raise ValueError("give either a data CSV file or --preset")
    if args.data:
        D = read_matrix_csv(ctx.input(args.data))[0]
    else:
        D = two_component_data(args.preset, args.n_times)[0]
    ctx.params.update({"grid_n": args.grid_n, "component": args.component, "preset": args.preset,
                       "n_times": args.n_times})
    region = feasible_region_2comp(D)
    study = scf_boundary_study(D, region, args.grid_n, args.component - 1)
    ctx.matrix("scf_grid", study.values)
    ctx.matrix("scf_alpha", study.alphas[:, None], ["alpha"])
    ctx.matrix("scf_beta", study.betas[:, None], ["beta"])
    ctx.report("scf", {"region": region.to_dict(), **study.to_dict()})
    a, b = study.alphas, study.betas
    marks = [(b[study.argmax[1]], a[study.argmax[0]], "max"), (b[study.argmin[1]], a[study.argmin[0]], "min")]
    ctx.figure("scf.svg", _plots().heatmap, study.values, b, a, title=f"SCF of component {args.component}",
               xlabel="beta", ylabel="alpha", mark=marks)
    print(study.verdict)
    return EXIT_OK if study.verdict == "extrema on boundary" else EXIT_NEGATIVE


def _parse_indices(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"--known expects comma-separated component indices, got {text!r}") from None


def cmd_recover(args, ctx: RunContext) -> int:
    if len(args.data) != len(args.conc):
        raise ValueError("--data and --conc must be given the same number of times")
    Ds = [read_matrix_csv(ctx.input(p))[0] for p in args.data]
    Cs, names = [], None
    for p in args.conc:
        C, names = read_matrix_csv(ctx.input(p))
        Cs.append(C)
    D, C = np.vstack(Ds), np.vstack(Cs)
    known = _parse_indices(args.known) if args.known else []
    ctx.params.update({"known": known, "rel_tol": args.rel_tol, "pairs": len(Ds)})
    ncomp = C.shape[1]
    if names is None or len(names) != ncomp:
        names = [f"c{j + 1}" for j in range(ncomp)]
    if known:
        if not args.known_spectra:
            raise ValueError("--known needs --known-spectra")
        A_known = read_matrix_csv(ctx.input(args.known_spectra))[0]
        if A_known.shape[1] == ncomp:
            A_known = A_known[:, sorted(known)]
        est = estimate_with_known(D, C, known, A_known, args.rel_tol)
        unknown = [j for j in range(ncomp) if j not in set(known)]
        out_names = [names[j] for j in unknown]
    else:
        est = estimate_spectra(D, C, args.rel_tol)
        out_names = names
    ctx.matrix("spectra", est.A, out_names)
    ctx.report("recover", {"components": out_names, "rank": est.rank, "rank_deficient": est.rank_deficient,
                           "singular_values": est.singular_values, "residual": est.residual})
    if est.A.size:
        ctx.figure("spectra.svg", _plots().line_plot, np.arange(1, est.A.shape[0] + 1), est.A, out_names,
                   title="Estimated spectra", xlabel="channel", ylabel="absorbance")
    print(f"estimated {len(out_names)} spectra, rank {est.rank}, residual {est.residual:.4g}"
          + (" (rank deficient)" if est.rank_deficient else ""))
    return EXIT_OK


def _spectrum_set(ctx: RunContext, args):
    if args.spec:
        return load_spectrum_set(ctx.input(args.spec))
    return get_spectrum_preset(args.spectra)


def cmd_spectra(args, ctx: RunContext) -> int:
    spec = _spectrum_set(ctx, args)
    A = gaussian_spectra(spec)
    ctx.params.update({"spectra": spec.to_dict()})
    ctx.matrix("spectra", A, spec.names)
    ctx.matrix("channels", spec.channels[:, None], ["channel"])
    ctx.figure("spectra.svg", _plots().line_plot, spec.channels, A, spec.names, title="Pure spectra",
               xlabel="channel", ylabel="absorbance")
    print(f"{A.shape[1]} spectra on {A.shape[0]} channels")
    return EXIT_OK


def cmd_synth(args, ctx: RunContext) -> int:
    system, grid, doses, natural, _, _ = _kinetic_setup(ctx, args)
    spec = _spectrum_set(ctx, args)
    cfg = _integrator(args)
    sim = kin.simulate(system, grid, cfg, doses, natural_steps=natural)
    A = gaussian_spectra(spec)
    if A.shape[1] != sim.C.shape[1]:
        raise ValueError(f"{sim.C.shape[1]} species but {A.shape[1]} spectra")
    noise = NoiseSpec(args.sd, args.seed)
    D = add_noise(sim.C @ A.T, noise)
    ctx.params.update({"system": system.to_dict(), "integrator": cfg.to_dict(), "spectra": spec.to_dict(),
                       "doses": [d.to_dict() for d in doses], "sd": args.sd, "natural_steps": natural})
    ctx.matrix("data", D)
    ctx.matrix("concentrations", sim.C, list(system.species))
    ctx.matrix("spectra", A, list(system.species))
    ctx.matrix("times", sim.times[:, None], ["time"])
    sc = np.linalg.svd(sim.C, compute_uv=False)
    sd_ = np.linalg.svd(D, compute_uv=False)
    ctx.report("report", {"rows": int(D.shape[0]), "channels": int(D.shape[1]), "noise_sd": args.sd,
                          "seed": int(args.seed), "singular_values_C": sc,
                          "singular_values_D": sd_[: min(10, sd_.size)]})
    ctx.figure("scree.svg", _plots().scree_plot, sd_[: min(20, sd_.size)], title="Singular values of D")
    print(f"D is {D.shape[0]} x {D.shape[1]}; singular values of C {' '.join(f'{v:.4g}' for v in sc)}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def list_presets() -> str:
    lines = ["kinetics presets (simulate, synth --preset):"]
    lines += [f"  {name:28s} {p.description}" for name, p in kin.PRESETS.items()]
    lines.append("spectrum presets (spectra, synth --spectra):")
    lines += [f"  {name:28s} {', '.join(s.names)}" for name, s in SPECTRUM_PRESETS.items()]
    lines.append("matrix presets (normalize, reduce --matrix):")
    lines += [f"  {name:28s} {m.shape[0]} x {m.shape[1]}" for name, m in MATRICES.items()]
    lines.append("two-component presets (scf --preset):")
    lines += [f"  {name}" for name in TWO_COMPONENT_PRESETS]
    lines.append("titration presets (titrate):")
    lines.append("  dye                          three monoprotic dyes in HCl titrated with NaOH")
    return "\n".join(lines)


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="noise seed (Philox key)")
    p.add_argument("--out-dir", default=d("mcrnorm-out"), help="directory for outputs")
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="matrix output format")
    p.add_argument("--no-figures", action="store_true", default=d(False), help="skip SVG figures")


def _integrator_flags(p: argparse.ArgumentParser):
    p.add_argument("--method", choices=("rk45", "rk89", "RK45", "RK89"), default="rk45")
    p.add_argument("--abs-tol", type=float, default=1e-6)
    p.add_argument("--rel-tol", type=float, default=1e-3)
    p.add_argument("--max-step", type=float, default=None)
    p.add_argument("--fixed-step", type=float, default=None, help="disable step control and use this step")


def _kinetic_flags(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", default="mm", choices=sorted(kin.PRESETS))
    src.add_argument("--system", help="reaction system JSON file")
    p.add_argument("--dose", action="append", default=[],
                   help="discrete:SPECIES:AMOUNT@TIME or continuous:SPECIES:AMOUNT[:RATE][@START]")
    p.add_argument("--stop", type=float, default=None, help="end time (uniform grid)")
    p.add_argument("--points", type=int, default=None, help="number of grid points")
    p.add_argument("--natural-steps", action="store_true", help="report every accepted solver step")
    _integrator_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcrnorm", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--manifest", help="re-run the command recorded in a manifest.json")
    parser.add_argument("--list-presets", action="store_true", help="list built-in presets and exit")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", parents=[common], help="integrate a reaction system")
    _kinetic_flags(p)
    p.add_argument("--rank-tol", type=float, default=None, help="relative singular-value threshold")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rank", parents=[common], help="singular values, rank and scree elbow")
    p.add_argument("matrices", nargs="+", help="matrix CSV files, stacked vertically")
    p.add_argument("--rel-tol", type=float, default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("normalize", parents=[common], help="external or internal normalization")
    p.add_argument("matrix_file", nargs="?", help="matrix CSV file")
    p.add_argument("--matrix", choices=sorted(MATRICES), help="built-in matrix instead of a file")
    p.add_argument("--kind", choices=NORMALIZE_KINDS, default="l1-rows")
    p.add_argument("--eps", type=float, default=1e-15)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--rank", type=int, default=None, help="number of SVD components (default: all)")
    p.add_argument("--history", action="store_true", help="write the first score vector of every iteration")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("titrate", parents=[common], help="equilibrium speciation along a titration")
    p.add_argument("--protocol", help="titration JSON file (default: dye preset)")
    p.add_argument("--indicator-in-titrant", type=float, default=0.0, help="dye concentration in the titrant")
    p.add_argument("--base", type=float, default=0.005, help="titrant NaOH concentration (mol/L)")
    p.add_argument("--rank-tol", type=float, default=TITRATION_REL_TOL)
    p.add_argument("--cold-start", action="store_true", help="start every point from the initial guess")
    p.set_defaults(func=cmd_titrate)

    p = sub.add_parser("reduce", parents=[common], help="irreducibility test of a square matrix")
    p.add_argument("matrix_file", nargs="?")
    p.add_argument("--matrix", choices=sorted(MATRICES))
    p.add_argument("--threshold", type=float, default=0.0, help="entries with |m| <= threshold count as zero")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("scf", parents=[common], help="SCF over the two-component feasible region")
    p.add_argument("data", nargs="?", help="nonnegative rank-2 data CSV")
    p.add_argument("--preset", choices=TWO_COMPONENT_PRESETS)
    p.add_argument("--n-times", type=int, default=60, help="rows of the preset data")
    p.add_argument("--grid-n", type=int, default=201)
    p.add_argument("--component", type=int, choices=(1, 2), default=1)
    p.set_defaults(func=cmd_scf)

    p = sub.add_parser("recover", parents=[common], help="least-squares spectra from D and C")
    p.add_argument("--data", action="append", required=True, help="data CSV (repeat to augment)")
    p.add_argument("--conc", action="append", required=True, help="concentration CSV, paired with --data")
    p.add_argument("--known", help="comma-separated 0-based indices of known components")
    p.add_argument("--known-spectra", help="CSV with the known spectra (or all spectra)")
    p.add_argument("--rel-tol", type=float, default=None)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("spectra", parents=[common], help="write Gaussian pure spectra")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--spectra", default="four-component", choices=sorted(SPECTRUM_PRESETS))
    g.add_argument("--spec", help="spectrum set JSON file")
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("synth", parents=[common], help="simulate C, build D = C A^T and add noise")
    _kinetic_flags(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--spectra", default="four-component", choices=sorted(SPECTRUM_PRESETS))
    g.add_argument("--spec", help="spectrum set JSON file")
    p.add_argument("--sd", type=float, default=0.0, help="noise standard deviation")
    p.set_defaults(func=cmd_synth)
    return parser


def _strip_out_dir(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out-dir":
            skip = True
            continue
        if a.startswith("--out-dir="):
            continue
        out.append(a)
    return out


def replay(path, out_dir: str | None) -> int:
    try:
        m = RunManifest.read(path)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    changed = m.changed_inputs()
    if changed:
        print(f"error: inputs changed since the run: {', '.join(changed)}", file=sys.stderr)
        return EXIT_INPUT
    target = Path(out_dir) if out_dir else Path(path).resolve().parent
    code = main(m.argv + ["--out-dir", str(target)])
    if code not in (EXIT_OK, EXIT_NEGATIVE):
        return code
    bad = m.compare_outputs(target)
    if bad:
        print(f"replay differs in {', '.join(bad)}", file=sys.stderr)
        return EXIT_NEGATIVE
    print(f"replay reproduced {len(m.outputs)} outputs byte for byte")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.list_presets:
        print(list_presets())
        return EXIT_OK
    if args.manifest:
        out = args.out_dir if any(a == "--out-dir" or a.startswith("--out-dir=") for a in argv) else None
        return replay(args.manifest, out)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    ctx = RunContext(args, _strip_out_dir(argv))
    try:
        code = args.func(args, ctx)
    except (IntegrationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NormalizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SchemaError as exc:
        print(f"error: schema violation at {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    ctx.manifest().write(ctx.out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
