"""Command-line interface.

Subcommands: embed, foliate, solve-u, solve-w, mass, verify, report.
Exit codes: 0 success (verify: all checks pass), 1 verification failure,
2 admissibility/usage failure, 3 solver non-convergence, 4 I/O failure.
"""

import argparse
import json
import sys

import numpy as np

from .surface import AdmissibilityError, SurfaceSpec
from .embedding import EmbeddingError
from .flows import FlowError
from .foliation import frame_at
from .pipeline import Pipeline, RunConfig

EXIT_VERIFY = 1
EXIT_ADMISSIBILITY = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def build_parser():
    p = argparse.ArgumentParser(
        prog="hypermass",
        description="Quasi-local energy-momentum of a closed 2-surface via "
                    "isometric embedding into hyperbolic space.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--input", help="surface spec file (JSON)")
        sp.add_argument("--preset", help="preset surface instead of --input "
                        "(sphere, spheroid, saddle_band)")
        sp.add_argument("--preset-params", default="{}",
                        help='preset parameters as JSON, e.g. \'{"R": 1.0}\'')
        sp.add_argument("--hsource", default="h0_fraction:1.0",
                        help="mean-curvature source for presets: 'flat', "
                        "'h0_fraction:X', or 'const:X'")
        sp.add_argument("--kappa", type=float, default=1.0)
        sp.add_argument("--ntheta", type=int, default=32)
        sp.add_argument("--npsi", type=int, default=32)
        sp.add_argument("--rmax", type=float, default=None)
        sp.add_argument("--steps", type=int, default=200)
        sp.add_argument("--strategy", default="auto",
                        choices=["auto", "geodesic_sphere", "axisymmetric",
                                 "general"])
        sp.add_argument("--out", default="out")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol-defect", type=float, default=1e-6)
        sp.add_argument("--tol-mono", type=float, default=1e-6)

    for name, helptext in [
            ("embed", "solve the isometric embedding and dump the node table"),
            ("foliate", "dump leaf geometry at sampled radii"),
            ("solve-u", "run the lapse flow and dump u.csv"),
            ("solve-w", "run the weight flow and dump w.csv"),
            ("mass", "full pipeline: mass profile, energy-momentum, report"),
            ("verify", "run the invariant battery (nonzero exit on failure)"),
            ("report", "mass pipeline plus rendered figures")]:
        sp = sub.add_parser(name, help=helptext)
        common(sp)
    return p


def _parse_hsource(text):
    if text == "flat":
        return {"type": "flat"}
    if text.startswith("h0_fraction:"):
        return {"type": "h0_fraction", "fraction": float(text.split(":", 1)[1])}
    if text.startswith("const:"):
        return {"type": "riemannian", "H": float(text.split(":", 1)[1])}
    raise ValueError(f"unknown hsource '{text}'")


def _config_from_args(args):
    spec = None
    input_path = None
    if args.input:
        input_path = args.input
    elif args.preset:
        params = json.loads(args.preset_params)
        spec = SurfaceSpec.from_preset(args.preset, params, args.ntheta,
                                       args.npsi,
                                       hsource=_parse_hsource(args.hsource),
                                       kappa=args.kappa)
    else:
        raise ValueError("provide --input FILE or --preset NAME")
    return RunConfig(input_path=input_path, spec=spec, kappa=args.kappa,
                     ntheta=args.ntheta, npsi=args.npsi, r_max=args.rmax,
                     steps=args.steps, strategy=args.strategy,
                     out_dir=args.out, seed=args.seed,
                     tol_defect=args.tol_defect, tol_mono=args.tol_mono)


def _cmd_embed(pipe):
    es = pipe.embedding
    path = pipe.write_embedding_table()
    print(f"strategy {es.strategy}: defect {es.defect:.3e} "
          f"(certified {es.certified}), lambda margin {es.lambda_margin():.4g}")
    print(f"wrote {path}")
    return 0


def _cmd_foliate(pipe):
    import os

    es = pipe.embedding
    kappa = pipe.cfg.kappa
    grid = es.grid
    path = os.path.join(pipe.cfg.out_dir, "foliation.tsv")
    radii = np.linspace(0.0, pipe.cfg.r_max, 9)
    cols = ["r", "theta", "psi", "x1", "x2", "x3", "t", "H0", "Rr",
            "lambda1", "lambda2"]
    with open(path, "w") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in radii:
            fr = frame_at(es, kappa, float(r))
            for i in range(grid.ntheta):
                for j in range(grid.npsi):
                    row = [r, grid.theta[i], grid.psi[j], *fr.X_r[i, j],
                           fr.H0[i, j], fr.Rr[i, j], fr.lam1[i, j],
                           fr.lam2[i, j]]
                    fh.write("\t".join(f"{v:.17g}" for v in row) + "\n")
    print(f"wrote {path}")
    return 0


def _cmd_solve_u(pipe):
    u = pipe.u_flow
    path = pipe.write_u_csv()
    print(f"v_inf mean {float(np.mean(u.v_infty)):.6g}; wrote {path}")
    return 0


def _cmd_solve_w(pipe):
    pipe.u_flow
    path = pipe.write_w_csv()
    print(f"wrote {path}")
    return 0


def _cmd_mass(pipe):
    report = pipe.mass_report()
    pipe.write_embedding_table()
    pipe.write_u_csv()
    pipe.write_w_csv()
    pipe.write_mass_csv(report)
    path = pipe.write_report(report)
    print(f"P = {np.array2string(report.em.P, precision=8)}")
    print(f"causal class: {report.em.causal.value}")
    print(f"monotone: {report.mono.passed} "
          f"(worst increment {report.mono.worst_increment:.3e})")
    print(f"wrote {path}")
    return 0


def _cmd_verify(pipe):
    from .verify import run_verification

    checks = run_verification(pipe)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 0 if not failed else EXIT_VERIFY


def _cmd_report(pipe):
    from . import plots

    report = pipe.mass_report()
    pipe.write_embedding_table()
    pipe.write_u_csv()
    pipe.write_w_csv()
    pipe.write_mass_csv(report)
    path = pipe.write_report(report)
    print(f"P = {np.array2string(report.em.P, precision=8)}")
    print(f"causal class: {report.em.causal.value}")
    print(f"wrote {path}")
    for figure in (plots.plot_mass_profile(pipe, report),
                   plots.plot_decay(pipe),
                   plots.plot_curvature(pipe)):
        print(f"wrote {figure}")
    return 0


COMMANDS = {
    "embed": _cmd_embed,
    "foliate": _cmd_foliate,
    "solve-u": _cmd_solve_u,
    "solve-w": _cmd_solve_w,
    "mass": _cmd_mass,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        pipe = Pipeline(cfg)
        return COMMANDS[args.command](pipe)
    except AdmissibilityError as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (EmbeddingError, FlowError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY


if __name__ == "__main__":
    sys.exit(main())
