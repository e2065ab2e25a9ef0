"""Command-line front end: sweeps, certification runs, Monte Carlo and single-point reports."""
from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from . import fim as _fim
from . import metrology as _met
from . import qfim as _q
from . import sim as _sim
from . import theorems as _thm
from .model import AnisotropicGaussianPSF, SourceModel
from .quadrature import QuadratureError, QuadratureSpec

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_FAIL = 0, 1, 2, 3

QUANTITIES = ("bounds-xy", "bounds-cs", "bounds-eig", "efficiency",
              "qbounds-xy", "qbounds-cs", "qbounds-eig", "qefficiency")

SWEEP_COLUMNS = """\
columns (one row per grid point, both scenarios side by side):
  s_over_sigma, s           separation in units of sigma and raw
  L0 or H0                  normalization unit 2 sigma^2/N or N/(2 sigma^2)
  bounds-xy   {blink,coflu}_L_x1, _L_x2 (raw) and _L_x1_norm, _L_x2_norm (/L0);
              blink_le_coflu = 1 when both blinking bounds are <= cofluorescent ones
  bounds-cs   {blink,coflu}_L_cc, _L_ss with c = (x1+x2)/sqrt2, s = (x2-x1)/sqrt2
  bounds-eig  {blink,coflu}_L_bb, _L_ww, _xi for the eigenparameters b, w at angle xi
  efficiency  {blink,coflu}_H_tot, _H_ind, _H_eig (raw and /H0);
              {blink,coflu}_ordered = 1 when H_tot <= H_ind <= H_eig;
              blink_ge_coflu = 1 when every blinking H is >= the cofluorescent one
  q*          the same quantities from the quantum Fisher information matrices
infinite bounds are written as inf; floats use shortest round-trip repr."""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text):
    try:
        start, stop, steps = text.split(":")
        start, stop, steps = float(start), float(stop), int(steps)
    except ValueError:
        raise UsageError(f"grid must be start:stop:steps, got {text!r}")
    if steps < 2 or not stop > start or start < 0:
        raise UsageError("grid needs 0 <= start < stop and steps >= 2")
    return np.linspace(start, stop, steps)


def parse_positions(text):
    try:
        rows = [[float(v) for v in part.split(",")] for part in text.split(";") if part.strip()]
    except ValueError:
        raise UsageError(f"cannot parse positions {text!r}")
    if not rows or len({len(r) for r in rows}) != 1:
        raise UsageError("positions must be 'a,b;c,d' with equal coordinate counts")
    return np.array(rows)


def parse_floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def build_model(args):
    """Source model from --positions/--weights, or a centred pair from --sep/--delta."""
    try:
        if args.positions:
            pos = parse_positions(args.positions)
            if args.dim is not None and pos.shape[1] != args.dim:
                raise UsageError(f"--dim {args.dim} does not match positions")
            w = parse_floats(args.weights) if args.weights else None
            return SourceModel(pos, w, args.sigma, args.photons)
        if args.weights:
            raise UsageError("--weights needs --positions")
        dim = args.dim or 1
        if dim == 1:
            return SourceModel.pair_1d(args.sep * args.sigma, args.delta, args.sigma, args.photons)
        half = 0.5 * args.sep * args.sigma
        pos = np.zeros((2, dim))
        pos[:, 0] = (-half, half)
        return SourceModel(pos, [(1 + args.delta) / 2, (1 - args.delta) / 2],
                           args.sigma, args.photons)
    except (ValueError, TypeError) as e:
        raise UsageError(str(e))


def _emit(args, text):
    if args.out and args.out != "-":
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def _matrices(model, quad, quantum=False):
    """Blinking and cofluorescent information matrices for one configuration."""
    if quantum:
        if model.dim != 1 or model.n_sources != 2:
            raise UsageError("quantum matrices are available for two 1D sources")
        s = float(np.diff(model.positions[:, 0])[0])
        d = float(model.weights[0] - model.weights[1])
        return (_q.qfim_blinking_1d(model.photons, model.sigma, d),
                _q.qfim_cofluorescent_1d(model.photons, model.sigma, d, s))
    return _fim.fim_blinking_expected(model), _fim.fim_cofluorescent(model, quad)


def _scenario_values(kind, F, L0, H0):
    out = {}
    if kind == "xy":
        rep = _met.invert_info(F)
        for lab, v in zip(rep.labels, rep.variances):
            out[f"L_{lab}"] = v
        for lab, v in zip(rep.labels, rep.variances):
            out[f"L_{lab}_norm"] = v / L0
    elif kind == "cs":
        R = _fim.rotate_fim(F, _fim.rotation_matrix(np.pi / 4), ("c", "s"))
        rep = _met.invert_info(R)
        out["L_cc"], out["L_ss"] = rep.variances
        out["L_cc_norm"], out["L_ss_norm"] = rep.variances / L0
    elif kind == "eig":
        L, rep = _met.eigen_bounds(F)
        out["L_bb"], out["L_ww"] = L[0], L[1]
        out["L_bb_norm"], out["L_ww_norm"] = L[0] / L0, L[1] / L0
        out["xi"] = rep.xi
    else:
        eff = _met.saturated_efficiency(F)
        for name in ("H_tot", "H_ind", "H_eig"):
            out[name] = getattr(eff, name.lower())
        for name in ("H_tot", "H_ind", "H_eig"):
            out[name + "_norm"] = getattr(eff, name.lower()) / H0
        out["ordered"] = eff.ordered(1e-12)
    return out


def sweep_table(quantity, grid, delta, sigma, photons, quad=QuadratureSpec()):
    quantum = quantity.startswith("q")
    kind = quantity.split("-")[-1] if "bounds" in quantity else "eff"
    L0, H0 = 2 * sigma**2 / photons, photons / (2 * sigma**2)
    header, rows = None, []
    for s in grid:
        model = SourceModel.pair_1d(s * sigma, delta, sigma, photons)
        Fb, Fc = _matrices(model, quad, quantum)
        vb = _scenario_values(kind, Fb, L0, H0)
        vc = _scenario_values(kind, Fc, L0, H0)
        row = {"s_over_sigma": s, "s": s * sigma}
        row["H0" if kind == "eff" else "L0"] = H0 if kind == "eff" else L0
        row.update({f"blink_{k}": v for k, v in vb.items()})
        row.update({f"coflu_{k}": v for k, v in vc.items()})
        if kind == "xy":
            row["blink_le_coflu"] = all(vb[k] <= vc[k] for k in vb if not k.endswith("norm"))
        if kind == "eff":
            row["blink_ge_coflu"] = all(vb[k] >= vc[k] for k in ("H_tot", "H_ind", "H_eig"))
        if header is None:
            header = list(row)
        rows.append([row[k] for k in header])
    return header, rows


def cmd_sweep(args):
    grid = parse_grid(args.grid)
    if args.quantity.startswith("q") and abs(args.delta) >= 1:
        raise UsageError("|delta| must be < 1")
    header, rows = sweep_table(args.quantity, grid, args.delta, args.sigma, args.photons)
    _emit(args, _csv(header, rows))
    return EXIT_OK


def cmd_verify(args):
    grid = parse_grid(args.grid)
    deltas = (args.delta,) if args.delta_given else (0.0, 0.25, 0.5, 0.75)
    suites = [s.strip() for s in args.suite.split(",")] if args.suite else None
    psf = None
    if args.anisotropy:
        psf = AnisotropicGaussianPSF([args.sigma, args.sigma * (1 + args.anisotropy)])
    tally = {_thm.PASS: 0, _thm.FAIL: 0, _thm.INDETERMINATE: 0}
    lines = []
    for cert in _thm.default_suite(grid, deltas, args.photons, args.sigma, psf=psf, suites=suites):
        if args.tol_rel is not None and cert.verdict != _thm.FAIL and not cert.note \
                and "tol_strict" in cert.tolerances:
            cert.verdict = _thm.verdict(cert.margin, args.tol_rel)
        tally[cert.verdict] += 1
        lines.append(cert.to_record())
    _emit(args, "\n".join(lines) + "\n")
    print(f"pass={tally[_thm.PASS]} indeterminate={tally[_thm.INDETERMINATE]} "
          f"fail={tally[_thm.FAIL]}", file=sys.stderr)
    return EXIT_FAIL if tally[_thm.FAIL] else EXIT_OK


def cmd_simulate(args):
    model = build_model(args)
    scen = _fim.Scenario(args.scenario or "cofluorescent")
    if args.trials < 2:
        raise UsageError("--trials must be at least 2")
    batch = _sim.run_batch(model, scen, args.trials, args.seed, workers=args.workers)
    _emit(args, _csv(*batch.csv_table()))
    summ = batch.summary()
    text = "".join(f"{k}={_fmt(v)}\n" for k, v in summ.items())
    if args.summary:
        _write_atomic(args.summary, text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def _matrix_rows(tag, M):
    A = np.asarray(M)
    return [[tag, lab, *A[i]] for i, lab in enumerate(M.labels)]


def cmd_fim(args):
    model = build_model(args)
    Fb, Fc = _matrices(model, QuadratureSpec())
    return _report_matrices(args, model.labels, Fb, Fc)


def cmd_qfim(args):
    model = build_model(args)
    Qb, Qc = _matrices(model, None, quantum=True)
    return _report_matrices(args, model.labels, Qb, Qc)


def _report_matrices(args, labels, Fb, Fc):
    rows = []
    if args.scenario in (None, "blinking"):
        rows += _matrix_rows("blinking", Fb)
    if args.scenario in (None, "cofluorescent"):
        rows += _matrix_rows("cofluorescent", Fc)
    _emit(args, _csv(["scenario", "row", *labels], rows))
    return EXIT_OK


def _single_point(args, kinds, quantum):
    model = build_model(args)
    Fb, Fc = _matrices(model, QuadratureSpec(), quantum)
    L0, H0 = 2 * model.sigma**2 / model.photons, model.photons / (2 * model.sigma**2)
    rows = []
    for tag, F in (("blinking", Fb), ("cofluorescent", Fc)):
        if args.scenario not in (None, tag):
            continue
        for kind in kinds:
            if kind in ("cs", "eig") and model.n_params != 2:
                continue
            for k, v in _scenario_values(kind, F, L0, H0).items():
                rows.append([tag, k, v])
    _emit(args, _csv(["scenario", "quantity", "value"], rows))
    return EXIT_OK


def cmd_bounds(args):
    return _single_point(args, ("xy", "cs", "eig"), args.quantum)


def cmd_efficiency(args):
    return _single_point(args, ("eff",), args.quantum)


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sigma", type=float, default=1.0, help="PSF width (default 1)")
    common.add_argument("--photons", type=int, default=10_000, help="photons per session N")
    common.add_argument("--delta", type=float, default=0.0,
                        help="brightness asymmetry, mu = (1 +/- delta)/2")
    common.add_argument("--sep", type=float, default=1.0, help="separation in units of sigma")
    common.add_argument("--dim", type=int, default=None, help="spatial dimension (1 or 2)")
    common.add_argument("--positions", help="explicit source positions 'a,b;c,d'")
    common.add_argument("--weights", help="relative brightnesses 'w1,w2,...'")
    common.add_argument("--scenario", choices=("blinking", "cofluorescent"))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--tol-rel", type=float, default=None,
                        help="relative strictness tolerance for certificates")
    common.add_argument("--grid", default="0.05:5:100", help="s/sigma grid start:stop:steps")

    p = _Parser(prog="blinkfim", description="Localization bounds for blinking and "
                "cofluorescent point sources.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sw = sub.add_parser("sweep", parents=[common], help="bounds or efficiency over s/sigma",
                        epilog=SWEEP_COLUMNS, formatter_class=argparse.RawDescriptionHelpFormatter)
    sw.add_argument("quantity", choices=QUANTITIES)
    sw.set_defaults(func=cmd_sweep)

    vf = sub.add_parser("verify", parents=[common], help="run inequality certificates")
    vf.add_argument("--suite", help="comma list of additivity, cohen, invariance, theorem2, "
                    "theorem4, advantage, rotation")
    vf.add_argument("--anisotropy", type=float, default=0.0,
                    help="stretch the invariance-check PSF along y by this fraction")
    vf.set_defaults(func=cmd_verify)

    sm = sub.add_parser("simulate", parents=[common], help="Monte Carlo MLE batch")
    sm.add_argument("--trials", type=int, default=200)
    sm.add_argument("--workers", type=int, default=1)
    sm.add_argument("--summary", help="write the summary record here (default stderr)")
    sm.set_defaults(func=cmd_simulate)

    for name, func, helptext in (("fim", cmd_fim, "Fisher information matrices"),
                                 ("qfim", cmd_qfim, "quantum Fisher information matrices")):
        c = sub.add_parser(name, parents=[common], help=helptext)
        c.set_defaults(func=func)
    for name, func, helptext in (("bounds", cmd_bounds, "Cramér-Rao bounds"),
                                 ("efficiency", cmd_efficiency, "H_tot, H_ind, H_eig")):
        c = sub.add_parser(name, parents=[common], help=helptext)
        c.add_argument("--quantum", action="store_true", help="use the QFIM instead of the FIM")
        c.set_defaults(func=func)
    return p


def main(argv=None):
    parser = make_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    args.delta_given = any(a == "--delta" or a.startswith("--delta=") for a in argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"blinkfim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, _met.NotPSDError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"blinkfim: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"blinkfim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"blinkfim: I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
