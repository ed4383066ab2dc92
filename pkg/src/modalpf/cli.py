"""Command-line interface.

    modalpf <command> --system FILE [options]

Commands: eig, pf, pf-mc, pf-sim, resonance, normalform, simulate, verify, empirical.
Exit codes: 0 success, 1 analysis error, 2 input error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import report as rp
from .dynamics import empirical_mode_in_state, integrate, verify_conjugacy
from .eigensystem import eigendecompose
from .errors import ModalError, SchemaError
from .normalform import compute_normal_form, map_to_original, mode_in_state_nonlinear, to_modal
from .participation import (
    Method,
    ParticipationMatrix,
    classic_pf,
    mode_in_state_mc,
    state_in_mode_closed,
    state_in_mode_mc,
)
from .resonance import regime
from .sampling import InitialConditionModel, SampleStream
from .sysfile import SystemSpec, parse_system

log = logging.getLogger("modalpf")

COMMANDS = ("eig", "pf", "pf-mc", "pf-sim", "resonance", "normalform", "simulate", "verify", "empirical")
TOL_NAMES = ("distinct", "resonance", "divisor", "conjugacy", "rtol", "atol")


@dataclass
class RunConfig:
    seed: int = 0
    samples: int = 100_000
    max_order: int = 10
    epsilons: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    tolerances: dict[str, float] = field(default_factory=dict)
    format: str = "table"
    workers: int = 1
    pair_sum: bool = False
    order: int = 4
    nu: float = 1.0
    model: str = "sphere"
    scale: float = 1.0
    antithetic: bool = True
    mc: bool = False
    x0: list[float] | None = None
    t_end: float = 1.0
    dt: float = 1e-3
    method: str | None = None

    def __post_init__(self):
        if self.samples < 1 or self.workers < 1 or self.max_order < 1 or self.order < 1:
            raise SchemaError("counts (--samples, --workers, --max-order, --order) must be positive")
        for name, v in self.tolerances.items():
            if name not in TOL_NAMES:
                raise SchemaError(f"--tol: unknown tolerance {name!r} (known: {', '.join(TOL_NAMES)})")
            if not v > 0:
                raise SchemaError(f"--tol {name}: must be positive")
        if any(e <= 0 for e in self.epsilons):
            raise SchemaError("--epsilon: values must be positive")

    def icm(self, n: int) -> InitialConditionModel:
        if self.model == "sphere":
            return InitialConditionModel.uniform_sphere(n, self.scale)
        if self.model in ("box", "ellipsoid"):
            return InitialConditionModel.symmetric_set(self.model, [self.scale] * n)
        return InitialConditionModel.symmetric_product(n, self.model, self.scale)

    def stream(self) -> SampleStream:
        return SampleStream(self.seed, self.samples, self.antithetic)


@dataclass
class Output:
    doc: dict
    csv_header: list[str]
    csv_rows: list[list]
    text: str


# ---- commands ----------------------------------------------------------------------


def _eig(spec: SystemSpec, cfg: RunConfig):
    return eigendecompose(spec.linear_matrix(), cfg.tolerances.get("distinct"))


def cmd_eig(spec, cfg):
    E = _eig(spec, cfg)
    doc = {
        "eigenvalues": rp.jcomplex(E.eigenvalues),
        "right": rp.jcomplex(E.right),
        "left": rp.jcomplex(E.left),
        "biorthogonality_error": rp.jnum(E.biorthogonality_error()),
    }
    rows = [[i + 1, rp.num(l.real), rp.num(l.imag)] for i, l in enumerate(E.eigenvalues)]
    text = rp.table(["mode", "eigenvalue"], [[str(i + 1), rp.cnum(l)] for i, l in enumerate(E.eigenvalues)])
    text += "right eigenvectors (columns)\n" + _matrix_text(E.right)
    text += "left eigenvectors (rows)\n" + _matrix_text(E.left)
    return Output(doc, ["mode", "real", "imag"], rows, text)


def _matrix_text(M) -> str:
    rows = [[str(k + 1)] + [rp.cnum(v) for v in M[k]] for k in range(M.shape[0])]
    return rp.table([""] + [str(j + 1) for j in range(M.shape[1])], rows)


def _pf_output(pm, E, cfg, title):
    return Output(
        rp.pf_json(pm, E, cfg.pair_sum),
        rp.PF_CSV_HEADER,
        rp.pf_rows(pm, E, cfg.pair_sum),
        rp.pf_table(pm, E, cfg.pair_sum, title),
    )


def cmd_pf(spec, cfg):
    E = _eig(spec, cfg)
    f = spec.to_field()
    if f.nonlinear_terms():
        nf = compute_normal_form(to_modal(f, E), cfg.order, cfg.tolerances.get("divisor"))
        pm = mode_in_state_nonlinear(f, E, nf, max_order=cfg.max_order)
        title = f"mode-in-state participation (nonlinear, via {pm.provenance['theorem']})"
    else:
        pm = classic_pf(E)
        title = "mode-in-state participation"
    return _pf_output(pm, E, cfg, title)


def cmd_pf_mc(spec, cfg):
    E = _eig(spec, cfg)
    pm = mode_in_state_mc(E, cfg.icm(E.n), cfg.stream(), workers=cfg.workers)
    return _pf_output(pm, E, cfg, "mode-in-state participation, Monte-Carlo")


def cmd_pf_sim(spec, cfg):
    E = _eig(spec, cfg)
    if cfg.mc:
        icm = InitialConditionModel.uniform_sphere(E.n, cfg.scale)
        pm = state_in_mode_mc(E, icm, cfg.stream(), workers=cfg.workers)
        return _pf_output(pm, E, cfg, "state-in-mode participation, Monte-Carlo")
    return _pf_output(state_in_mode_closed(E), E, cfg, "state-in-mode participation")


def _res_json(r):
    return {"mode": r.mode + 1, "m": list(r.m), "order": r.order, "residual": rp.jnum(r.residual)}


def cmd_resonance(spec, cfg):
    E = _eig(spec, cfg)
    reg = regime(E.eigenvalues, cfg.max_order, cfg.tolerances.get("resonance"), cfg.nu)
    rep = reg.resonance
    doc = {
        "eigenvalues": rp.jcomplex(E.eigenvalues),
        "classification": rep.classification.value,
        "max_order_checked": rep.max_order_checked,
        "complete": rep.complete,
        "tol": rp.jnum(rep.tol),
        "resonances": [_res_json(r) for r in rep.entries],
        "near_resonances": [_res_json(r) for r in rep.near],
        "hyperbolic": reg.hyperbolic,
        "poincare_domain": reg.poincare_domain,
        "siegel": {
            "nu": rp.jnum(reg.siegel.nu),
            "C": rp.jnum(reg.siegel.C),
            "max_order": reg.siegel.max_order,
            "per_order": {str(k): rp.jnum(v) for k, v in reg.siegel.per_order.items()},
            "note": "finite-order diagnostic, not a proof of the Siegel condition",
        },
        "applicable_theorem": reg.applicable_theorem.value,
    }
    rows = [[r.mode + 1, " ".join(map(str, r.m)), r.order, rp.num(r.residual), "resonant"] for r in rep.entries]
    rows += [[r.mode + 1, " ".join(map(str, r.m)), r.order, rp.num(r.residual), "near"] for r in rep.near]
    text = (
        f"eigenvalues: {', '.join(rp.cnum(l) for l in E.eigenvalues)}\n"
        f"classification: {rep.classification.value} (orders 2..{rep.max_order_checked}"
        f"{', certified for all orders' if rep.complete else ''})\n"
        f"hyperbolic: {reg.hyperbolic}  poincare domain: {reg.poincare_domain}\n"
        f"siegel diagnostic: C = {rp.num(reg.siegel.C)} at nu = {rp.num(reg.siegel.nu)}\n"
        f"applicable theorem: {reg.applicable_theorem.value}\n"
    )
    if rows:
        text += rp.table(["mode", "m", "order", "residual", "kind"], [[str(v) for v in r] for r in rows])
    return Output(doc, ["mode", "exponents", "order", "residual", "kind"], rows, text)


def _terms_rows(label, terms):
    rows = []
    for (s, m), c in sorted(terms.items()):
        c = complex(c)
        rows.append([label, s + 1, " ".join(map(str, m)), rp.num(c.real), rp.num(c.imag)])
    return rows


def _terms_json(terms):
    return [
        {"component": s + 1, "exponents": list(m), "real": rp.jnum(complex(c).real),
         "imag": rp.jnum(complex(c).imag)}
        for (s, m), c in sorted(terms.items())
    ]


def cmd_normalform(spec, cfg):
    E = _eig(spec, cfg)
    f = spec.to_field()
    nf = compute_normal_form(to_modal(f, E), cfg.order, cfg.tolerances.get("divisor"))
    phi_x = map_to_original(nf.phi, E)
    doc = {
        "eigenvalues": rp.jcomplex(E.eigenvalues),
        "truncation_order": nf.truncation_order,
        "linearizes": nf.linearizes,
        "small_divisor_floor": rp.jnum(nf.small_divisor_floor),
        "phi_original": _terms_json(phi_x.terms),
        "phi_modal": _terms_json(nf.phi.terms),
        "w_modal": _terms_json(nf.w.terms),
    }
    rows = (_terms_rows("phi_original", phi_x.terms) + _terms_rows("phi_modal", nf.phi.terms)
            + _terms_rows("w_modal", nf.w.terms))
    text = (
        f"normal form to order {nf.truncation_order}: "
        f"{'linearizable (w = 0)' if nf.linearizes else 'resonant terms remain'}\n"
        "change of coordinates x -> V phi(V^-1 x), nonlinear part (original coordinates)\n"
    )
    hdr = ["map", "component", "exponents", "real", "imag"]
    text += rp.table(hdr, [[str(v) for v in r] for r in rows])
    return Output(doc, hdr, rows, text)


def _x0(spec, cfg):
    if cfg.x0 is None:
        raise SchemaError("--x0 is required for this command")
    if len(cfg.x0) != spec.dimension:
        raise SchemaError(f"--x0: expected {spec.dimension} values, got {len(cfg.x0)}")
    return np.array(cfg.x0, dtype=float)


def cmd_simulate(spec, cfg):
    f = spec.to_field()
    traj = integrate(f, _x0(spec, cfg), cfg.t_end, cfg.dt, cfg.method,
                     rtol=cfg.tolerances.get("rtol", 1e-8), atol=cfg.tolerances.get("atol", 1e-10))
    rows = [[rp.num(t), k + 1, rp.num(x[k])] for t, x in zip(traj.times, traj.states) for k in range(f.n)]
    doc = {
        "method": traj.method,
        "dt_stats": [rp.jnum(traj.dt_stats[0]), rp.jnum(traj.dt_stats[1])],
        "times": rp.jarray(traj.times),
        "states": rp.jarray(np.real(traj.states)),
    }
    final = ", ".join(rp.num(v) for v in np.real(traj.final))
    text = f"{traj.method}: {len(traj)} stored points, x({rp.num(traj.times[-1])}) = [{final}]\n"
    return Output(doc, ["t", "component", "value"], rows, text)


def cmd_verify(spec, cfg):
    E = _eig(spec, cfg)
    f = spec.to_field()
    nf = compute_normal_form(to_modal(f, E), cfg.order, cfg.tolerances.get("divisor"))
    tol = cfg.tolerances.get("conjugacy", 1e-6)
    resid, ok = verify_conjugacy(f, E, nf, _x0(spec, cfg), cfg.t_end, tol, dt=cfg.dt)
    doc = {"max_residual": rp.jnum(resid), "tol": rp.jnum(tol), "pass": ok}
    text = f"conjugacy residual {rp.num(resid)} (tol {rp.num(tol)}): {'PASS' if ok else 'FAIL'}\n"
    return Output(doc, ["max_residual", "tol", "pass"], [[rp.num(resid), rp.num(tol), ok]], text)


def cmd_empirical(spec, cfg):
    E = _eig(spec, cfg)
    f = spec.to_field()
    nf = compute_normal_form(to_modal(f, E), cfg.order, cfg.tolerances.get("divisor"))
    icm = cfg.icm(E.n)
    base = classic_pf(E)
    rows, entries, text = [], [], ""
    for eps in cfg.epsilons:
        est = empirical_mode_in_state(f, E, nf, icm, eps, cfg.stream(), workers=cfg.workers)
        labels, vals, err = rp.pf_view(_as_pm(est, base), E, cfg.pair_sum)
        dev = float(np.abs(vals - rp.pf_view(base, E, cfg.pair_sum)[1]).max())
        entries.append({"epsilon": rp.jnum(eps), "values": rp.jcomplex(vals), "stderr": rp.jcomplex(err),
                        "max_deviation_from_linear": rp.jnum(dev)})
        for k in range(vals.shape[0]):
            for i, lab in enumerate(labels):
                rows.append([rp.num(eps), k + 1, lab, _cell(vals[k, i]), _cell(err[k, i])])
        text += f"epsilon = {rp.num(eps)}: max |p_emp - p_linear| = {rp.num(dev)}\n"
    doc = {"modes": labels, "linear": rp.jcomplex(rp.pf_view(base, E, cfg.pair_sum)[1]), "ladder": entries,
           "seed": cfg.seed, "samples": cfg.samples}
    return Output(doc, ["epsilon", "state", "mode", "value", "stderr"], rows, text)


def _cell(z):
    return rp.num(complex(z).real) if complex(z).imag == 0 else rp.cnum(z)


def _as_pm(est, base):
    return ParticipationMatrix(est.values, base.kind, Method.MONTE_CARLO, est.stderr)


HANDLERS = {
    "eig": cmd_eig,
    "pf": cmd_pf,
    "pf-mc": cmd_pf_mc,
    "pf-sim": cmd_pf_sim,
    "resonance": cmd_resonance,
    "normalform": cmd_normalform,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "empirical": cmd_empirical,
}


def run(command: str, spec: SystemSpec, cfg: RunConfig) -> tuple[str, int]:
    """Execute ``command`` and return ``(rendered output, exit code)``.

    Errors from the analysis modules are rendered as a one-line message on the
    returned text; the exit code is 1 for analysis errors and 2 for input errors.
    """
    try:
        out = HANDLERS[command](spec, cfg)
    except ModalError as exc:
        return f"error [{exc.code}]: {exc}\n", 2 if exc.input_error else 1
    doc = {"command": command, "system": spec.name, **out.doc}
    if cfg.format == "json":
        return rp.dump_json(doc), 0
    if cfg.format == "csv":
        return rp.dump_csv(out.csv_header, out.csv_rows), 0
    return f"[{command}] {spec.name}\n" + out.text, 0


# ---- argument parsing --------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}")


def _tol(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name!r}: {value!r} is not a number")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", required=True, help="system definition file (YAML/JSON)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=100_000)
    common.add_argument("--max-order", type=int, default=10)
    common.add_argument("--order", type=int, default=4, help="normal-form truncation order")
    common.add_argument("--epsilon", type=_floats, default=[0.2, 0.1, 0.05, 0.025],
                        help="amplitude ladder, e.g. '0.2,0.1,0.05'")
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--pair-sum", action="store_true", help="combine complex-conjugate mode pairs")
    common.add_argument("--tol", type=_tol, action="append", default=[], metavar="NAME=VALUE",
                        help=f"override a tolerance ({', '.join(TOL_NAMES)})")
    common.add_argument("--nu", type=float, default=1.0, help="Siegel exponent for the diagnostic")
    common.add_argument("--model", choices=("sphere", "uniform", "gaussian", "rademacher", "box", "ellipsoid"),
                        default="sphere", help="initial-condition model")
    common.add_argument("--scale", type=float, default=1.0, help="radius / half-width / sigma of the model")
    common.add_argument("--no-antithetic", dest="antithetic", action="store_false")
    common.add_argument("--mc", action="store_true", help="pf-sim: Monte-Carlo estimate instead of closed form")
    common.add_argument("--x0", type=_floats, default=None, help="initial state, e.g. '0.3,0.1'")
    common.add_argument("--t-end", type=float, default=1.0)
    common.add_argument("--dt", type=float, default=1e-3)
    common.add_argument("--method", choices=("rk4", "rk45"), default=None)
    common.add_argument("--output", default=None, help="write to this file (atomically) instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="modalpf", description="Modal participation analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "eig": "eigenvalues and biorthonormal eigenvectors",
        "pf": "mode-in-state participation factors (closed form)",
        "pf-mc": "mode-in-state participation factors, Monte-Carlo over initial states",
        "pf-sim": "state-in-mode participation factors (uniform sphere)",
        "resonance": "resonances, hyperbolicity and applicable linearization theorem",
        "normalform": "normal-form change of coordinates and resonant remainder",
        "simulate": "integrate the system from --x0",
        "verify": "check the normal-form conjugacy along a trajectory",
        "empirical": "nonlinear mode-in-state participation over an amplitude ladder",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".modalpf-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = parse_system(args.system)
        cfg = RunConfig(
            seed=args.seed, samples=args.samples, max_order=args.max_order, epsilons=args.epsilon,
            tolerances=dict(args.tol), format=args.format, workers=args.workers, pair_sum=args.pair_sum,
            order=args.order, nu=args.nu, model=args.model, scale=args.scale, antithetic=args.antithetic,
            mc=args.mc, x0=args.x0, t_end=args.t_end, dt=args.dt, method=args.method,
        )
    except ModalError as exc:
        sys.stderr.write(f"error [{exc.code}]: {exc}\n")
        return 2
    try:
        text, code = run(args.command, spec, cfg)
    except ValueError as exc:
        sys.stderr.write(f"error [input]: {exc}\n")
        return 2
    if code:
        sys.stderr.write(text)
        return code
    _write(text, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
