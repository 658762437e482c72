"""Command-line interface: ``rodhom <command> --model <path|name> ...``.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 failed
validation or verification.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .cells import CellDiscretization, SolverError, solve_correctors
from .effective import (
    EffectiveModel,
    analytic_available,
    assemble_b,
    assemble_M,
    homogenize,
    ordered_map,
    slice_mesh,
    solve_k,
)
from .io import (
    bundled_models,
    fmt,
    load_model,
    model_from_config,
    read_config,
    read_csv,
    set_parameter,
    to_json,
    write_csv,
)
from .microstructure import ModelError, NematicPrestrain, gamma_token, parse_gamma
from .section import (
    MeshError,
    build_section,
    section_moments,
    square_series_tau,
    torsion_solve,
)
from .shape import design_model, integrate_shape, inverse_design
from .tensors import TensorError, k_to_skew

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4
AGREEMENT_RTOL = 2e-2
GOLDEN_RTOL = 1e-12


class ValidationFailure(Exception):
    pass


def _prestrain_scale(model) -> float:
    """RMS size of sym B over the cell, a floor for relative curvature errors."""
    out = 0.0
    for sl in model.slices:
        mesh = slice_mesh(model, sl)
        y = np.linspace(0.0, 1.0, 16, endpoint=False) + 1.0 / 32
        B = sl.prestrain.sample(mesh, y)
        w = mesh.quad_weights
        out = max(out, float(np.sqrt(np.mean(np.sum(B ** 2, axis=-1) @ w) / w.sum())))
    return out


def k_agreement(k_a, k_b, floor: float) -> float:
    k_a, k_b = np.asarray(k_a), np.asarray(k_b)
    return float(np.max(np.abs(k_a - k_b)) / max(np.max(np.abs(k_b)), floor, 1e-300))


# ----------------------------------------------------------------------------
# commands (Python API)


def cmd_homogenize(model_name, gamma=None, refine=None, n_y=None, path: str = "both") -> dict:
    model, _ = load_model(model_name)
    if gamma is not None:
        model = model.with_gamma(parse_gamma(gamma))
    doc = {"model": model.name, "gamma": gamma_token(model.gamma)}
    run_fem = path in ("both", "fem", "auto")
    run_an = path in ("both", "analytic") or (path == "auto" and analytic_available(model))
    if run_an and not analytic_available(model):
        if path == "analytic":
            raise ModelError("closed forms need an isotropic model and gamma in {0, inf}")
        run_an = False
    fem = homogenize(model, "fem", refine, n_y) if run_fem else None
    ana = homogenize(model, "analytic", refine) if run_an else None
    doc["fem"] = fem.to_dict() if fem else None
    doc["analytic"] = ana.to_dict() if ana else None
    if fem and ana:
        floor = _prestrain_scale(model)
        dk = max(k_agreement(f.k, a.k, floor) for f, a in zip(fem.slices, ana.slices))
        dM = max(float(np.max(np.abs(f.M - a.M)) / np.max(np.abs(a.M))) for f, a in zip(fem.slices, ana.slices))
        doc["agreement"] = {"k_rel": dk, "M_rel": dM, "tolerance": AGREEMENT_RTOL,
                            "pass": bool(dk <= AGREEMENT_RTOL and dM <= AGREEMENT_RTOL)}
    return doc


def sweep_values(start=None, stop=None, steps=None, values=None) -> list:
    if values is not None:
        tokens = values.split(",") if isinstance(values, str) else list(values)
        try:
            vals = [math.inf if str(v).strip().lower() in ("inf", "infinity") else float(v) for v in tokens]
        except ValueError:
            raise ModelError(f"sweep: invalid value list {values!r}") from None
        if not vals:
            raise ModelError("sweep: empty value list")
        return vals
    if start is None or stop is None or steps is None:
        raise ModelError("sweep: give --start, --stop and --steps, or --values")
    if steps < 1:
        raise ModelError("sweep: steps must be at least 1")
    if steps > 1 and start == stop:
        raise ModelError("sweep: zero-length range")
    return list(np.linspace(float(start), float(stop), int(steps)))


SWEEP_HEADER = ["step", "value", "slice", "x1_start", "x1_end", "path", "k1", "k2", "k3", "k4", "m_density"]


def cmd_sweep(model_name, param: str, values, refine=None, n_y=None, path: str = "auto",
              gamma=None) -> tuple[list, list]:
    cfg, base = read_config(model_name)
    if gamma is not None:
        cfg = set_parameter(cfg, "gamma", parse_gamma(gamma))
    configs = [set_parameter(cfg, param, v) for v in values]
    models = [model_from_config(c, base) for c in configs]

    def run(item):
        i, model = item
        use = path
        if use == "auto":
            use = "analytic" if analytic_available(model) else "fem"
        eff = homogenize(model, use, refine, n_y, workers=1)
        return [
            (i, float(values[i]), j, s.x1_start, s.x1_end, use, *map(float, s.k),
             "" if s.m_density is None else float(s.m_density))
            for j, s in enumerate(eff.slices)
        ]

    rows = [r for block in ordered_map(run, enumerate(models)) for r in block]
    return SWEEP_HEADER, rows


def cmd_shape(model_name, gamma=None, refine=None, n_y=None, steps: int = 32, path: str = "auto"):
    """Minimizing centerline: frames solve R' = R (-K_eff)."""
    model, _ = load_model(model_name)
    if gamma is not None:
        model = model.with_gamma(parse_gamma(gamma))
    use = path
    if use == "auto":
        use = "analytic" if analytic_available(model) else "fem"
    eff = homogenize(model, use, refine, n_y)
    shape = integrate_shape([(a, b, -K) for a, b, K in eff.K_field()], steps)
    return eff, shape


def read_target(path) -> list:
    """Target table with columns x1_start, x1_end, k2, k3 (and optionally k4)."""
    header, rows = read_csv(Path(path))
    need = ["x1_start", "x1_end", "k2", "k3"]
    if [h.strip() for h in header[:4]] != need:
        raise ModelError(f"{path}: target header must start with {','.join(need)}")
    out = []
    for r in rows:
        k4 = float(r[4]) if len(r) > 4 else 0.0
        out.append((float(r[0]), float(r[1]), k_to_skew(float(r[2]), float(r[3]), k4)))
    return out


def cmd_design(target, lam: float = 1.0, mu: float = 1.0, gamma="0", refine=None, verify: str = "both"):
    """Designs for a target table and their forward verification."""
    rows = inverse_design(target)
    model = design_model(rows, lam, mu, parse_gamma(gamma), refine)
    want = np.array([K.bending() for _, _, K in target])
    report = {}
    for p in ("analytic", "fem"):
        if verify not in (p, "both"):
            continue
        eff = homogenize(model, p, refine)
        got = np.array([s.K_eff.bending() for s in eff.slices])
        err = float(np.max(np.linalg.norm(got - want, axis=1) / np.maximum(np.linalg.norm(want, axis=1), 1e-12)))
        if np.all(np.linalg.norm(want, axis=1) == 0):
            err = float(np.max(np.abs(got)))
        tol = 1e-10 if p == "analytic" else AGREEMENT_RTOL
        report[p] = {"max_rel_error": err, "tolerance": tol, "pass": bool(err <= tol)}
    return rows, report


def cmd_torsion(section: dict, refine=None, series_terms: int = 0) -> dict:
    mesh = build_section(section, refine)
    mom = section_moments(mesh)
    tor = torsion_solve(mesh)
    out = {"area": mom["area"], "I2": mom["I2"], "I3": mom["I3"], "tau": tor.tau,
           "max_abs_phi": float(np.max(np.abs(tor.phi)))}
    if series_terms and section.get("kind") == "square" and float(section.get("half_width", 1.0)) == 1.0:
        out["tau_series"] = square_series_tau(series_terms)
    return out, mesh, tor


# ----------------------------------------------------------------------------
# validation


def _golden_path():
    return Path(str(resources.files("rodhom") / "models" / "golden.json"))


def golden_values(names, refine=None) -> dict:
    """Closed-form M diagonals and k for models, as stored in the golden file."""
    out = {}
    for name in names:
        model, _ = load_model(name)
        if not analytic_available(model):
            continue
        eff = homogenize(model, "analytic", refine)
        out[name] = {
            "gamma": gamma_token(model.gamma),
            "M_diag": [float(v) for s in eff.slices for v in np.diag(s.M)],
            "k": [float(v) for s in eff.slices for v in s.k],
        }
    return out


class Report:
    def __init__(self):
        self.lines = []
        self.failed = 0

    def check(self, name: str, ok: bool, detail: str = ""):
        self.lines.append(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  {detail}" if detail else ""))
        self.failed += 0 if ok else 1

    def text(self) -> str:
        summary = f"{len(self.lines) - self.failed} passed, {self.failed} failed"
        return "\n".join(self.lines + [summary]) + "\n"


def _pythagoras(disc, rng) -> float:
    """Relative defect of inf ||F + G chi||^2 = m(F) + k.Mk for a random field F."""
    from .cells import project_prestrain

    F = rng.standard_normal((disc.n_points, 6))
    cs = solve_correctors(disc)
    M, _ = assemble_M(cs, disc)
    k = np.linalg.solve(M, assemble_b(cs, disc, F))
    x = disc.relax(F)
    R = F + disc.strain(x)
    lhs = disc.inner(R, R)
    proj = project_prestrain(disc, F)
    return abs(lhs - proj.m_density - k @ M @ k) / disc.inner(F, F)


def cmd_validate(names=None, golden=None, refine=None) -> Report:
    names = list(names) if names else bundled_models()
    rep = Report()
    rng = np.random.default_rng(20240611)

    # torsion oracles
    sq = build_section({"kind": "square"}, refine)
    t_fem = torsion_solve(sq).tau
    t_ser = square_series_tau(50)
    rel = abs(t_fem - t_ser) / t_ser
    rep.check("torsion square FEM vs series", rel <= 1e-2, f"fem={t_fem:.10f} series={t_ser:.10f} rel={rel:.3e}")
    dk = build_section({"kind": "disk"}, refine)
    td = torsion_solve(dk)
    phimax = float(np.max(np.abs(td.phi)))
    rel = abs(td.tau - np.pi / 2) / (np.pi / 2)
    rep.check("torsion disk phi = 0", phimax <= 1e-8, f"max|phi|={phimax:.3e}")
    rep.check("torsion disk tau = pi/2", rel <= 1e-2, f"rel={rel:.3e}")

    for name in names:
        model, _ = load_model(name)
        fem = homogenize(model, "fem", refine)
        for j, s in enumerate(fem.slices):
            tag = f"{name}[{j}]"
            w = np.linalg.eigvalsh(s.M)
            rep.check(f"{tag} M positive definite", w[0] > 0, f"min eig={w[0]:.6e}")
            res = np.linalg.norm(s.M @ s.k - s.b) / max(np.linalg.norm(s.b), np.linalg.norm(s.M) * 1e-16)
            rep.check(f"{tag} Mk = b", res <= 1e-10, f"res={res:.3e}")
            rep.check(f"{tag} constraints", s.info["constraint_residual"] <= 1e-10,
                      f"res={s.info['constraint_residual']:.3e}")
            rep.check(f"{tag} Galerkin orthogonality", s.info["galerkin_residual"] <= 1e-8,
                      f"res={s.info['galerkin_residual']:.3e}")
            dkp = float(np.max(np.abs(s.info["k_projection"] - s.k)) / max(np.max(np.abs(s.k)), 1.0))
            rep.check(f"{tag} projection route", dkp <= 1e-8, f"diff={dkp:.3e}")
            if s.m_density is not None:
                rep.check(f"{tag} m >= 0", s.m_density >= -1e-12, f"m={s.m_density:.10e}")
        if analytic_available(model):
            ana = homogenize(model, "analytic", refine)
            floor = _prestrain_scale(model)
            for j, (f, a) in enumerate(zip(fem.slices, ana.slices)):
                d = k_agreement(f.k, a.k, floor)
                rep.check(f"{name}[{j}] k FEM vs closed form", d <= AGREEMENT_RTOL, f"rel={d:.3e}")
                dM = float(np.max(np.abs(f.M - a.M)) / np.max(np.abs(a.M)))
                rep.check(f"{name}[{j}] M FEM vs closed form", dM <= AGREEMENT_RTOL, f"rel={dM:.3e}")
        sl = model.slices[0]
        disc = CellDiscretization(slice_mesh(model, sl, refine), sl.material, model.gamma, None,
                                  sl.prestrain.y_breaks)
        py = _pythagoras(disc, rng)
        rep.check(f"{name} Pythagoras split", py <= 1e-8, f"res={py:.3e}")
        for j, sl in enumerate(model.slices):
            if isinstance(sl.prestrain, NematicPrestrain) and sl.prestrain.variant == "splay_bend":
                b = fem.slices[j].b
                r = abs(b[3]) / np.max(np.abs(b))
                rep.check(f"{name}[{j}] splay-bend b4 = 0", r <= 1e-8, f"|b4|/|b|={r:.3e}")

    gpath = Path(golden) if golden else _golden_path()
    if gpath.is_file():
        stored = json.loads(gpath.read_text())
        current = golden_values([n for n in names if n in stored], refine)
        for name, cur in current.items():
            ref = stored[name]
            for key in ("M_diag", "k"):
                a, b = np.array(cur[key]), np.array(ref[key])
                scale = max(np.max(np.abs(b)), 1e-300)
                bad = [i for i in range(len(a)) if abs(a[i] - b[i]) > GOLDEN_RTOL * max(abs(b[i]), scale * 1e-3)] \
                    if len(a) == len(b) else list(range(max(len(a), len(b))))
                detail = "" if not bad else "; ".join(
                    f"{key}[{i}] computed={fmt(a[i]) if i < len(a) else '-'} golden={fmt(b[i]) if i < len(b) else '-'}"
                    for i in bad)
                rep.check(f"{name} golden {key}", not bad, detail)
    return rep


# ----------------------------------------------------------------------------
# argparse front end


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rodhom", description="Effective prestrained composite rods.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model_required=True):
        sp.add_argument("--model", required=model_required, help="model file or bundled model name")
        sp.add_argument("--gamma", help="scale ratio override: 0, inf or a positive real")
        sp.add_argument("--refine", type=int, help="cross-section mesh refinement")
        sp.add_argument("--ny", type=int, help="uniform Y intervals")
        sp.add_argument("--out", help="output file (default: stdout)")

    h = sub.add_parser("homogenize", help="M, b, k, K_eff and m per slice")
    common(h)
    h.add_argument("--path", choices=["both", "fem", "analytic"], default="both")

    s = sub.add_parser("sweep", help="k over a parameter range, as CSV")
    common(s)
    s.add_argument("--param", required=True, choices=["theta", "gamma", "lambda", "mu1", "mu2"])
    s.add_argument("--start", type=float)
    s.add_argument("--stop", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--values", help="comma-separated values instead of a range")
    s.add_argument("--path", choices=["auto", "fem", "analytic"], default="auto")

    sh = sub.add_parser("shape", help="minimizing centerline and frames, as CSV")
    common(sh)
    sh.add_argument("--steps", type=int, default=32, help="output steps per slice")
    sh.add_argument("--path", choices=["auto", "fem", "analytic"], default="auto")

    d = sub.add_parser("design", help="half-disk designs for a target bending table")
    d.add_argument("--target", required=True, help="CSV with x1_start,x1_end,k2,k3[,k4]")
    d.add_argument("--lam", type=float, default=1.0)
    d.add_argument("--mu", type=float, default=1.0)
    d.add_argument("--gamma", default="0")
    d.add_argument("--refine", type=int)
    d.add_argument("--verify", choices=["both", "analytic", "fem", "none"], default="both")
    d.add_argument("--out", help="design CSV (default: stdout)")

    t = sub.add_parser("torsion", help="section moments and torsional rigidity")
    common(t, model_required=False)
    t.add_argument("--section", choices=["square", "disk", "rectangle"], help="builtin section (instead of --model)")
    t.add_argument("--mesh", help="mesh file (instead of --model)")
    t.add_argument("--width", type=float, default=2.0)
    t.add_argument("--height", type=float, default=1.0)
    t.add_argument("--series", type=int, default=0, help="series terms for the square oracle")
    t.add_argument("--phi-csv", help="write nodal torsion function")

    v = sub.add_parser("validate", help="invariant suite and golden comparison")
    v.add_argument("--model", action="append", help="model (repeatable; default: all bundled)")
    v.add_argument("--golden", help="golden JSON (default: bundled)")
    v.add_argument("--refine", type=int)
    v.add_argument("--out", help="report file (default: stdout)")
    v.add_argument("--write-golden", help="write current closed-form values to this file")
    return p


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _run(args) -> int:
    if args.command == "homogenize":
        doc = cmd_homogenize(args.model, args.gamma, args.refine, args.ny, args.path)
        _emit(to_json(doc) + "\n", args.out)
        return EXIT_OK
    if args.command == "sweep":
        vals = sweep_values(args.start, args.stop, args.steps, args.values)
        header, rows = cmd_sweep(args.model, args.param, vals, args.refine, args.ny, args.path, args.gamma)
        _emit(write_csv(rows, header), args.out)
        return EXIT_OK
    if args.command == "shape":
        _, shape = cmd_shape(args.model, args.gamma, args.refine, args.ny, args.steps, args.path)
        _emit(write_csv(shape.rows(), shape.header()), args.out)
        return EXIT_OK
    if args.command == "design":
        target = read_target(args.target)
        rows, report = cmd_design(target, args.lam, args.mu, args.gamma, args.refine, args.verify)
        _emit(write_csv([(r.x1_start, r.x1_end, r.theta, r.alpha) for r in rows],
                        ["x1_start", "x1_end", "theta", "alpha"]), args.out)
        for path, r in report.items():
            print(f"{'PASS' if r['pass'] else 'FAIL'}  round trip ({path})  max rel error {r['max_rel_error']:.3e}",
                  file=sys.stderr)
        return EXIT_OK if all(r["pass"] for r in report.values()) else EXIT_VALIDATION
    if args.command == "torsion":
        if args.mesh:
            section = {"kind": "file", "path": args.mesh}
        elif args.section == "rectangle":
            section = {"kind": "rectangle", "width": args.width, "height": args.height}
        elif args.section:
            section = {"kind": args.section}
        elif args.model:
            section = load_model(args.model)[0].section
        else:
            raise ModelError("torsion: give --model, --section or --mesh")
        out, mesh, tor = cmd_torsion(section, args.refine, args.series)
        _emit("".join(f"{k} {fmt(v)}\n" for k, v in out.items()), args.out)
        if args.phi_csv:
            write_csv([(i, x, y, p) for i, ((x, y), p) in enumerate(zip(mesh.nodes, tor.phi))],
                      ["node", "x2", "x3", "phi"], args.phi_csv)
        return EXIT_OK
    if args.command == "validate":
        if args.write_golden:
            names = args.model or bundled_models()
            Path(args.write_golden).write_text(to_json(golden_values(names, args.refine)) + "\n")
            return EXIT_OK
        rep = cmd_validate(args.model, args.golden, args.refine)
        _emit(rep.text(), args.out)
        return EXIT_OK if rep.failed == 0 else EXIT_VALIDATION
    raise ModelError(f"unknown command {args.command}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except (ModelError, MeshError, TensorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
