"""Command-line entry point: ``dhs spectrum | bounds | verify | abstract``.

Exit codes: 0 success, 1 a bound or identity failed, 2 usage, configuration
or input error, 3 eigensolver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from . import __version__
from .abstract import verify_batch
from .bounds import (
    ANALYTIC_REL_TOL,
    TolerancePolicy,
    all_passed,
    exact_rhs_vector,
    geometric_max,
    reports_to_csv,
    run_suite,
)
from .complex.assembly import build_complex
from .errors import CapabilityError, DHSError, IdentityViolationError, InputError, SolverError
from .manifold.backend import circle_backend, shrinker_residual, sphere_backend
from .manifold.curvature import mesh_backend
from .manifold.meshes import read_mesh
from .spectrum import (
    DEFAULT_SEED,
    Spectrum,
    analytic_sphere_spectrum,
    coordinate_eigenfunction_check,
    solve_degree,
)

log = logging.getLogger("dhs")

# relative tolerance for discrete spectra on meshes with no closed-form oracle
MESH_DEFAULT_REL_TOL = 1e-2
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


@dataclass(frozen=True)
class GeometrySpec:
    kind: str  # sphere | circle | mesh
    m: int | None = None
    res: int | None = None
    radius_sq: float | None = None
    path: str | None = None

    def label(self) -> str:
        if self.kind == "mesh":
            return f"mesh:{self.path}"
        parts = [self.kind if self.kind == "circle" else f"sphere:m={self.m}"]
        if self.res is not None:
            parts.append(f"res={self.res}")
        if self.radius_sq is not None:
            parts.append(f"r2={self.radius_sq!r}")
        return ":".join(parts)


def parse_geometry(text: str) -> GeometrySpec:
    """Parse ``sphere:m=<int>[:res=<int>][:r2=<float>]``, ``circle[:res=<int>]`` or ``mesh:<path>``."""
    if text.startswith("mesh:"):
        path = text[5:]
        if not path:
            raise InputError("mesh geometry needs a path")
        return GeometrySpec("mesh", path=path)
    head, *opts = text.split(":")
    if head not in ("sphere", "circle"):
        raise InputError(f"unknown geometry {text!r}")
    kv = {}
    for opt in opts:
        key, sep, val = opt.partition("=")
        if not sep or key not in ("m", "res", "r2"):
            raise InputError(f"bad geometry option {opt!r}")
        kv[key] = val
    try:
        m = int(kv["m"]) if "m" in kv else (1 if head == "circle" else None)
        res = int(kv["res"]) if "res" in kv else None
        r2 = float(kv["r2"]) if "r2" in kv else None
    except ValueError as exc:
        raise InputError(f"bad number in geometry {text!r}") from exc
    if head == "sphere" and (m is None or m < 1):
        raise InputError("sphere geometry needs m=<int> with m >= 1")
    if head == "circle" and m != 1:
        raise InputError("circle has m = 1")
    return GeometrySpec(head, m=m, res=res, radius_sq=r2)


def make_backend(spec: GeometrySpec):
    if spec.kind == "mesh":
        return mesh_backend(read_mesh(spec.path))
    if spec.kind == "circle":
        return circle_backend(samples=spec.res or 256, radius_sq=spec.radius_sq or 1.0)
    return sphere_backend(spec.m, samples=spec.res, radius_sq=spec.radius_sq)


def blas_limits(threads: int):
    """Cap BLAS threads at ``threads`` without ever raising them.

    OpenBLAS sizes its buffers for the thread count it started with; raising
    it later can crash, so the cap is min(threads, current).
    """
    current = max((i["num_threads"] for i in threadpool_info()), default=1)
    return threadpool_limits(limits=max(1, min(threads, current)))


def resolve_seed(arg) -> int:
    if arg is not None:
        return int(arg)
    env = os.environ.get("DHS_SEED")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"DHS_SEED must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def _degrees(arg, m):
    if arg is None:
        return list(range(m + 1))
    out = []
    for item in arg:
        for tok in str(item).split(","):
            if tok:
                out.append(int(tok))
    for p in out:
        if not 0 <= p <= m:
            raise InputError(f"degree {p} outside 0..{m}")
    return sorted(set(out))


class Session:
    """Geometry, complex and spectra shared by one command invocation."""

    def __init__(self, args):
        self.geometry = parse_geometry(args.geometry)
        self.backend = make_backend(self.geometry)
        self.m = self.backend.intrinsic_dim
        self.seed = resolve_seed(args.seed)
        self.threads = max(1, int(args.threads))
        self.source = args.source
        self._complex = None
        self._reference_error = None

    @property
    def complex(self):
        if self._complex is None:
            self._complex = build_complex(self.backend)
        return self._complex

    def has_oracle(self, p):
        return self.backend.is_analytic and p in (0, self.m)

    def use_analytic(self, p):
        if self.source == "analytic":
            if not self.has_oracle(p):
                raise InputError(f"no closed-form spectrum for p={p} on {self.geometry.label()}")
            return True
        if self.source == "discrete":
            return False
        return self.backend.cells is None

    def oracle(self, p, count):
        return analytic_sphere_spectrum(self.m, p, count, radius_sq=self.backend.radius_sq)

    def spectrum(self, p, count):
        if self.use_analytic(p):
            return self.oracle(p, count)
        return solve_degree(self.complex, p, count, seed=self.seed)

    def spectra(self, degrees, count):
        if self.threads > 1 and len(degrees) > 1:
            if any(not self.use_analytic(p) for p in degrees):
                self.complex  # build once before the workers start
            # concurrent calls into a multithreaded BLAS are unsafe: one BLAS thread per worker
            with blas_limits(1), ThreadPoolExecutor(max_workers=self.threads) as pool:
                return list(pool.map(lambda p: self.spectrum(p, count), degrees))
        return [self.spectrum(p, count) for p in degrees]

    def oracle_error(self, spec):
        """Max relative error of a discrete spectrum against the closed form (nonzero part)."""
        exact = self.oracle(spec.degree, len(spec)).eigenvalues
        nz = exact > 1e-12
        if not nz.any():
            return 0.0
        return float(np.max(np.abs(spec.eigenvalues[nz] - exact[nz]) / exact[nz]))

    def mesh_tolerance(self, spec):
        """Relative slack tolerance for a non-analytic spectrum.

        Discrete spectra on builtin spheres use their own error against the
        closed form; spectra read from files are judged by the solver's p=0
        error at this resolution, never by their own values.
        """
        if not self.backend.is_analytic:
            return MESH_DEFAULT_REL_TOL
        if self.backend.cells is None:
            return ANALYTIC_REL_TOL
        if spec.source == "discrete" and self.has_oracle(spec.degree):
            return self.oracle_error(spec)
        if self._reference_error is None:
            ref = solve_degree(self.complex, 0, len(spec), seed=self.seed)
            self._reference_error = self.oracle_error(ref)
        return self._reference_error


def _load_spectra(path, degrees):
    data = json.loads(Path(path).read_text())
    items = data if isinstance(data, list) else [data]
    out = []
    for item in items:
        vals = np.asarray(item["eigenvalues"], dtype=float)
        if np.any(np.diff(vals) < 0):
            log.warning("spectrum for p=%s is not sorted; sorting", item.get("degree"))
            item = dict(item, eigenvalues=sorted(vals.tolist()), residuals=[])
        spec = Spectrum.from_dict(item)
        if degrees is None or spec.degree in degrees:
            out.append(spec)
    if not out:
        raise InputError(f"no spectrum for the requested degrees in {path}")
    return out


def _write(text, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj):
    return json.dumps(obj, indent=2) + "\n"


def _spectra_csv(spectra):
    lines = ["degree,index,eigenvalue,residual"]
    for s in spectra:
        res = s.residuals if s.residuals is not None else [float("nan")] * len(s)
        for i, (v, r) in enumerate(zip(s.eigenvalues, res), start=1):
            lines.append(f"{s.degree},{i},{float(v)!r},{float(r)!r}")
    return "\n".join(lines) + "\n"


def _count_for(args, m):
    need = max(args.kmax, args.imax + m) + 1
    count = args.count if args.count is not None else need
    if count < need:
        raise InputError(f"count {count} < {need} needed for kmax={args.kmax}, imax={args.imax}")
    return count


def _suite(sess, spectra, mode, rel_tol):
    reports = []
    for spec in spectra:
        const = geometric_max(sess.backend, spec.degree)
        d_exact = None
        if mode in ("exact", "auto"):
            cx = sess.complex if spec.eigenforms is not None else None
            try:
                d_exact = exact_rhs_vector(spec, sess.backend, cx)
            except CapabilityError:
                if mode == "exact":
                    raise
                log.info("p=%d: exact-integral RHS unavailable, using geometric-max", spec.degree)
        if rel_tol is None:
            tol = ANALYTIC_REL_TOL if spec.source == "analytic" else sess.mesh_tolerance(spec)
        else:
            tol = rel_tol
        reports += run_suite(spec, sess.m, const, d_exact, kmax=sess.kmax, imax=sess.imax,
                             tolerance=TolerancePolicy(rel=tol))
    return reports


def cmd_spectrum(args) -> int:
    sess = Session(args)
    degrees = _degrees(args.p, sess.m)
    count = args.count if args.count is not None else 20
    spectra = sess.spectra(degrees, count)
    if args.format == "csv":
        _write(_spectra_csv(spectra), args.output)
    else:
        _write(_dump([s.to_dict() for s in spectra]), args.output)
    return EXIT_OK


def _bounds_setup(args):
    sess = Session(args)
    sess.kmax, sess.imax = args.kmax, args.imax
    degrees = _degrees(args.p, sess.m)
    if args.spectrum:
        spectra = _load_spectra(args.spectrum, None if args.p is None else degrees)
    else:
        if args.p is None and sess.backend.cells is None:
            degrees = [p for p in degrees if sess.has_oracle(p)]
        spectra = sess.spectra(degrees, _count_for(args, sess.m))
    return sess, spectra


def cmd_bounds(args) -> int:
    sess, spectra = _bounds_setup(args)
    reports = _suite(sess, spectra, args.mode, args.tol)
    if args.format == "csv":
        _write(reports_to_csv(reports), args.output)
    else:
        _write(_dump([r.to_dict() for r in reports]), args.output)
    return EXIT_OK if all_passed(reports) else EXIT_FAIL


def cmd_verify(args) -> int:
    sess, spectra = _bounds_setup(args)
    reports = _suite(sess, spectra, args.mode, args.tol)
    diag = {"shrinker_residual": shrinker_residual(sess.backend)}
    if sess.backend.cells is not None:
        cx = sess.complex
        diag["d_squared_max"] = max(
            (float(abs(cx.d[p + 1] @ cx.d[p]).max()) for p in range(cx.degrees - 1)), default=0.0)
        diag["coordinate_eigenfunction_residual"] = coordinate_eigenfunction_check(cx, sess.backend)
    diag["solver_residual_max"] = max(
        (float(s.residuals.max()) for s in spectra if s.residuals is not None and len(s.residuals)),
        default=0.0)
    diag["oracle_error"] = {str(s.degree): sess.oracle_error(s) for s in spectra
                            if sess.has_oracle(s.degree)}
    doc = {
        "version": __version__,
        "geometry": sess.geometry.label(),
        "seed": sess.seed,
        "threads": sess.threads,
        "mode": args.mode,
        "spectra": [s.to_dict() for s in spectra],
        "diagnostics": diag,
        "bounds": [r.to_dict() for r in reports],
        "all_passed": all_passed(reports),
    }
    if args.format == "csv":
        _write(reports_to_csv(reports), args.output)
    else:
        _write(_dump(doc), args.output)
    return EXIT_OK if all_passed(reports) else EXIT_FAIL


def cmd_abstract(args) -> int:
    if args.trials < 1:
        raise InputError("--trials must be >= 1")
    seed = resolve_seed(args.seed)
    with blas_limits(1):
        summary = verify_batch(args.trials, seed, n_max=args.nmax,
                               max_perturbers=args.perturbers, threads=max(1, args.threads))
    _write(_dump(summary), args.output)
    return EXIT_OK if not summary["failures"] else EXIT_FAIL


def _common(sub):
    g = sub.add_mutually_exclusive_group(required=True)
    g.add_argument("--builtin", "--geometry", dest="geometry",
                   help="sphere:m=<int>[:res=<int>][:r2=<float>], circle[:res=<int>] or mesh:<path>")
    g.add_argument("--mesh", dest="geometry", type=lambda s: f"mesh:{s}",
                   help="closed triangle mesh (.off/.obj) or polyline (.txt/.xy/.poly)")
    sub.add_argument("--p", nargs="+", help="form degrees (default: all available)")
    sub.add_argument("--count", type=int, help="number of eigenvalues per degree")
    sub.add_argument("--source", choices=["auto", "analytic", "discrete"], default="auto",
                     help="closed-form oracle or discrete solver (auto: discrete when a complex exists)")
    sub.add_argument("--seed", type=int, help="solver seed (default: $DHS_SEED or built-in)")
    sub.add_argument("--threads", type=int, default=1, help="worker and BLAS thread cap")
    sub.add_argument("--format", choices=["json", "csv"], default="json")
    sub.add_argument("--output", "-o", help="output file (default: stdout)")


def _bounds_opts(sub):
    sub.add_argument("--kmax", type=int, default=10)
    sub.add_argument("--imax", type=int, default=10)
    sub.add_argument("--mode", choices=["exact", "geometric", "auto"], default="auto",
                     help="RHS of the Yang and sum-rule rows; auto uses exact-integral where "
                     "the geometry supports it and geometric-max otherwise",
                     type=lambda s: {"exact-integral": "exact", "geometric-max": "geometric"}.get(s, s))
    sub.add_argument("--spectrum", help="precomputed spectrum JSON instead of solving")
    sub.add_argument("--tol", type=float, help="relative slack tolerance (default: 1e-9 analytic, "
                     "oracle error for discrete)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dhs", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    subs = ap.add_subparsers(dest="command", required=True)
    sp = subs.add_parser("spectrum", help="eigenvalues of the weighted Hodge Laplacian")
    _common(sp)
    sp.set_defaults(func=cmd_spectrum)
    for name, func, hlp in (("bounds", cmd_bounds, "evaluate the universal inequalities"),
                            ("verify", cmd_verify, "spectrum, bounds and diagnostics in one report")):
        sub = subs.add_parser(name, help=hlp)
        _common(sub)
        _bounds_opts(sub)
        sub.set_defaults(func=func)
    ab = subs.add_parser("abstract", help="randomized checks of the operator identities")
    ab.add_argument("--trials", type=int, default=1000)
    ab.add_argument("--seed", type=int)
    ab.add_argument("--nmax", type=int, default=12)
    ab.add_argument("--perturbers", type=int, default=3)
    ab.add_argument("--threads", type=int, default=1)
    ab.add_argument("--output", "-o")
    ab.set_defaults(func=cmd_abstract)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with blas_limits(max(1, getattr(args, "threads", 1))):
            return args.func(args)
    except SolverError as exc:
        print(f"dhs: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IdentityViolationError as exc:
        print(f"dhs: identity violation: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (DHSError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"dhs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
