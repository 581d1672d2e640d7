"""Universal eigenvalue inequalities for the weighted Hodge Laplacian.

All indices are 1-based as in the mathematics: ``lambdas[0]`` is lambda_1.
Right-hand sides D_i come in two modes:

* exact-integral: D_i = 4 lambda_i + 2m - int |x|^2 |phi_i|^2
  - 4 int <Ric phi_i, phi_i> + 4 int <Hess(|x|^2/2) phi_i, phi_i>,
  integrals against e^{-|x|^2/2} dvol with weighted-unit eigenforms;
* geometric-max: D_i = 4 lambda_i + 2m + 4 + 4 G with
  G = max over M of (p |H||h| - Phi(h, H) - |x|^2 / 4).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .complex.assembly import WeightedComplex
from .complex.exterior import curvature_operator_constant
from .errors import (
    CapabilityError,
    GeometryError,
    InfeasibleInputsError,
    InputError,
    PreconditionError,
)
from .manifold.backend import GeometryBackend, hessian_half_xsq_field
from .spectrum import Spectrum

CS_TOL = 1e-12
ANALYTIC_REL_TOL = 1e-9
ABS_TOL = 1e-12
CSV_COLUMNS = ["inequality", "p", "index", "bound", "observed", "slack", "pass", "mode"]


def _lams(spectrum) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=float)


def cheng_yang_constant(m: int) -> float:
    return 1.0 + 4.0 / m


def phi(h_sq, H_sq, m: int, p: int):
    """Lower bound Phi(h, H) for <Ric phi, phi> / |phi|^2 on p-forms.

    Works elementwise on arrays. m|h|^2 - |H|^2 >= 0 by Cauchy-Schwarz;
    values down to -1e-12 are clamped to zero.
    """
    h_sq = np.asarray(h_sq, dtype=float)
    H_sq = np.asarray(H_sq, dtype=float)
    gap = m * h_sq - H_sq
    if np.any(gap < -CS_TOL):
        raise GeometryError("m|h|^2 - |H|^2 < 0: curvature data inconsistent")
    gap = np.maximum(gap, 0.0)
    H = np.sqrt(np.maximum(H_sq, 0.0))
    inner = np.sqrt(m - 1.0) * (m - 2.0) * H - 2.0 * np.sqrt(gap)
    bracket = ((m - 5.0) / 4.0) * H_sq + h_sq - inner ** 2 / (4.0 * m * m)
    out = -(p * p * bracket + 0.5 * np.sqrt(p) * (p - 1.0) * (H_sq + h_sq))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GeometricConstants:
    m: int
    p: int
    G: float
    min_xsq: float
    max_HH: float  # max |H||h|
    estimated: bool

    def to_dict(self):
        return asdict(self)


def geometric_max(backend: GeometryBackend, p: int) -> GeometricConstants:
    """G = max over sample points of p|H||h| - Phi(h, H) - |x|^2/4."""
    m = backend.intrinsic_dim
    if not 0 <= p <= m:
        raise InputError(f"degree {p} outside 0..{m}")
    h_sq, H_sq, xsq = backend.h_sq, backend.H_sq, backend.xsq
    hh = np.sqrt(h_sq * H_sq)
    g = p * hh - phi(h_sq, H_sq, m, p) - xsq / 4.0
    return GeometricConstants(m=m, p=p, G=float(np.max(g)), min_xsq=float(xsq.min()),
                              max_HH=float(hh.max()), estimated=backend.estimated)


def _constant_curvature(backend):
    if not backend.is_analytic or backend.radius_sq is None:
        return None
    return 1.0 / backend.radius_sq


def _isotropic_hessian(backend):
    """Per-node t with Hess(|x|^2/2) = t * identity, or None if not isotropic."""
    t = hessian_half_xsq_field(backend)
    m = backend.intrinsic_dim
    iso = np.trace(t, axis1=1, axis2=2) / m
    if np.abs(t - iso[:, None, None] * np.eye(m)).max() > 1e-10:
        return None
    return iso


def rhs_exact(spectrum: Spectrum, backend: GeometryBackend, complex: WeightedComplex | None = None,
              i: int = 1) -> float:
    """Exact-integral right-hand side D_i for the i-th eigenform (1-based).

    With discrete eigenforms the integrals are lumped quadratures
    sum_c M_cc g_c phi_c^2. Without eigenforms (closed-form spectra) the
    backend must be an analytic sphere or circle, where every integrand is
    constant and the weighted norm of phi_i is one.
    """
    lams = spectrum.eigenvalues
    if not 1 <= i <= len(lams):
        raise PreconditionError(f"index {i} outside 1..{len(lams)}")
    m, p = backend.intrinsic_dim, spectrum.degree
    lam = float(lams[i - 1])
    curv = _constant_curvature(backend)
    if p > 0 and curv is None:
        raise CapabilityError(
            "curvature operator on p-forms is only available for constant-curvature analytic "
            "backends; use rhs_geometric")
    ric = curvature_operator_constant(m, p, curv) if p > 0 else 0.0
    if p > 0:
        iso = _isotropic_hessian(backend)
        if iso is None:
            raise CapabilityError("Hessian of |x|^2/2 is not isotropic; use rhs_geometric")
    if spectrum.eigenforms is None:
        if curv is None:
            raise CapabilityError("closed-form D_i needs an analytic sphere or circle backend")
        t_iso = float(iso.mean()) if p > 0 else 0.0
        return 4 * lam + 2 * m - backend.radius_sq - 4 * ric + 4 * p * t_iso
    if complex is None:
        raise InputError("discrete eigenforms need the complex they were computed on")
    phi_i = spectrum.eigenforms[:, i - 1]
    w = complex.mass_diagonal(p) * phi_i ** 2
    norm = w.sum()
    xsq_term = float(w @ complex.cell_average(p, backend.xsq))
    hess_term = float(w @ complex.cell_average(p, p * iso)) if p > 0 else 0.0
    return 4 * lam + 2 * m - xsq_term - 4 * ric * norm + 4 * hess_term


def rhs_geometric(lambda_i: float, m: int, p: int, G: float) -> float:
    """D_i = 4 lambda_i + 2m + 4 + 4G (p enters through G)."""
    return 4.0 * lambda_i + 2.0 * m + 4.0 + 4.0 * G


def yang_coefficients(lambdas, D, m: int):
    lam = _lams(lambdas)
    D = np.asarray(D, dtype=float)
    if len(lam) == 0 or len(lam) != len(D):
        raise PreconditionError("need k >= 1 eigenvalues and as many D_i")
    if np.any(np.diff(lam) < 0):
        raise PreconditionError("eigenvalues must be nondecreasing")
    a = m * len(lam)
    b = float(np.sum(2 * m * lam + D))
    c = float(np.sum(m * lam ** 2 + lam * D))
    return a, b, c


def yang_bound(lambdas, D, m: int) -> float:
    """Largest root of m sum (L - lambda_i)^2 = sum (L - lambda_i) D_i."""
    a, b, c = yang_coefficients(lambdas, D, m)
    disc = b * b - 4 * a * c
    if disc < -1e-12 * b * b:
        raise InfeasibleInputsError(f"negative discriminant {disc:.3e}: D_i inconsistent")
    return (b + np.sqrt(max(disc, 0.0))) / (2 * a)


def yang_sides(spectrum, D, m: int, k: int):
    """(lhs, rhs) = (m sum (lambda_{k+1} - lambda_i)^2, sum (lambda_{k+1} - lambda_i) D_i)."""
    lam = _lams(spectrum)
    if len(lam) < k + 1:
        raise PreconditionError(f"need {k + 1} eigenvalues, have {len(lam)}")
    D = np.asarray(D, dtype=float)[:k]
    diff = lam[k] - lam[:k]
    return float(m * np.sum(diff ** 2)), float(np.sum(diff * D))


def yang_check(spectrum, D, m: int, k: int) -> float:
    lhs, rhs = yang_sides(spectrum, D, m, k)
    return rhs - lhs


def gap_bound(lambdas, m: int, G: float) -> float:
    """Upper bound for lambda_{k+1} - lambda_k from lambda_1..lambda_k.

    2 [ (2/m mean(mu))^2 - (1 + 4/m) var(lambda) ]^{1/2} with
    mu_i = lambda_i + m/2 + 1 + G, i.e. the distance between the two roots of
    the Yang quadratic with geometric-max D_i.
    """
    lam = _lams(lambdas)
    if len(lam) == 0:
        raise PreconditionError("need k >= 1 eigenvalues")
    mean = float(lam.mean())
    var = float(np.mean((lam - mean) ** 2))
    lead = (2.0 / m) * mean + 1.0 + 2.0 / m + (2.0 / m) * G
    rad = lead ** 2 - (1.0 + 4.0 / m) * var
    if rad < -1e-12 * max(lead ** 2, 1.0):
        raise InfeasibleInputsError(f"negative radicand {rad:.3e}")
    return 2.0 * np.sqrt(max(rad, 0.0))


def lp_sum(spectrum, m: int, i: int) -> float:
    lam = _lams(spectrum)
    if i < 1 or len(lam) < i + m:
        raise PreconditionError(f"need {i + m} eigenvalues for index {i}, have {len(lam)}")
    return float(np.sum(lam[i:i + m] - lam[i - 1]))


def lp_check(spectrum, D_i: float, m: int, i: int) -> float:
    """Slack D_i - sum_{l=1}^m (lambda_{i+l} - lambda_i)."""
    return float(D_i) - lp_sum(spectrum, m, i)


def lp_bound(lambda_i: float, m: int, p: int, G: float) -> float:
    """Geometric-max sum-rule bound 4 lambda_i + 2m + 4 + 4G."""
    return rhs_geometric(lambda_i, m, p, G)


def cheng_yang_bound(mu_1: float, m: int, k: int) -> float:
    """mu_{k+1} <= (1 + 4/m) k^{2/m} mu_1 with mu_i = lambda_i + m/2 + 1 + G."""
    if mu_1 <= 0:
        raise InputError("mu_1 must be positive")
    if k < 1:
        raise InputError("k must be >= 1")
    return cheng_yang_constant(m) * k ** (2.0 / m) * mu_1


@dataclass(frozen=True)
class ClassicalAudit:
    ppw: float
    hile_protter: float
    yang: float
    label: str = "audit only"


def classical_checks(spectrum, m: int, k: int) -> ClassicalAudit:
    """Generic evaluation of the classical Dirichlet inequalities.

    Returns the PPW slack, the Hile-Protter value (sum lambda_i/(lambda_{k+1}-lambda_i)
    - mk/4, +inf when lambda_{k+1} equals some lambda_i) and the Yang slack.
    """
    lam = _lams(spectrum)
    if len(lam) < k + 1:
        raise PreconditionError(f"need {k + 1} eigenvalues")
    low, top = lam[:k], lam[k]
    if np.any(low <= 0):
        raise PreconditionError("classical audits need strictly positive eigenvalues")
    ppw = 4.0 / (m * k) * low.sum() - (top - lam[k - 1])
    gaps = top - low
    hp = float("inf") if np.any(gaps <= 0) else float(np.sum(low / gaps) - m * k / 4.0)
    yang = -float(np.sum(gaps * (top - (1 + 4.0 / m) * low)))
    return ClassicalAudit(float(ppw), hp, yang)


@dataclass
class BoundReport:
    inequality: str
    p: int
    index: int
    bound: float
    observed: float
    slack: float
    tolerance: float
    mode: str
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.slack >= -self.tolerance)

    def to_dict(self):
        out = asdict(self)
        out["pass"] = self.passed
        return out

    def csv_row(self):
        return [self.inequality, self.p, self.index, repr(float(self.bound)),
                repr(float(self.observed)), repr(float(self.slack)),
                "true" if self.passed else "false", self.mode]


@dataclass(frozen=True)
class TolerancePolicy:
    rel: float = ANALYTIC_REL_TOL
    abs: float = ABS_TOL

    def __call__(self, bound, observed):
        # an infinite bound (infeasible inputs) must not widen the tolerance
        mags = [abs(v) for v in (bound, observed) if np.isfinite(v)]
        return self.abs + self.rel * sum(mags)


def run_suite(spectrum: Spectrum, m: int, constants: GeometricConstants, D_exact=None,
              kmax: int = 50, imax: int = 50, tolerance: TolerancePolicy | None = None,
              mode: str | None = None) -> list[BoundReport]:
    """Evaluate Yang, gap, Levitin-Parnovski and Cheng-Yang over a spectrum.

    With ``D_exact`` (length >= max index) the Yang and LP rows use the
    exact-integral right-hand side; otherwise the geometric-max one. Gap and
    Cheng-Yang rows always use G.
    """
    tol = tolerance or TolerancePolicy()
    lam = spectrum.eigenvalues
    p = spectrum.degree
    n = len(lam)
    G = constants.G
    mode = mode or ("exact-integral" if D_exact is not None else "geometric-max")
    D_geo = np.array([rhs_geometric(v, m, p, G) for v in lam])
    D = D_geo if D_exact is None else np.asarray(D_exact, dtype=float)
    prov = {
        "mode": mode, "m": m, "p": p, "G": G, "min_xsq": constants.min_xsq,
        "max_HH": constants.max_HH, "curvature_estimated": constants.estimated,
        "lp_geometric_form": "4*lambda_i + 2m + 4 + 4*max(...)",
        "gap_form": "2*sqrt((2/m*mean(mu))^2 - (1+4/m)*var), mu = lambda + m/2 + 1 + G",
        "cheng_yang_C0": cheng_yang_constant(m),
        "tolerance_rel": tol.rel, "tolerance_abs": tol.abs,
    }
    rows: list[BoundReport] = []

    def add(name, index, bound, observed, slack, row_mode):
        rows.append(BoundReport(name, p, index, float(bound), float(observed), float(slack),
                                float(tol(bound, observed)), row_mode, prov))

    mu = lam + m / 2.0 + 1.0 + G
    for k in range(1, min(kmax, n - 1) + 1):
        lhs, rhs = yang_sides(lam, D, m, k)
        add("yang", k, rhs, lhs, rhs - lhs, mode)
        try:
            root = yang_bound(lam[:k], D[:k], m)
        except InfeasibleInputsError:
            root = float("-inf")
        add("yang_root", k, root, lam[k], root - lam[k], mode)
        try:
            gb = gap_bound(lam[:k], m, G)
        except InfeasibleInputsError:
            gb = float("-inf")
        gap = lam[k] - lam[k - 1]
        add("gap", k, gb, gap, gb - gap, "geometric-max")
        if mu[0] > 0:
            cy = cheng_yang_bound(mu[0], m, k)
            add("cheng_yang", k, cy, mu[k], cy - mu[k], "geometric-max")
    for i in range(1, min(imax, n - m) + 1):
        s = lp_sum(lam, m, i)
        add("levitin_parnovski", i, D[i - 1], s, D[i - 1] - s, mode)
    return rows


def exact_rhs_vector(spectrum, backend, complex=None, count=None):
    count = len(spectrum) if count is None else count
    return np.array([rhs_exact(spectrum, backend, complex, i) for i in range(1, count + 1)])


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)


def reports_to_json(reports, **kw) -> str:
    return json.dumps([r.to_dict() for r in reports], **kw)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()
