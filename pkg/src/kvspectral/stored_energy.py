"""Stored-energy models and machine-checkable constitutive hypotheses.

A model packages the energy density W, its gradient stress S = DW, and the
Hessian D2W on d x d matrices, together with the growth exponent p and the
semiconvexity shift K (the smallest K for which W + K|F|^2/2 is convex).
Hypothesis checks are sampling-based: the conditions quantify over all
matrices, so fixed seeded samples (or user-supplied ones) are the only
generic test.

Models are immutable and all evaluations are pure functions; they are safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class StoredEnergyModel:
    """Energy density W with stress S = DW and Hessian D2W.

    w, s accept batched input of shape (..., d, d); d2w returns the Hessian
    as a dense symmetric (..., d*d, d*d) matrix in row-major (i, alpha)
    flattening, the layout consumed by the modulated-energy quadratic form.
    stress_degree is the polynomial degree of S (None if not polynomial)
    and drives dealiasing; linear_factor short-circuits S(F) = mu*F.
    """

    name: str
    dim: int
    p: float
    K: float
    w: Callable
    s: Callable
    d2w: Callable
    stress_degree: Optional[int] = None
    linear_factor: Optional[float] = None
    c_abprime: Optional[float] = None
    w_floor: float = 0.0
    params: dict = None

    def describe(self):
        out = f"{self.name} (d={self.dim}, p={self.p}, K={self.K}"
        if self.c_abprime is not None:
            out += f", C'={self.c_abprime}"
        return out + ")"


# ---------------------------------------------------------------------------
# builtin models

def quadratic_model(mu=1.0, dim=2):
    """Convex quadratic energy W = mu/2 |F|^2, S = mu F."""
    d2 = dim * dim

    def w(f):
        return 0.5 * mu * np.sum(f ** 2, axis=(-2, -1))

    def s(f):
        return mu * f

    def d2w(f):
        eye = mu * np.eye(d2)
        return np.broadcast_to(eye, f.shape[:-2] + (d2, d2)).copy()

    return StoredEnergyModel(
        name="quadratic", dim=dim, p=2.0, K=0.0, w=w, s=s, d2w=d2w,
        stress_degree=1, linear_factor=mu, w_floor=0.0,
        params={"mu": mu})


def quartic_model(alpha=1.0, dim=2):
    """Double-well-in-|F| quartic: W = |F|^4/4 - alpha |F|^2/2.

    S(F) = (|F|^2 - alpha) F; D2W = (|F|^2 - alpha) I + 2 vec(F) vec(F)^T.
    Satisfies the strengthened monotonicity at infinity with C = 1/2 and
    K = alpha: the cubic part obeys
        (|A|^2 A - |B|^2 B, A - B) - (|A|^2+|B|^2)|A-B|^2/2
            = (|A|^2 - |B|^2)^2 / 2 >= 0.
    """
    d2 = dim * dim

    def norm2(f):
        return np.sum(f ** 2, axis=(-2, -1))

    def w(f):
        r2 = norm2(f)
        return 0.25 * r2 ** 2 - 0.5 * alpha * r2

    def s(f):
        return (norm2(f) - alpha)[..., None, None] * f

    def d2w(f):
        r2 = norm2(f)
        vec = f.reshape(f.shape[:-2] + (d2,))
        eye = np.eye(d2)
        return (r2 - alpha)[..., None, None] * eye + \
            2.0 * vec[..., :, None] * vec[..., None, :]

    return StoredEnergyModel(
        name="quartic", dim=dim, p=4.0, K=alpha, w=w, s=s, d2w=d2w,
        stress_degree=3, c_abprime=0.5, w_floor=-0.25 * alpha ** 2,
        params={"alpha": alpha})


def double_well_model():
    """1-d non-monotone law sigma(u) = u^3 - u with W = u^4/4 - u^2/2."""

    def w(f):
        u = f[..., 0, 0]
        return 0.25 * u ** 4 - 0.5 * u ** 2

    def s(f):
        u = f[..., 0, 0]
        return (u ** 3 - u)[..., None, None]

    def d2w(f):
        u = f[..., 0, 0]
        return (3.0 * u ** 2 - 1.0)[..., None, None]

    return StoredEnergyModel(
        name="double_well", dim=1, p=4.0, K=1.0, w=w, s=s, d2w=d2w,
        stress_degree=3, w_floor=-0.25, params={})


# ---------------------------------------------------------------------------
# piecewise non-monotone stress with two branches sharing a common value

@dataclass(frozen=True)
class PiecewiseStress1D:
    """Piecewise-polynomial 1-d stress whose two rising branches satisfy

        a + sigma(t*a) = b + sigma(t*b)   for all t in [1, 2],

    so the two-phase states (a, b) support stationary strain discontinuities.
    knots = [a, 2a, b, 2b]; segments hold monomial coefficients in
    (u - left knot) for the five intervals (-inf,a], [a,2a], [2a,b], [b,2b],
    [2b,inf).  theta is the volume fraction used by the oscillation family.
    """

    a: float
    b: float
    theta: float
    knots: tuple
    segments: tuple  # tuple of monomial coefficient tuples, low order first

    def __post_init__(self):
        if len(self.segments) != len(self.knots) + 1:
            raise ValueError("need one segment per interval")

    def _segment(self, u):
        return np.searchsorted(np.asarray(self.knots), u, side="right")

    def _anchor(self, seg):
        # segment 0 is anchored at the first knot as well
        idx = np.clip(np.asarray(seg) - 1, 0, len(self.knots) - 1)
        return np.asarray(self.knots)[idx]

    def sigma(self, u):
        u = np.asarray(u, dtype=float)
        seg = self._segment(u)
        du = u - self._anchor(seg)
        out = np.zeros_like(du)
        for j, coeffs in enumerate(self.segments):
            mask = seg == j
            if np.any(mask):
                out[mask] = np.polynomial.polynomial.polyval(
                    du[mask], np.asarray(coeffs))
        return out if out.ndim else float(out)

    def sigma_prime(self, u):
        u = np.asarray(u, dtype=float)
        seg = self._segment(u)
        du = u - self._anchor(seg)
        out = np.zeros_like(du)
        for j, coeffs in enumerate(self.segments):
            mask = seg == j
            if np.any(mask):
                dcf = np.polynomial.polynomial.polyder(np.asarray(coeffs))
                out[mask] = np.polynomial.polynomial.polyval(du[mask], dcf)
        return out if out.ndim else float(out)

    def antiderivative(self):
        """W(u) with W(knots[0]) = 0, as per-segment coefficient arrays."""
        knots = np.asarray(self.knots)
        anti = [np.polynomial.polynomial.polyint(np.asarray(c))
                for c in self.segments]
        consts = np.zeros(len(self.segments))
        # march continuity left to right starting from W(a) = 0
        consts[1] = 0.0
        for j in range(1, len(self.knots)):
            width = knots[j] - knots[j - 1]
            consts[j + 1] = consts[j] + np.polynomial.polynomial.polyval(
                width, anti[j])
        consts[0] = consts[1]  # segment 0 anchored at knots[0], W(a)=0 there
        return anti, consts

    def energy(self, u):
        u = np.asarray(u, dtype=float)
        seg = self._segment(u)
        du = u - self._anchor(seg)
        anti, consts = self.antiderivative()
        out = np.zeros_like(du)
        for j in range(len(self.segments)):
            mask = seg == j
            if np.any(mask):
                out[mask] = consts[j] + np.polynomial.polynomial.polyval(
                    du[mask], anti[j])
        return out if out.ndim else float(out)

    def min_slope(self):
        """Exact global minimum of sigma' (per-segment polynomial minima)."""
        knots = np.asarray(self.knots)
        bounds = [(None, knots[0])] + \
            [(knots[j], knots[j + 1]) for j in range(len(knots) - 1)] + \
            [(knots[-1], None)]
        best = np.inf
        for j, coeffs in enumerate(self.segments):
            dcf = np.polynomial.polynomial.polyder(np.asarray(coeffs))
            lo, hi = bounds[j]
            anchor = self._anchor(np.array(j))
            candidates = []
            if lo is not None:
                candidates.append(lo - anchor)
            if hi is not None:
                candidates.append(hi - anchor)
            if len(dcf) > 2:  # interior critical points of sigma'
                crit = np.polynomial.polynomial.polyroots(
                    np.polynomial.polynomial.polyder(dcf))
                for r in crit:
                    if abs(r.imag) < 1e-12:
                        x = r.real
                        if (lo is None or x >= lo - anchor) and \
                                (hi is None or x <= hi - anchor):
                            candidates.append(x)
            if not candidates:  # affine outer segment: constant slope
                candidates = [0.0]
            vals = np.polynomial.polynomial.polyval(
                np.asarray(candidates, dtype=float), dcf)
            best = min(best, float(np.min(vals)))
        return best

    def common_value(self, t):
        """S(t) = a + sigma(t a) on [1, 2]."""
        return self.a + self.sigma(np.asarray(t) * self.a)

    def branch_residual(self, t):
        """|a + sigma(t a) - (b + sigma(t b))|, zero by construction."""
        t = np.asarray(t)
        return np.abs(self.a + self.sigma(t * self.a)
                      - self.b - self.sigma(t * self.b))

    # -- structured text serialization (decimal, 17 significant digits)

    def to_text(self):
        lines = ["piecewise_stress_1d v1",
                 f"a = {self.a:.17g}",
                 f"b = {self.b:.17g}",
                 f"theta = {self.theta:.17g}",
                 "knots = " + " ".join(f"{k:.17g}" for k in self.knots)]
        for j, coeffs in enumerate(self.segments):
            lines.append(f"segment{j} = " +
                         " ".join(f"{c:.17g}" for c in coeffs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        fields = {}
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("piecewise_stress_1d"):
            raise ValueError("not a piecewise stress file")
        for ln in lines[1:]:
            key, _, val = ln.partition("=")
            fields[key.strip()] = val.strip()
        knots = tuple(float(x) for x in fields["knots"].split())
        segments = []
        for j in range(len(knots) + 1):
            segments.append(tuple(float(x)
                                  for x in fields[f"segment{j}"].split()))
        return cls(a=float(fields["a"]), b=float(fields["b"]),
                   theta=float(fields["theta"]), knots=knots,
                   segments=tuple(segments))


def _poly_rescale(coeffs, factor):
    """Coefficients of p(factor * u) given monomial coefficients of p(u)."""
    coeffs = np.asarray(coeffs, dtype=float)
    return coeffs * factor ** np.arange(len(coeffs))


def _shift_to_anchor(coeffs, shift):
    """Monomial coefficients in (u - anchor) of p(u) given coefficients in u."""
    # p(u) = q(u - anchor) with q = Taylor shift
    c = np.asarray(coeffs, dtype=float)
    n = len(c)
    out = np.zeros(n)
    # Horner-style Taylor shift
    work = c.copy()
    for j in range(n):
        out[j] = np.polynomial.polynomial.polyval(shift, work)
        work = np.polynomial.polynomial.polyder(work) / (j + 1.0)
    return out


def build_nonmonotone_stress(a, b, sigma_right, theta=0.5,
                             interp="cubic_hermite"):
    """Assemble the two-branch stress from its right branch on [b, 2b].

    sigma_right: monomial coefficients (in u) of a polynomial strictly
    increasing on [b, 2b].  The left branch on [a, 2a] is forced by the
    common-value identity sigma(t a) = (b - a) + sigma(t b); the hole
    (2a, b) is filled with a C^1 cubic Hermite join, and the law extends
    affinely outside [a, 2b] with the boundary slopes.
    """
    if not (0 < a < 2 * a < b < 2 * b):
        raise ValueError(f"need 0 < a < 2a < b < 2b, got a={a}, b={b}")
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if interp != "cubic_hermite":
        raise ValueError(f"unknown interpolation {interp!r}")
    right = np.asarray(sigma_right, dtype=float)
    dright = np.polynomial.polynomial.polyder(right)
    uu = np.linspace(b, 2 * b, 501)
    if np.any(np.polynomial.polynomial.polyval(uu, dright) <= 0.0):
        raise ValueError("sigma_right must be strictly increasing on [b, 2b]")

    # left branch: sigma_left(u) = (b - a) + sigma_right(u * b / a) on [a, 2a]
    left = _poly_rescale(right, b / a)
    left[0] += b - a
    dleft = np.polynomial.polynomial.polyder(left)

    def pval(c, u):
        return float(np.polynomial.polynomial.polyval(u, np.asarray(c)))

    # C^1 cubic Hermite join on [2a, b]
    u0, u1 = 2.0 * a, float(b)
    h = u1 - u0
    y0, y1 = pval(left, u0), pval(right, u1)
    m0, m1 = pval(dleft, u0), pval(dright, u1)
    # cubic in (u - u0): c0 + c1 x + c2 x^2 + c3 x^3
    c0, c1 = y0, m0
    c2 = (3.0 * (y1 - y0) / h - 2.0 * m0 - m1) / h
    c3 = (m0 + m1 - 2.0 * (y1 - y0) / h) / h ** 2
    middle = np.array([c0, c1, c2, c3])

    knots = (float(a), 2.0 * float(a), float(b), 2.0 * float(b))
    # anchored segments: interval j in [knots[j-1], knots[j]] anchored at
    # knots[j-1]; the outer pieces are affine with the boundary slopes.
    seg_left = _shift_to_anchor(left, a)
    seg_mid = middle  # already in (u - 2a)
    seg_right = _shift_to_anchor(right, b)
    slope_lo = pval(dleft, a)
    slope_hi = pval(dright, 2.0 * b)
    seg_below = np.array([pval(left, a), slope_lo])
    seg_above = np.array([pval(right, 2.0 * b), slope_hi])

    stress = PiecewiseStress1D(
        a=float(a), b=float(b), theta=float(theta), knots=knots,
        segments=(tuple(seg_below), tuple(seg_left), tuple(seg_mid),
                  tuple(seg_right), tuple(seg_above)))
    _validate_stress(stress)
    return stress


def _validate_stress(stress, n_check=2001):
    t = np.linspace(1.0, 2.0, n_check)
    res = float(np.max(stress.branch_residual(t)))
    if res >= 1e-12:
        raise ValueError(f"common-value identity violated: residual {res:g}")
    # continuity across knots
    for k in stress.knots:
        lo = stress.sigma(np.nextafter(k, -np.inf))
        hi = stress.sigma(np.nextafter(k, np.inf))
        if abs(hi - lo) > 1e-10 * max(1.0, abs(hi)):
            raise ValueError(f"discontinuity at knot {k}")
    # strict increase on the two branches
    for lo, hi in [(stress.a, 2 * stress.a), (stress.b, 2 * stress.b)]:
        uu = np.linspace(lo, hi, 501)
        if np.any(np.diff(stress.sigma(uu)) <= 0.0):
            raise ValueError(f"branch on [{lo}, {hi}] is not increasing")
    # the assembled law must be non-monotone
    uu = np.linspace(stress.a, 2 * stress.b, 2001)
    if np.all(np.diff(stress.sigma(uu)) >= 0.0):
        raise ValueError("assembled law is monotone; construction failed")


def piecewise_model(stress=None):
    """Wrap a PiecewiseStress1D as a stored-energy model via its antiderivative."""
    if stress is None:
        stress = build_nonmonotone_stress(1.0, 3.0, (0.0, 1.0))
    k_const = max(0.0, -stress.min_slope())
    uu = np.linspace(stress.knots[0] - 5.0, stress.knots[-1] + 5.0, 4001)
    w_floor = float(np.min(stress.energy(uu)))

    def w(f):
        return stress.energy(f[..., 0, 0])

    def s(f):
        return stress.sigma(f[..., 0, 0])[..., None, None]

    def d2w(f):
        return stress.sigma_prime(f[..., 0, 0])[..., None, None]

    return StoredEnergyModel(
        name="piecewise", dim=1, p=2.0, K=k_const, w=w, s=s, d2w=d2w,
        stress_degree=None, w_floor=w_floor,
        params={"a": stress.a, "b": stress.b, "theta": stress.theta})


def builtin_models():
    """Catalog of model factories keyed by string identifier."""
    return {
        "quadratic": quadratic_model,
        "quartic": quartic_model,
        "double_well": double_well_model,
        "piecewise": piecewise_model,
    }


def make_model(name, **params):
    factories = builtin_models()
    if name not in factories:
        raise ValueError(f"unknown model {name!r}; known: {sorted(factories)}")
    return factories[name](**params)


# ---------------------------------------------------------------------------
# hypothesis checks (sampling-based)

@dataclass(frozen=True)
class CheckReport:
    passed: bool
    value: float
    detail: dict

    def __bool__(self):
        return self.passed


def default_matrix_samples(dim, count=200, radius=3.0, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-radius, radius, size=(count, dim, dim))


def _require_finite(model, samples):
    w = model.w(samples)
    s = model.s(samples)
    h = model.d2w(samples)
    for name, arr in (("W", w), ("S", s), ("D2W", h)):
        if not np.all(np.isfinite(arr)):
            per_sample = ~np.isfinite(arr.reshape(arr.shape[0], -1))
            bad = int(np.flatnonzero(per_sample.any(axis=1))[0])
            raise ValueError(
                f"non-finite {name} at sample {bad}: F = {samples[bad]!r}")
    return w, s, h


def check_semiconvexity(model, samples, tol=1e-10):
    """Minimum eigenvalue of D2W(F) + K*I over the samples; pass iff >= -tol."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    _require_finite(model, samples)
    hess = model.d2w(samples) + model.K * np.eye(model.dim ** 2)
    eigs = np.linalg.eigvalsh(0.5 * (hess + np.swapaxes(hess, -1, -2)))
    min_eig = float(eigs.min())
    worst = samples[int(np.argmin(eigs.min(axis=-1)))]
    return CheckReport(min_eig >= -tol, min_eig,
                       {"worst_sample": worst, "K": model.K})


def check_ab_monotonicity(model, pairs, variant="AB", tol=1e-10):
    """Slack of the monotonicity-at-infinity inequality over matrix pairs.

    AB:      (S(F1)-S(F2), F1-F2) + K |F1-F2|^2           >= 0
    ABprime: (S(F1)-S(F2), F1-F2)
               - (C (|F1|^{p-2} + |F2|^{p-2}) - K)|F1-F2|^2 >= 0
    Reports the most negative slack found.
    """
    f1 = np.asarray([p[0] for p in pairs], dtype=float)
    f2 = np.asarray([p[1] for p in pairs], dtype=float)
    _require_finite(model, f1)
    _require_finite(model, f2)
    ds = model.s(f1) - model.s(f2)
    df = f1 - f2
    pairing = np.sum(ds * df, axis=(-2, -1))
    dist2 = np.sum(df ** 2, axis=(-2, -1))
    if variant == "AB":
        slack = pairing + model.K * dist2
    elif variant == "ABprime":
        if model.c_abprime is None:
            raise ValueError(
                f"model {model.name!r} does not claim strengthened monotonicity")
        g1 = np.sum(f1 ** 2, axis=(-2, -1)) ** ((model.p - 2) / 2.0)
        g2 = np.sum(f2 ** 2, axis=(-2, -1)) ** ((model.p - 2) / 2.0)
        slack = pairing - (model.c_abprime * (g1 + g2) - model.K) * dist2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    worst = float(slack.min())
    scale = max(1.0, float(np.max(dist2)))
    return CheckReport(worst >= -tol * scale, worst,
                       {"variant": variant, "n_pairs": len(pairs)})


def check_gradient_consistency(model, samples, step=1e-5, rtol=1e-6):
    """Central finite differences of W against S, directionwise."""
    samples = np.asarray(samples, dtype=float)
    d = model.dim
    stress = model.s(samples)
    worst = 0.0
    for i in range(d):
        for a in range(d):
            e = np.zeros((d, d))
            e[i, a] = 1.0
            fd = (model.w(samples + step * e) - model.w(samples - step * e)) \
                / (2.0 * step)
            scale = np.maximum(1.0, np.abs(stress[..., i, a]))
            worst = max(worst, float(
                np.max(np.abs(fd - stress[..., i, a]) / scale)))
    return CheckReport(worst < rtol, worst, {"step": step})


def check_hessian_consistency(model, samples, step=1e-5, rtol=1e-5):
    """Central finite differences of S against D2W, plus symmetry of D2W."""
    samples = np.asarray(samples, dtype=float)
    d = model.dim
    hess = model.d2w(samples)
    sym = float(np.max(np.abs(hess - np.swapaxes(hess, -1, -2))))
    worst = 0.0
    for j in range(d):
        for b in range(d):
            e = np.zeros((d, d))
            e[j, b] = 1.0
            fd = (model.s(samples + step * e) - model.s(samples - step * e)) \
                / (2.0 * step)
            col = hess[..., :, j * d + b].reshape(fd.shape)
            scale = max(1.0, float(np.max(np.abs(hess))))
            worst = max(worst, float(np.max(np.abs(fd - col))) / scale)
    passed = worst < rtol and sym < 1e-12 * max(1.0, float(np.max(np.abs(hess))))
    return CheckReport(passed, worst, {"symmetry_defect": sym})


def fit_growth_constants(model, samples):
    """Fit the polynomial growth envelope of W and S on the samples.

    Certifies, with reported constants, that on the sample set
        c |F|^p - c0   <= W(F) <= C_w (1 + |F|^p),
        |S(F)|         <= C_s (1 + |F|^{p-1}).
    The additive offset c0 absorbs the energy's normalization: nonconvex
    wells dip below zero so the bare form c(|F|^p - 1) cannot hold pointwise.
    """
    samples = np.asarray(samples, dtype=float)
    w, s, _ = _require_finite(model, samples)
    r = np.sqrt(np.sum(samples ** 2, axis=(-2, -1)))
    rp = r ** model.p
    big = rp >= np.quantile(rp, 0.75)
    c_lower = 0.9 * float(np.min(w[big] / rp[big]))
    if c_lower <= 0.0:
        return CheckReport(False, c_lower,
                           {"reason": "no coercive lower bound on the "
                                      "sampled range", "c": c_lower,
                            "c_offset": float("nan"), "C_w": float("nan"),
                            "C_s": float("nan")})
    c_offset = max(0.0, float(np.max(c_lower * rp - w)))
    c_upper = float(np.max(np.abs(w) / (1.0 + rp)))
    smag = np.sqrt(np.sum(s ** 2, axis=(-2, -1)))
    c_stress = float(np.max(smag / (1.0 + r ** (model.p - 1.0))))
    ok = np.all(w >= c_lower * rp - c_offset - 1e-12) and \
        np.all(np.abs(w) <= c_upper * (1.0 + rp) + 1e-12)
    return CheckReport(bool(ok), c_lower,
                       {"c": c_lower, "c_offset": c_offset,
                        "C_w": c_upper, "C_s": c_stress})
