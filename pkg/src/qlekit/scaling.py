"""Closed-form exponent calculators.

Works with floats or ``fractions.Fraction`` inputs (where no square roots are
needed the result stays exact).
"""
import math
from fractions import Fraction
from dataclasses import dataclass

from .errors import Inconsistent, InvalidArgument, OutOfRange


def q_of_gamma(gamma):
    return 2 / gamma + gamma / 2


def gamma_of_kappa(kappa):
    """gamma = min(sqrt(kappa), 4/sqrt(kappa))."""
    s = math.sqrt(kappa)
    return min(s, 4 / s)


def q_of_kappa(kappa):
    return q_of_gamma(gamma_of_kappa(kappa))


def alpha_of_kappa(kappa):
    return -1 / math.sqrt(kappa)


def relation_solve(alpha=None, beta=None, gamma=None, eta=None):
    """Solve alpha*Q(gamma) = beta - eta - 1 for the one missing argument."""
    given = dict(alpha=alpha, beta=beta, gamma=gamma, eta=eta)
    missing = [k for k, v in given.items() if v is None]
    if len(missing) != 1:
        raise InvalidArgument("exactly one of alpha, beta, gamma, eta must be None")
    if gamma is not None and gamma <= 0:
        raise InvalidArgument("gamma must be positive")
    m = missing[0]
    if m == "eta":
        return beta - 1 - alpha * q_of_gamma(gamma)
    if m == "beta":
        return alpha * q_of_gamma(gamma) + eta + 1
    if m == "alpha":
        return (beta - eta - 1) / q_of_gamma(gamma)
    # gamma: alpha*gamma^2/2 - c*gamma + 2*alpha = 0
    c = beta - eta - 1
    if alpha == 0:
        raise Inconsistent("alpha = 0 does not determine gamma")
    disc = c * c - 4 * alpha * alpha
    if disc < 0:
        raise Inconsistent("no real gamma solves the relation")
    roots = [(c + s * math.sqrt(disc)) / alpha for s in (1, -1)]
    # the two roots multiply to 4, so at most one lies in (0, 2)
    ok = [r for r in roots if 0 < r <= 2 + 1e-12]
    if not ok:
        raise Inconsistent("no gamma in (0, 2] solves the relation")
    return ok[0]


def eta_curves(gamma2):
    """(upper, middle) eta at gamma^2 = gamma2."""
    if not 0 < gamma2 <= 4:
        raise OutOfRange("gamma^2 must lie in (0, 4]")
    half = Fraction(1, 2) if isinstance(gamma2, Fraction) else 0.5
    return 3 / gamma2 - half, 3 * gamma2 / 16 - half


def watabiki_d(kappa):
    if kappa < 0:
        raise OutOfRange("kappa must be nonnegative")
    return 1 + kappa / 4 + math.sqrt((4 + kappa) ** 2 + 16 * kappa) / 4


def holder_exponent(gamma, boundary=(), interior=()):
    """Continuity exponent (Q - beta^*) / (Q + beta_*).

    ``boundary`` holds strengths of log singularities on the circle,
    ``interior`` those inside the disk.
    """
    q = q_of_gamma(gamma)
    lower = max([2 * math.sqrt(2), *boundary, *interior])
    upper = max([2, *(-g for g in boundary)])
    if upper >= q:
        raise OutOfRange("need max(2, -gamma_i) < Q")
    return (q - upper) / (q + lower)


@dataclass
class ExponentRecord:
    gamma: float
    kappa: float
    Q: float
    alpha: float
    beta: float
    eta: float
    d: float
    holder: float
    curve: str


def exponent_record(gamma2, curve):
    """Full record for a point on the 'upper', 'middle' or 'trivial' curve."""
    gamma = math.sqrt(gamma2)
    q = q_of_gamma(gamma)
    if curve == "upper":
        kappa = gamma2
    elif curve == "middle":
        kappa = 16 / gamma2
    elif curve == "trivial":
        kappa = math.nan
    else:
        raise InvalidArgument(f"unknown curve {curve!r}")
    if curve == "trivial":
        alpha, beta, eta, d = 0.0, 0.0, -1.0, math.nan
    else:
        alpha = alpha_of_kappa(kappa)
        beta = alpha * alpha
        eta = relation_solve(alpha=alpha, beta=beta, gamma=gamma)
        d = -gamma / alpha
    try:
        hol = holder_exponent(gamma)
    except OutOfRange:
        hol = math.nan
    return ExponentRecord(gamma, kappa, q, alpha, beta, eta, d, hol, curve)


def curves_table(gamma2_values):
    """Rows (gamma^2, upper eta, middle eta, -1)."""
    return [(g2, *eta_curves(g2), -1) for g2 in gamma2_values]
