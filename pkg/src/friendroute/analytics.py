"""Probability model for how often shared routes pay off.

The ``p_*`` functions evaluate the model's formulas exactly as written, with
a validity flag where a value is undefined or leaves [0, 1].
:func:`oracle_contact_model` is an independent reference: a sender makes
``T_c`` distinct uniform contacts among the other ``T_n - 1`` nodes, ``E_n``
of which had their routes exposed, sampled by Monte Carlo and cross-checked
against the hypergeometric closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticsInput:
    T_n: int  # total nodes
    K_n: int  # nodes in cache
    U_n: int  # nodes with unknown routes
    E_n: int  # exposed nodes
    T_out: float  # lifetime of shared routes, s
    T_avg: float  # mean time per contact, s

    def __post_init__(self):
        if not 0 <= self.E_n <= self.U_n <= self.T_n:
            raise DomainError("need 0 <= E_n <= U_n <= T_n")
        if self.K_n < 0:
            raise DomainError("K_n must be nonnegative")
        if self.T_out < 0:
            raise DomainError("T_out must be nonnegative")
        if self.T_avg <= 0:
            raise DomainError("T_avg must be positive")

    @property
    def T_c(self) -> int:
        return calls_before_expiry(self.T_out, self.T_avg)


@dataclass(frozen=True)
class ModelResult:
    value: float
    valid: bool
    note: str = ""


def comb(n: int, k: int) -> int:
    """Binomial coefficient, 0 outside 0 <= k <= n."""
    if n < 0:
        raise DomainError(f"comb undefined for n={n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def calls_before_expiry(T_out: float, T_avg: float) -> int:
    # a partial call does not complete before expiry
    if T_avg <= 0:
        raise DomainError("T_avg must be positive")
    if T_out < 0:
        raise DomainError("T_out must be nonnegative")
    return math.floor(T_out / T_avg)


def route_gain_ratio(sender_cache: int, receiver_cache: int) -> float:
    """Sender cache size over receiver cache size.

    Only a relative efficiency proxy: efficiency is proportional to it with
    an unknown constant.
    """
    if receiver_cache < 1:
        raise DomainError("receiver cache must hold at least one route")
    return sender_cache / receiver_cache


def _ratio(num: int, den: int, label: str) -> ModelResult:
    if den == 0:
        return ModelResult(math.inf, False, f"{label}: denominator is zero")
    v = num / den
    notes = []
    if num == 0:
        notes.append(f"{label}: numerator is zero (k > n)")
    ok = 0.0 <= v <= 1.0
    if not ok:
        notes.append(f"{label}: {v:g} outside [0, 1]")
    return ModelResult(v, ok, "; ".join(notes))


def p_unknown(inp: AnalyticsInput) -> ModelResult:
    """comb(U_n, T_c) / comb(T_n, U_n)."""
    return _ratio(comb(inp.U_n, inp.T_c), comb(inp.T_n, inp.U_n), "P_u")


def p_exposed(inp: AnalyticsInput) -> ModelResult:
    """comb(E_n, T_c) / comb(U_n, E_n)."""
    return _ratio(comb(inp.E_n, inp.T_c), comb(inp.U_n, inp.E_n), "P_e")


def p_contact_exposed(pu: ModelResult, pe: ModelResult) -> ModelResult:
    v = pu.value * pe.value
    if math.isnan(v):
        v = math.inf
    notes = [n for n in (pu.note, pe.note) if n]
    valid = pu.valid and pe.valid
    if not 0.0 <= v <= 1.0:
        notes.append(f"P={v:g} clamped to [0, 1]")
        v = min(max(v, 0.0), 1.0)
        valid = False
    return ModelResult(v, valid, "; ".join(notes))


def poisson_pmf(x: int, lam: float) -> float:
    if x < 0 or lam < 0:
        raise DomainError("poisson_pmf needs x >= 0 and lam >= 0")
    if lam == 0:
        return 1.0 if x == 0 else 0.0
    if x <= 20:
        return math.exp(-lam) * lam ** x / math.factorial(x)
    return math.exp(-lam + x * math.log(lam) - math.lgamma(x + 1))


def p_none(n: int, P: float) -> float:
    """Probability that no exposed node is contacted, exp(-n P)."""
    return math.exp(-n * P)


def expected_exposed_contacts(P: float, E_n: int) -> float:
    return P * E_n


@dataclass(frozen=True)
class ModelTable:
    T_c: int
    K_n: int
    P_u: ModelResult
    P_e: ModelResult
    P: ModelResult
    lam: float
    p_none: float
    T_e: float
    rgr: float | None = None


def evaluate(inp: AnalyticsInput, receiver_cache: int | None = None) -> ModelTable:
    pu = p_unknown(inp)
    pe = p_exposed(inp)
    P = p_contact_exposed(pu, pe)
    lam = inp.T_n * P.value
    rgr = route_gain_ratio(inp.K_n, receiver_cache) if receiver_cache else None
    return ModelTable(inp.T_c, inp.K_n, pu, pe, P, lam, p_none(inp.T_n, P.value),
                      expected_exposed_contacts(P.value, inp.E_n), rgr)


@dataclass(frozen=True)
class OracleResult:
    p_any_exposed: float
    p_any_stderr: float
    mean_exposed: float
    mean_stderr: float
    exact_p_any: float
    exact_mean: float

    def agrees(self, k: float = 3.0) -> bool:
        def close(est, se, exact):
            return abs(est - exact) <= k * se if se > 0 else est == exact
        return (close(self.p_any_exposed, self.p_any_stderr, self.exact_p_any)
                and close(self.mean_exposed, self.mean_stderr, self.exact_mean))


def exact_contact_model(T_n: int, E_n: int, T_c: int) -> tuple[float, float]:
    """Closed-form P(at least one exposed contact) and mean exposed contacts."""
    others = T_n - 1
    if T_c > others:
        raise DomainError("T_c cannot exceed T_n - 1 distinct contacts")
    p_any = 1 - comb(others - E_n, T_c) / comb(others, T_c)
    return p_any, T_c * E_n / others


def oracle_contact_model(inp: AnalyticsInput, trials: int, seed=0, T_c: int | None = None) -> OracleResult:
    T_c = inp.T_c if T_c is None else T_c
    others = inp.T_n - 1
    if T_c > others:
        raise DomainError(f"T_c={T_c} exceeds the {others} other nodes")
    if trials < 1:
        raise DomainError("need at least one trial")
    exact_p, exact_m = exact_contact_model(inp.T_n, inp.E_n, T_c)
    rng = np.random.default_rng(seed)
    if T_c == 0:
        hits = np.zeros(trials)
    else:
        # contacts = T_c smallest of iid uniform keys, i.e. a uniform T_c-subset;
        # the first E_n of the other nodes are the exposed ones
        keys = rng.random((trials, others))
        picked = np.argpartition(keys, T_c - 1, axis=1)[:, :T_c]
        hits = (picked < inp.E_n).sum(axis=1).astype(float)
    anyhit = (hits > 0).astype(float)
    sqrt_n = math.sqrt(trials)
    return OracleResult(
        float(anyhit.mean()), float(anyhit.std(ddof=1) / sqrt_n) if trials > 1 else 0.0,
        float(hits.mean()), float(hits.std(ddof=1) / sqrt_n) if trials > 1 else 0.0,
        exact_p, exact_m)
