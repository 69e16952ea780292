"""Rate matrices on integer windows: monotonicity checks and Siegmund-type duals.

A continuous-time chain on the window ``[lo, hi]`` is described by its
off-diagonal jump rates.  Raw rates may target states outside the window;
a boundary policy decides what the effective generator does with that mass.
Everything else in the module (monotonicity criteria, dual construction,
transition matrices, duality verification) operates on that effective
generator, so the policy is applied in exactly one place.

Killed mass is accounted as a jump to an absorbing cemetery sitting below
every state.  That convention makes the two monotonicity criteria (tail
sums over a dense generator, and per-offset jump-rate conditions) agree
verdict-for-verdict on substochastic matrices, and it matches how the
Monte Carlo routines score killed paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import (
    DualRateNegative,
    InputFormatError,
    NegativeRate,
    NotMonotone,
)

BOUNDARY_POLICIES = ("absorb", "reflect", "kill")

# Monotonicity comparisons are made relative to the local exit-rate scale.
MONO_RTOL = 1e-12

# Default ceiling for the sup-norm duality discrepancy on the margin box.
DUALITY_TOL = 1e-8

# Poisson series in the uniformized exponential is cut once this much of
# the step's time scale is covered; see transition_matrix.
EXPM_TOL = 1e-12


@dataclass(frozen=True)
class RateMatrix:
    """Off-diagonal jump rates of a chain on a finite integer window.

    ``rates`` maps ``(n, m)`` to the rate of jumping from state ``n`` by the
    signed offset ``m`` (``m != 0``).  Targets outside ``[lo, hi]`` are legal
    in the raw table; ``boundary`` decides their fate:

    * ``"absorb"``: out-of-window jumps are clamped to the nearest edge and
      the edge states themselves are frozen (their generator rows are zero).
    * ``"reflect"``: out-of-window jumps are clamped to the nearest edge and
      the chain keeps moving; a jump clamped onto its own source is dropped.
    * ``"kill"``: out-of-window mass is removed from the window.
    """

    lo: int
    hi: int
    boundary: str
    rates: Mapping[Tuple[int, int], float]

    def __post_init__(self):
        if int(self.lo) != self.lo or int(self.hi) != self.hi:
            raise InputFormatError("window edges must be integers")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        if self.lo > self.hi:
            raise InputFormatError(f"empty window [{self.lo}, {self.hi}]")
        if self.boundary not in BOUNDARY_POLICIES:
            raise InputFormatError(
                f"unknown boundary policy {self.boundary!r}; "
                f"expected one of {BOUNDARY_POLICIES}"
            )
        clean: Dict[Tuple[int, int], float] = {}
        for key, value in dict(self.rates).items():
            try:
                n, m = key
                n = int(n)
                m = int(m)
                r = float(value)
            except (TypeError, ValueError) as exc:
                raise InputFormatError(f"bad rate entry {key!r}: {value!r}") from exc
            if m == 0:
                raise InputFormatError(f"offset 0 at state {n} is not a jump")
            if not (self.lo <= n <= self.hi):
                raise InputFormatError(
                    f"source state {n} outside window [{self.lo}, {self.hi}]"
                )
            clean[(n, m)] = r
        object.__setattr__(self, "rates", clean)

    @property
    def n_states(self) -> int:
        return self.hi - self.lo + 1

    def states(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)


@dataclass
class Violation:
    """One failed monotonicity condition for the adjacent pair (n, n+1).

    ``kind`` is ``"tail"`` (dense tail sums; ``index`` is the threshold
    state, condition lhs <= rhs), ``"up"`` (per-offset upward condition at
    jump width ``index``, lhs <= rhs) or ``"down"`` (per-offset downward
    condition at width ``index``, where lhs is the available down-mass from
    n and the condition is lhs >= rhs).  ``deficit`` is always the positive
    violation magnitude.
    """

    n: int
    kind: str
    index: int
    lhs: float
    rhs: float
    deficit: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "index": self.index,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "deficit": self.deficit,
        }


@dataclass
class MonotonicityReport:
    ok: bool
    method: str
    tol: float
    checked: int
    max_deficit: float
    violations: List[Violation] = field(default_factory=list)
    # Set only for method="both": whether the two routes reached the same
    # verdict.  They are algebraically equivalent, so False flags a bug.
    agreement: Optional[bool] = None

    def to_dict(self, limit: int = 100) -> dict:
        out = {
            "ok": self.ok,
            "monotone": self.ok,
            "method": self.method,
            "tol": self.tol,
            "checked_pairs": self.checked,
            "max_deficit": self.max_deficit,
            "n_violations": len(self.violations),
            "violations": [v.to_dict() for v in self.violations[:limit]],
        }
        if self.agreement is not None:
            out["agreement"] = self.agreement
        return out


@dataclass
class DualityReport:
    ok: bool
    t: float
    margin: int
    tol: float
    sup_margin: float
    sup_full: float
    at: Tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "t": self.t,
            "margin": self.margin,
            "tol": self.tol,
            "sup_margin": self.sup_margin,
            "sup_full": self.sup_full,
            "at": list(self.at),
        }


@dataclass(frozen=True)
class TransitionMatrix:
    """Time-t transition probabilities of the effective generator.

    ``P[i, j]`` is the probability of sitting at state ``lo + j`` at time t
    having started at ``lo + i`` and never been killed; ``defect[i]`` is the
    killed mass, so each row of P sums to ``1 - defect[i]``.
    """

    lo: int
    hi: int
    t: float
    P: np.ndarray
    defect: np.ndarray

    @property
    def n_states(self) -> int:
        return self.hi - self.lo + 1

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "t": self.t,
            "P": self.P.tolist(),
            "defect": self.defect.tolist(),
        }


@dataclass
class DominanceReport:
    ok: bool
    t: float
    tol: float
    checked: int
    max_violation: float
    at: Tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "t": self.t,
            "tol": self.tol,
            "checked": self.checked,
            "max_violation": self.max_violation,
            "at": list(self.at),
        }


def validate_qmatrix(rm: RateMatrix) -> dict:
    """Check rate values and return a small summary of the table.

    Raises NegativeRate for a negative entry and InputFormatError for a
    non-finite one.  Structural problems (bad window, offset zero, unknown
    policy) are already rejected by the RateMatrix constructor.
    """
    for (n, m), r in rm.rates.items():
        if not math.isfinite(r):
            raise InputFormatError(f"rate at ({n}, {m}) is not finite: {r!r}")
        if r < 0.0:
            raise NegativeRate(n, m, r)
    q, kill = effective_generator(rm)
    exit_rates = -np.diag(q)
    return {
        "n_states": rm.n_states,
        "n_rates": len(rm.rates),
        "max_exit_rate": float(exit_rates.max(initial=0.0)),
        "conservative": bool(np.all(kill == 0.0)),
        "total_kill_rate": float(kill.sum()),
    }


def effective_generator(rm: RateMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Dense generator and kill-rate vector induced by the boundary policy.

    Returns ``(q, kill)`` where ``q`` is (N, N) with row sums ``-kill``.
    The kill vector is nonzero only under the "kill" policy.
    """
    n_states = rm.n_states
    q = np.zeros((n_states, n_states))
    kill = np.zeros(n_states)
    for (n, m), r in rm.rates.items():
        if r == 0.0:
            continue
        i = n - rm.lo
        tgt = n + m
        if rm.lo <= tgt <= rm.hi:
            j = tgt - rm.lo
            q[i, j] += r
            q[i, i] -= r
        elif rm.boundary == "kill":
            kill[i] += r
            q[i, i] -= r
        else:
            j = 0 if tgt < rm.lo else n_states - 1
            if j != i:
                q[i, j] += r
                q[i, i] -= r
            # clamped onto its own source: no net motion, drop the rate
    if rm.boundary == "absorb":
        q[0, :] = 0.0
        q[n_states - 1, :] = 0.0
    return q, kill


def from_dense(
    lo: int,
    hi: int,
    q: np.ndarray,
    boundary: str = "kill",
    kill: Optional[np.ndarray] = None,
) -> RateMatrix:
    """Rate table from a dense array's off-diagonal part (diagonal ignored).

    A kill vector, if given, is encoded as jumps past the top edge, which
    only the "kill" policy maps back to killing.
    """
    q = np.asarray(q, dtype=float)
    n_states = hi - lo + 1
    if q.shape != (n_states, n_states):
        raise InputFormatError(
            f"dense array shape {q.shape} does not match window [{lo}, {hi}]"
        )
    rates: Dict[Tuple[int, int], float] = {}
    for i in range(n_states):
        for j in range(n_states):
            if i != j and q[i, j] != 0.0:
                rates[(lo + i, j - i)] = float(q[i, j])
    if kill is not None:
        kill = np.asarray(kill, dtype=float)
        if np.any(kill != 0.0) and boundary != "kill":
            raise InputFormatError(
                "a kill vector is only representable under the 'kill' policy"
            )
        for i in range(n_states):
            if kill[i] != 0.0:
                rates[(lo + i, hi + 1 - (lo + i))] = float(kill[i])
    return RateMatrix(lo, hi, boundary, rates)


def _tail_sums(q: np.ndarray) -> np.ndarray:
    """T[i, l] = sum_{j >= l} q[i, j]."""
    return np.flip(np.cumsum(np.flip(q, axis=1), axis=1), axis=1)


def check_monotone(
    rm: RateMatrix, tol: float = MONO_RTOL, method: str = "both"
) -> MonotonicityReport:
    """Decide stochastic monotonicity of the effective generator.

    Two independent routes are implemented.  "tails" compares, for every
    adjacent pair of states and every threshold other than the one that
    separates the pair, the dense tail sums of the two generator rows.
    "offsets" checks the per-jump-width conditions on the rate table (one
    family for upward widths, one for downward widths, with killed mass
    counted as a downward jump past every threshold).  The two are
    rearrangements of each other; "both" runs them both and records whether
    the verdicts agree.

    ``tol`` is relative: each pair's conditions are slack by
    ``tol * max(local exit rates)``.
    """
    validate_qmatrix(rm)
    if method == "tails":
        return _check_tails(rm, tol)
    if method == "offsets":
        return _check_offsets(rm, tol)
    if method != "both":
        raise InputFormatError(f"unknown method {method!r}")
    rep_t = _check_tails(rm, tol)
    rep_o = _check_offsets(rm, tol)
    return MonotonicityReport(
        ok=rep_t.ok and rep_o.ok,
        method="both",
        tol=tol,
        checked=rep_t.checked + rep_o.checked,
        max_deficit=max(rep_t.max_deficit, rep_o.max_deficit),
        violations=rep_t.violations + rep_o.violations,
        agreement=(rep_t.ok == rep_o.ok),
    )


def _check_tails(rm: RateMatrix, tol: float) -> MonotonicityReport:
    q, _ = effective_generator(rm)
    n_states = q.shape[0]
    if n_states < 2:
        return MonotonicityReport(True, "tails", tol, 0, 0.0)
    tails = _tail_sums(q)
    exit_scale = np.abs(np.diag(q))
    thr = tol * np.maximum(exit_scale[:-1], exit_scale[1:])
    # deficit[i, l] > 0 means the pair (lo+i, lo+i+1) fails at threshold lo+l
    deficit = tails[:-1, :] - tails[1:, :]
    mask = deficit > thr[:, None]
    pairs = np.arange(n_states - 1)
    mask[pairs, pairs + 1] = False  # threshold separating the pair is exempt
    violations = [
        Violation(
            rm.lo + int(i),
            "tail",
            rm.lo + int(l),
            float(tails[i, l]),
            float(tails[i + 1, l]),
            float(deficit[i, l]),
        )
        for i, l in zip(*np.nonzero(mask))
    ]
    max_def = max((v.deficit for v in violations), default=0.0)
    checked = (n_states - 1) * (n_states - 1)
    return MonotonicityReport(
        ok=not violations,
        method="tails",
        tol=tol,
        checked=checked,
        max_deficit=max_def,
        violations=violations,
    )


def _check_offsets(rm: RateMatrix, tol: float) -> MonotonicityReport:
    q, kill = effective_generator(rm)
    n_states = q.shape[0]
    if n_states < 2:
        return MonotonicityReport(True, "offsets", tol, 0, 0.0)
    exit_scale = np.abs(np.diag(q))
    violations: List[Violation] = []
    checked = 0

    def rtail(v: np.ndarray, pad: int) -> np.ndarray:
        # tau[k-1] = sum of v[k-1:], padded with `pad` trailing zeros
        tau = np.zeros(len(v) + pad)
        if len(v):
            tau[: len(v)] = np.cumsum(v[::-1])[::-1]
        return tau

    for i in range(n_states - 1):
        n = rm.lo + i
        thr = tol * max(exit_scale[i], exit_scale[i + 1])

        # upward widths k = 2 .. n_states-1-i: mass from n jumping at least
        # k up must be covered by mass from n+1 jumping at least k-1 up
        up_n = q[i, i + 1 :]
        up_n1 = q[i + 1, i + 2 :]
        if len(up_n) >= 2:
            tau_n = rtail(up_n, 0)
            tau_n1 = rtail(up_n1, 1)
            lhs = tau_n[1:]
            rhs = up_n1[: len(up_n) - 1] + tau_n1[1 : len(up_n)]
            checked += len(lhs)
            for p in np.nonzero(lhs > rhs + thr)[0]:
                violations.append(
                    Violation(
                        n, "up", int(p) + 2, float(lhs[p]), float(rhs[p]),
                        float(lhs[p] - rhs[p]),
                    )
                )

        # downward widths k = 2 .. i+2: mass from n+1 jumping at least k down
        # must be covered by mass from n jumping at least k-1 down; the kill
        # rate counts as a downward jump past every threshold
        dn_n = q[i, :i][::-1]  # dn_n[m-1] = rate of jump n -> n-m
        dn_n1 = q[i + 1, : i + 1][::-1]
        tau_n = rtail(dn_n, 2) + kill[i]
        tau_n1 = rtail(dn_n1, 1) + kill[i + 1]
        single = np.concatenate([dn_n, [0.0]])  # jump to lo-1 has no rate
        lhs = single + tau_n[1:]
        rhs = tau_n1[1:]
        checked += len(lhs)
        for p in np.nonzero(rhs > lhs + thr)[0]:
            violations.append(
                Violation(
                    n, "down", int(p) + 2, float(lhs[p]), float(rhs[p]),
                    float(rhs[p] - lhs[p]),
                )
            )

    max_def = max((v.deficit for v in violations), default=0.0)
    return MonotonicityReport(
        ok=not violations,
        method="offsets",
        tol=tol,
        checked=checked,
        max_deficit=max_def,
        violations=violations,
    )


def dual_qmatrix(
    rm: RateMatrix, require_monotone: bool = True, tol: float = MONO_RTOL
) -> RateMatrix:
    """Siegmund-type dual of the effective generator, on the same window.

    Row y of the dual is built from the tail sums T[k, y] = sum_{j>=y} q[k, j]
    as differences T[k, y] - T[k-1, y] (with the row below the window read as
    zero).  With the indicator kernel F[x, y] = 1{x >= y} this gives
    q @ F == F @ dual.T exactly, so the semigroup duality identity holds to
    numerical precision on the whole window; no truncation margin is needed.

    Off-diagonal dual entries are nonnegative exactly when the input is
    stochastically monotone.  The dual is substochastic in general: row y
    leaks at rate kill_hi + sum_{j < y} q[hi, j] (mass the top state sends
    below y), encoded as a jump past the top edge under the "kill" policy.
    For a conservative input the bottom dual row vanishes; when the input
    kills, row lo carries the kill-rate differences kill_{k-1} - kill_k,
    which the identity above requires.

    With ``require_monotone`` the input is checked first and NotMonotone is
    raised on failure; otherwise a genuinely negative dual rate (beyond
    ``tol`` times the exit-rate scale) raises DualRateNegative.  Either way,
    roundoff-scale negatives are clamped to zero.
    """
    summary = validate_qmatrix(rm)
    if require_monotone:
        report = check_monotone(rm, tol=tol, method="tails")
        if not report.ok:
            raise NotMonotone(report)
    q, kill = effective_generator(rm)
    n_states = q.shape[0]
    tails = _tail_sums(q)
    below = np.vstack([np.zeros((1, n_states)), tails[:-1, :]])
    dual = (tails - below).T  # dual[y, k] = T[k, y] - T[k-1, y]

    off = dual.copy()
    np.fill_diagonal(off, 0.0)
    thr = tol * summary["max_exit_rate"]
    neg = np.nonzero(off < -thr)
    if neg[0].size:
        y, k = int(neg[0][0]), int(neg[1][0])
        raise DualRateNegative(rm.lo + y, rm.lo + k, float(off[y, k]))
    np.clip(off, 0.0, None, out=off)

    # leak rate of dual row y: mass the top forward row sends below y,
    # accumulated from nonnegative terms so it can never go negative
    top = q[n_states - 1].copy()
    top[n_states - 1] = 0.0
    leak = kill[n_states - 1] + np.concatenate([[0.0], np.cumsum(top)[:-1]])

    return from_dense(rm.lo, rm.hi, off, boundary="kill", kill=leak)


def transition_matrix(rm: RateMatrix, t: float, tol: float = EXPM_TOL) -> TransitionMatrix:
    """Substochastic transition matrix exp(t q) of the effective generator.

    Computed by uniformization: with lam the largest exit rate and
    B = I + q/lam, the series sum_k Poisson(lam t)(k) B^k is cut once the
    accumulated Poisson weight reaches 1 - tol; since the powers of B have
    sup-norm at most one, the cut mass bounds the error.  Time steps with
    lam * t above 64 are halved recursively and the result squared, with a
    correspondingly tightened series tolerance.
    """
    validate_qmatrix(rm)
    t = float(t)
    if t < 0.0:
        raise InputFormatError(f"negative time {t!r}")
    q, _ = effective_generator(rm)
    p = _expm_uniformized(q, t, tol)
    defect = 1.0 - p.sum(axis=1)
    np.clip(defect, 0.0, 1.0, out=defect)
    return TransitionMatrix(rm.lo, rm.hi, t, p, defect)


def _expm_uniformized(q: np.ndarray, t: float, tol: float) -> np.ndarray:
    n_states = q.shape[0]
    lam = float(np.max(-np.diag(q), initial=0.0))
    if t == 0.0 or lam == 0.0:
        return np.eye(n_states)
    halvings = 0
    while lam * t / (2.0 ** halvings) > 64.0:
        halvings += 1
    step_tol = max(tol / (2.0 ** halvings), 1e-15)
    a = lam * t / (2.0 ** halvings)
    b = np.eye(n_states) + q / lam
    powers = np.eye(n_states)
    weight = math.exp(-a)
    total = weight * np.eye(n_states)
    covered = weight
    k = 0
    k_max = int(a + 40.0 * math.sqrt(a + 1.0)) + 100
    while covered < 1.0 - step_tol and k < k_max:
        k += 1
        powers = powers @ b
        weight *= a / k
        total += weight * powers
        covered += weight
    for _ in range(halvings):
        total = total @ total
    return total


def check_stochastic_dominance(
    tm: TransitionMatrix, tol: float = DUALITY_TOL
) -> DominanceReport:
    """Verify that the transition rows are stochastically ordered.

    For every adjacent pair of start states and every threshold, the
    probability of sitting at or above the threshold must be nondecreasing
    in the start state (killed mass counts below every threshold).
    """
    p = tm.P
    n_states = p.shape[0]
    if n_states < 2:
        return DominanceReport(True, tm.t, tol, 0, 0.0, (tm.lo, tm.lo))
    tails = _tail_sums(p)
    deficit = tails[:-1, :] - tails[1:, :]
    i, l = np.unravel_index(np.argmax(deficit), deficit.shape)
    worst = float(deficit[i, l])
    return DominanceReport(
        ok=worst <= tol,
        t=tm.t,
        tol=tol,
        checked=deficit.size,
        max_violation=max(worst, 0.0),
        at=(tm.lo + int(i), tm.lo + int(l)),
    )


def verify_duality(
    rm: RateMatrix,
    t: float,
    margin: Optional[int] = None,
    tol: float = DUALITY_TOL,
    dual: Optional[RateMatrix] = None,
) -> DualityReport:
    """Compare both sides of the duality identity at time t.

    The forward side is P(X_t >= y | X_0 = x); the dual side is
    P(Y_t <= x | Y_0 = y), with killed paths scoring zero on both sides.
    The report carries the sup discrepancy over the margin-trimmed box of
    start pairs (margin defaults to a quarter of the window, the
    conventional guard for duals obtained by truncation) and over the full
    window.  The dual built here is exact on the window, so the two sups
    agree to numerical precision.
    """
    n_states = rm.n_states
    if margin is None:
        margin = math.ceil(n_states / 4)
    margin = max(0, min(int(margin), (n_states - 1) // 2))
    if dual is None:
        dual = dual_qmatrix(rm)
    p_fwd = transition_matrix(rm, t).P
    p_dual = transition_matrix(dual, t).P
    fwd_tails = _tail_sums(p_fwd)  # [x, y] = P(X_t >= y)
    dual_cum = np.cumsum(p_dual, axis=1)  # [y, x] = P(Y_t <= x)
    disc = np.abs(fwd_tails - dual_cum.T)
    sup_full = float(disc.max())
    box = disc[margin : n_states - margin, margin : n_states - margin]
    bx, by = np.unravel_index(np.argmax(box), box.shape)
    sup_margin = float(box[bx, by])
    return DualityReport(
        ok=sup_margin <= tol,
        t=float(t),
        margin=margin,
        tol=tol,
        sup_margin=sup_margin,
        sup_full=sup_full,
        at=(rm.lo + margin + int(bx), rm.lo + margin + int(by)),
    )


def ratematrix_to_dict(rm: RateMatrix) -> dict:
    return {
        "lo": rm.lo,
        "hi": rm.hi,
        "boundary": rm.boundary,
        "rates": [
            {"n": n, "m": m, "rate": r}
            for (n, m), r in sorted(rm.rates.items())
        ],
    }


def ratematrix_from_dict(obj: dict) -> RateMatrix:
    if not isinstance(obj, dict):
        raise InputFormatError(f"expected a mapping, got {type(obj).__name__}")
    missing = {"lo", "hi", "boundary", "rates"} - set(obj)
    if missing:
        raise InputFormatError(f"missing keys: {sorted(missing)}")
    entries = obj["rates"]
    if not isinstance(entries, list):
        raise InputFormatError("'rates' must be a list of {n, m, rate} entries")
    rates: Dict[Tuple[int, int], float] = {}
    for e in entries:
        try:
            n = int(e["n"])
            m = int(e["m"])
            r = float(e["rate"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"bad rate entry {e!r}") from exc
        if (n, m) in rates:
            raise InputFormatError(f"duplicate rate entry for ({n}, {m})")
        rates[(n, m)] = r
    try:
        lo = int(obj["lo"])
        hi = int(obj["hi"])
    except (TypeError, ValueError) as exc:
        raise InputFormatError("window edges must be integers") from exc
    return RateMatrix(lo, hi, obj["boundary"], rates)
