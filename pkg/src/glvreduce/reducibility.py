"""Which interaction entries must vanish for an exact S -> s reduction.

Species are placed at positions 1..S (1-based, matching the triangular
pattern).  Positions 1..s are retained and s+1..S are eliminated, last
position first.  Eliminating the species at position m solves the equation
of the species at position m-1 for it, so the pivot entry is
a[m-1, m].  That solve is clean only if row m-1 carries no species already
replaced by a memory term, which is what the zero set encodes:

    zero_set(S, s) = {(i, j) : s <= i <= S-2, i+1 < j <= S}

Positions are 1-based here; species indices in plans and the rest of the API
are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import SearchBudgetError, UsageError

EXHAUSTIVE_LIMIT = 8


def _check_sizes(S, s):
    if not (isinstance(S, (int, np.integer)) and isinstance(s, (int, np.integer))):
        raise UsageError("S and s must be integers")
    if not (1 <= s <= S):
        raise UsageError(f"need 1 <= s <= S, got S={S}, s={s}")


def zero_set(S, s):
    """Required-zero positions (i, j), 1-based, for reducing S to s."""
    _check_sizes(S, s)
    return [(i, j) for i in range(s, S - 1) for j in range(i + 2, S + 1)]


def rho(S, s):
    """Fraction of the S^2 interaction entries that must be zero."""
    _check_sizes(S, s)
    k = S - s
    return Fraction((k - 1) * k, 2 * S * S)


def rho_limit(alpha):
    """Large-S limit of rho at fixed retained fraction alpha = s/S."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    return (1.0 - alpha) ** 2 / 2.0


def rho_curve(n_points):
    """Rows (alpha, rho_limit(alpha)) on a uniform grid over [0, 1]."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    alphas = np.linspace(0.0, 1.0, n_points)
    return [(float(a), rho_limit(float(a))) for a in alphas]


def rho_curve_csv(n_points):
    lines = ["alpha,rho_limit"]
    lines += [f"{a!r},{r!r}" for a, r in rho_curve(n_points)]
    return "\n".join(lines) + "\n"


def format_rho(value):
    return f"{value.numerator}/{value.denominator} ≈ {float(value):.6f}"


@dataclass
class EliminationPlan:
    S: int
    s: int
    # ordering[pos - 1] is the species at 1-based position pos
    ordering: tuple
    feasible: bool | None = None
    witness_violations: list = field(default_factory=list)

    @property
    def k(self):
        return self.S - self.s

    @property
    def retained(self):
        return tuple(self.ordering[: self.s])

    @property
    def eliminated(self):
        """Eliminated species in elimination order (last position first)."""
        return tuple(self.ordering[m - 1] for m in range(self.S, self.s, -1))

    @property
    def pivot_positions(self):
        """(m, m-1) position pairs in elimination order."""
        return [(m, m - 1) for m in range(self.S, self.s, -1)]

    @property
    def pivots(self):
        """(eliminated species, pivot species) pairs in elimination order."""
        return [(self.ordering[m - 1], self.ordering[p - 1]) for m, p in self.pivot_positions]

    @property
    def required_zeros(self):
        """Required-zero pairs in permuted (1-based position) coordinates."""
        return zero_set(self.S, self.s)

    @property
    def required_zero_species(self):
        """Required-zero entries as 0-based (row species, column species)."""
        return [(self.ordering[i - 1], self.ordering[j - 1]) for i, j in self.required_zeros]

    def violations(self, A):
        """Every nonzero required entry and zero pivot, as readable strings."""
        out = []
        for r, c in self.required_zero_species:
            if A[r, c] != 0.0:
                out.append(f"a({r + 1},{c + 1}) = {float(A[r, c])!r} must be 0")
        for m, p in self.pivots:
            if A[p, m] == 0.0:
                out.append(f"pivot a({p + 1},{m + 1}) is 0")
        return out

    def evaluate(self, A):
        self.witness_violations = self.violations(np.asarray(A))
        self.feasible = not self.witness_violations
        return self

    def to_dict(self):
        return {
            "S": self.S,
            "s": self.s,
            "ordering": [i + 1 for i in self.ordering],
            "retained": [i + 1 for i in self.retained],
            "elimination_order": [i + 1 for i in self.eliminated],
            "pivots": [{"eliminated": m + 1, "pivot": p + 1} for m, p in self.pivots],
            "required_zeros_positions": [list(z) for z in self.required_zeros],
            "required_zeros_species": [[r + 1, c + 1] for r, c in self.required_zero_species],
            "feasible": self.feasible,
            "witness_violations": list(self.witness_violations),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            S=int(doc["S"]),
            s=int(doc["s"]),
            ordering=tuple(int(i) - 1 for i in doc["ordering"]),
            feasible=doc.get("feasible"),
            witness_violations=list(doc.get("witness_violations", [])),
        )


def build_plan_canonical(S, s):
    """Identity-ordering plan; feasibility is left unevaluated."""
    _check_sizes(S, s)
    return EliminationPlan(S, s, tuple(range(S)))


@dataclass
class ReducibilityReport:
    S: int
    s: int
    plan: EliminationPlan | None
    orderings_examined: int
    nodes_visited: int
    complete: bool
    heuristic: bool = False

    @property
    def k(self):
        return self.S - self.s

    @property
    def alpha(self):
        return self.s / self.S

    @property
    def zero_set_size(self):
        return (self.k - 1) * self.k // 2

    @property
    def rho(self):
        return rho(self.S, self.s)

    @property
    def rho_limit(self):
        return rho_limit(self.alpha)

    @property
    def feasible(self):
        return bool(self.plan is not None and self.plan.feasible)

    def to_dict(self):
        r = self.rho
        return {
            "S": self.S,
            "s": self.s,
            "k": self.k,
            "alpha": self.alpha,
            "zero_set_size": self.zero_set_size,
            "rho": f"{r.numerator}/{r.denominator}",
            "rho_decimal": float(r),
            "rho_limit": self.rho_limit,
            "feasible": self.feasible,
            "plan": None if self.plan is None else self.plan.to_dict(),
            "search": {
                "orderings_examined": self.orderings_examined,
                "nodes_visited": self.nodes_visited,
                "complete": self.complete,
                "heuristic": self.heuristic,
            },
        }


def check_reducible(model, retained, *, heuristic=False, max_exhaustive=EXHAUSTIVE_LIMIT):
    """Search species orderings for one meeting the zero and pivot conditions.

    The choice left open by the triangular pattern is which retained species
    sits at position s and how the k eliminated species fill positions
    s+1..S.  Fillings of positions s+1..S are visited in lexicographic order
    by depth-first branch and bound on the violation count, so the search is
    complete: it returns the first feasible ordering, or the first ordering
    with the fewest violations as a witness.  For the
    position-s species, the admissible candidate with the largest |pivot| wins
    (lowest index on ties).
    """
    A = np.asarray(model.A)
    S = A.shape[0]
    given = [int(i) for i in retained]
    retained = sorted(set(given))
    if len(retained) != len(given) or not retained:
        raise UsageError("retained species must be non-empty and distinct")
    if any(not 0 <= i < S for i in retained):
        raise UsageError(f"retained species out of range 1..{S}")
    s = len(retained)
    k = S - s
    eliminated = [i for i in range(S) if i not in set(retained)]

    if k == 0:
        plan = EliminationPlan(S, s, tuple(retained)).evaluate(A)
        return ReducibilityReport(S, s, plan, 1, 1, True)
    if k > max_exhaustive:
        if not heuristic:
            raise SearchBudgetError(
                f"k={k} eliminated species exceeds the exhaustive limit {max_exhaustive}; "
                "pass heuristic=True (--heuristic) for an incomplete greedy search"
            )
        plan = _finish_plan(A, S, s, retained, _greedy_tail(A, eliminated))
        return ReducibilityReport(S, s, plan, 1, k, False, heuristic=True)

    nonzero = A != 0.0
    best = {"count": math.inf, "plan": None}
    stats = {"leaves": 0, "nodes": 0}

    def position_s(tail):
        # tail holds the species at positions s+1..S
        choice = None
        for r in retained:
            c = (0 if nonzero[r, tail[0]] else 1) + sum(1 for col in tail[1:] if nonzero[r, col])
            key = (c, -abs(A[r, tail[0]]), r)
            if choice is None or key < choice[0]:
                choice = (key, r)
        return choice[0][0], choice[1]

    def dfs(tail, remaining, cost):
        stats["nodes"] += 1
        if cost >= best["count"]:
            return
        if not remaining:
            stats["leaves"] += 1
            c, r = position_s(tail)
            if cost + c < best["count"]:
                best["count"] = cost + c
                best["plan"] = (r, tuple(tail))
            return
        for sp in remaining:
            # sp becomes the pivot column of the previous row and a required
            # zero column of every eliminated row before that
            add = 0
            if tail:
                add += 0 if nonzero[tail[-1], sp] else 1
                add += sum(1 for row in tail[:-1] if nonzero[row, sp])
            dfs(tail + [sp], [x for x in remaining if x != sp], cost + add)
            if best["count"] == 0:
                return

    dfs([], eliminated, 0)
    r, tail = best["plan"]
    plan = _finish_plan(A, S, s, retained, tail, r)
    return ReducibilityReport(S, s, plan, stats["leaves"], stats["nodes"], True)


def _finish_plan(A, S, s, retained, tail, at_s=None):
    later = list(tail)
    if at_s is None:
        cands = sorted(retained, key=lambda r: (
            sum(1 for c in later[1:] if A[r, c] != 0) + (A[r, later[0]] == 0),
            -abs(A[r, later[0]]), r))
        at_s = cands[0]
    front = [r for r in retained if r != at_s]
    return EliminationPlan(S, s, tuple(front + [at_s] + later)).evaluate(A)


def _greedy_tail(A, eliminated):
    """Positions s+1..S take species in ascending count of nonzero entries
    towards the other eliminated species."""
    def forward(i):
        return sum(1 for j in eliminated if j != i and A[i, j] != 0)

    return tuple(sorted(eliminated, key=lambda i: (forward(i), i)))


def scrambled_feasible_model(S, s, rng):
    """Dense random interaction matrix with the triangular zeros applied under a
    random species permutation.  Returns (A, retained species, permutation)."""
    A = rng.uniform(0.1, 1.0, size=(S, S)) * rng.choice([-1.0, 1.0], size=(S, S))
    for i, j in zero_set(S, s):
        A[i - 1, j - 1] = 0.0
    perm = rng.permutation(S)  # position p holds species perm[p]
    B = np.empty_like(A)
    B[np.ix_(perm, perm)] = A
    return B, sorted(int(perm[p]) for p in range(s)), perm
