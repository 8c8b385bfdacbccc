"""Memory-method reduction: eliminated species become history integrals.

Each elimination step for species m with pivot species p builds two terms:

* a y-term, the pivot equation solved for x_m::

      y_m = ((dx_p/dt - b_p x_p) / x_p - sum_{j != m} a_pj x_j) / a_pm

* a chi-term, the eliminated equation with y_m substituted and integrated::

      chi_m(t) = x_m(0) + int_0^t [b_m y_m + (sum_{j != m} a_mj x_j + a_mm y_m) y_m] ds

Inside step k, any other eliminated species j is referenced through its
chi-term if it was eliminated earlier and through its y-term if it is
eliminated later.  When the pivot species is itself eliminated later, its
state enters through its y-term and its rate through its chi-integrand.

Operand references are ``Ref(kind, species)`` with kind one of
``x`` (retained state), ``dx`` (retained rate), ``y``, ``chi`` (chi value)
and ``dchi`` (chi integrand).  Rates are per-node inputs and are not
dependency edges; the y/chi operand graph is acyclic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from typing import NamedTuple

import numpy as np

from .errors import (
    ConvergenceError,
    InfeasibleReductionError,
    IntegrationError,
    IntegrityError,
    ParseError,
    SingularityError,
)
from .integrate import time_grid, trajectory_csv, uniform_steps
from .model import check_valid, model_from_dict, model_to_dict
from .reducibility import EliminationPlan

FORMAT = "glvreduce-reduced-system"
VERSION = 1


class Ref(NamedTuple):
    kind: str
    species: int

    def __str__(self):
        return f"{self.kind}:{self.species + 1}"

    @classmethod
    def parse(cls, text):
        kind, _, num = text.partition(":")
        if kind not in ("x", "dx", "y", "chi", "dchi") or not num.isdigit():
            raise IntegrityError(f"bad operand reference {text!r}")
        return cls(kind, int(num) - 1)


@dataclass(frozen=True)
class YTerm:
    eliminated: int
    pivot: int
    pivot_coef: float
    growth: float
    terms: tuple          # ((a_pj, Ref), ...) over j != eliminated, nonzero a_pj
    pivot_state: Ref
    pivot_rate: Ref

    @property
    def coefficients(self):
        """(1/a_pm, b_p, [a_pj ...]) as used by the rearrangement."""
        return (1.0 / self.pivot_coef, self.growth, [a for a, _ in self.terms])

    @property
    def provenance(self):
        p = self.pivot
        out = {("b", p), ("A", p, self.eliminated)}
        out.update(("A", p, ref.species) for _, ref in self.terms)
        return out

    @property
    def dependencies(self):
        refs = [ref for _, ref in self.terms] + [self.pivot_state]
        return sorted({r for r in refs if r.kind in ("y", "chi")})


@dataclass(frozen=True)
class ChiTerm:
    eliminated: int
    initial_value: float
    growth: float
    self_coef: float
    terms: tuple          # ((a_mj, Ref), ...) over j != eliminated, nonzero a_mj

    @property
    def y(self):
        return Ref("y", self.eliminated)

    @property
    def provenance(self):
        m = self.eliminated
        out = {("b", m), ("A", m, m)}
        out.update(("A", m, ref.species) for _, ref in self.terms)
        return out

    @property
    def dependencies(self):
        refs = [ref for _, ref in self.terms] + [self.y]
        return sorted({r for r in refs if r.kind in ("y", "chi")})


@dataclass(frozen=True)
class RetainedEquation:
    """dx_r/dt = x_r (b_r + sum_j a_rj operand_j), eliminated x_j -> chi_j."""

    species: int
    growth: float
    terms: tuple

    @property
    def provenance(self):
        out = {("b", self.species)}
        out.update(("A", self.species, ref.species) for _, ref in self.terms)
        return out


@dataclass(frozen=True)
class Step:
    index: int
    y: YTerm
    chi: ChiTerm
    zero_requirements: tuple   # (row species, col species) pairs this solve relies on

    @property
    def eliminated(self):
        return self.y.eliminated

    @property
    def pivot(self):
        return self.y.pivot


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    model: object
    plan: EliminationPlan
    retained: tuple      # ascending species indices
    steps: tuple         # in elimination order
    equations: tuple     # one RetainedEquation per retained species, same order

    @property
    def eliminated(self):
        return tuple(st.eliminated for st in self.steps)

    def step_for(self, species):
        for st in self.steps:
            if st.eliminated == species:
                return st
        raise KeyError(species)

    def equation_provenance(self, species):
        for eq in self.equations:
            if eq.species == species:
                return eq.provenance
        raise KeyError(species)

    def term_edges(self):
        """Operand edges between terms as {(step, 'y'|'chi'): [(step, kind), ...]}."""
        idx = {st.eliminated: st.index for st in self.steps}
        graph = {}
        for st in self.steps:
            for kind, term in (("y", st.y), ("chi", st.chi)):
                graph[(st.index, kind)] = [(idx[r.species], r.kind) for r in term.dependencies]
        return graph

    def to_dict(self):
        return reduced_system_to_dict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _raise_first_violation(plan):
    first = plan.witness_violations[0]
    raise InfeasibleReductionError(
        f"reduction infeasible: {first}", plan.witness_violations
    )


def build_reduced_system(model, plan):
    """Construct y- and chi-terms for every step of a feasible plan."""
    check_valid(model)
    A, b, x0 = model.A, model.b, model.x0
    if plan.S != model.S:
        raise InfeasibleReductionError(f"plan is for S={plan.S}, model has S={model.S}")
    if sorted(plan.ordering) != list(range(model.S)):
        raise InfeasibleReductionError("plan ordering is not a permutation of the species")
    plan = EliminationPlan(plan.S, plan.s, tuple(plan.ordering)).evaluate(A)
    if not plan.feasible:
        _raise_first_violation(plan)

    retained = tuple(sorted(plan.retained))
    order = plan.eliminated
    step_of = {sp: k for k, sp in enumerate(order)}
    pos = {sp: i + 1 for i, sp in enumerate(plan.ordering)}

    def operand(j, k):
        if j not in step_of:
            return Ref("x", j)
        return Ref("chi", j) if step_of[j] < k else Ref("y", j)

    steps = []
    for k, (m, p) in enumerate(plan.pivots):
        yterms = tuple(
            (float(A[p, j]), operand(j, k))
            for j in range(model.S) if j != m and A[p, j] != 0.0
        )
        if p in step_of:
            pstate, prate = Ref("y", p), Ref("dchi", p)
        else:
            pstate, prate = Ref("x", p), Ref("dx", p)
        y = YTerm(m, p, float(A[p, m]), float(b[p]), yterms, pstate, prate)
        chiterms = tuple(
            (float(A[m, j]), operand(j, k))
            for j in range(model.S) if j != m and A[m, j] != 0.0
        )
        chi = ChiTerm(m, float(x0[m]), float(b[m]), float(A[m, m]), chiterms)
        zeros = tuple(
            (p, sp) for sp in plan.ordering if pos[sp] > pos[p] + 1
        )
        steps.append(Step(k, y, chi, zeros))

    equations = tuple(
        RetainedEquation(
            r, float(b[r]),
            tuple((float(A[r, j]), operand(j, len(order))) for j in range(model.S) if A[r, j] != 0.0),
        )
        for r in retained
    )
    rs = ReducedSystem(model, plan, retained, tuple(steps), equations)
    _check_acyclic(rs.term_edges())
    return rs


def _check_acyclic(graph):
    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError as exc:
        raise IntegrityError(f"cyclic term dependency: {exc.args[1]}") from None


def _resolve(ref, tables):
    table = tables.get(ref.kind)
    if table is None:
        raise KeyError(f"no values supplied for {ref.kind} operands")
    return table[ref.species]


def evaluate_y(term, retained_state, retained_derivative, chi_values,
               y_values=None, chi_derivatives=None):
    """Evaluate a y-term.

    All value arguments are indexable by species (dicts or full-length
    sequences).  ``y_values`` and ``chi_derivatives`` are only needed when the
    term references later-eliminated species or an eliminated pivot.
    """
    tables = {
        "x": retained_state, "dx": retained_derivative, "chi": chi_values,
        "y": y_values, "dchi": chi_derivatives,
    }
    return _y(term, tables)


def _y(term, tables):
    xp = _resolve(term.pivot_state, tables)
    if not xp > 0.0:
        raise SingularityError(
            f"pivot species {term.pivot + 1} has non-positive value {xp!r}",
            species=term.pivot,
        )
    dxp = _resolve(term.pivot_rate, tables)
    acc = (dxp - term.growth * xp) / xp
    for a, ref in term.terms:
        acc -= a * _resolve(ref, tables)
    return acc / term.pivot_coef


def chi_integrand(term, y, tables):
    """b_m y + (sum_j a_mj operand_j + a_mm y) y."""
    acc = term.self_coef * y
    for a, ref in term.terms:
        acc += a * _resolve(ref, tables)
    return term.growth * y + acc * y


def _rate(eq, tables):
    acc = eq.growth
    for a, ref in eq.terms:
        acc += a * _resolve(ref, tables)
    return tables["x"][eq.species] * acc


@dataclass(frozen=True, eq=False)
class ReducedTrajectory:
    t: np.ndarray
    retained: tuple
    eliminated: tuple        # elimination order; columns of chi/integrand/y
    x: np.ndarray            # (N+1, s)
    dx: np.ndarray           # (N+1, s)
    chi: np.ndarray          # (N+1, k)
    integrand: np.ndarray    # (N+1, k)
    y: np.ndarray            # (N+1, k)
    fp_iterations: np.ndarray  # (N,) iterations per accepted step
    dt: float
    labels: tuple

    @property
    def max_fp_iterations(self):
        return int(self.fp_iterations.max()) if self.fp_iterations.size else 0

    def chi_for(self, species):
        return self.chi[:, self.eliminated.index(species)]

    def to_csv(self):
        cols = [(f"chi_{self.labels[m]}", self.chi_for(m)) for m in sorted(self.eliminated)]
        return trajectory_csv(self.t, self.x, [self.labels[r] for r in self.retained], cols)


class _NodeEvaluator:
    """Per-node evaluation of retained rates, y-terms and chi integrands."""

    def __init__(self, rs):
        S = rs.model.S
        self.rs = rs
        self.xs = [0.0] * S
        self.dxs = [0.0] * S
        self.chis = [0.0] * S
        self.ys = [0.0] * S
        self.dchis = [0.0] * S
        self.tables = {"x": self.xs, "dx": self.dxs, "chi": self.chis,
                       "y": self.ys, "dchi": self.dchis}
        self.eval_order = tuple(reversed(rs.steps))

    def set_state(self, xr, chi):
        for r, v in zip(self.rs.retained, xr):
            self.xs[r] = v
        for m, v in zip(self.rs.eliminated, chi):
            self.chis[m] = v

    def rates(self, xr, chi):
        self.set_state(xr, chi)
        return [_rate(eq, self.tables) for eq in self.rs.equations]

    def full(self, xr, chi):
        """Rates, y values and integrands at one node, in elimination order."""
        dxr = self.rates(xr, chi)
        for r, v in zip(self.rs.retained, dxr):
            self.dxs[r] = v
        for st in self.eval_order:
            m = st.eliminated
            y = _y(st.y, self.tables)
            self.ys[m] = y
            self.dchis[m] = chi_integrand(st.chi, y, self.tables)
        elim = self.rs.eliminated
        return dxr, [self.ys[m] for m in elim], [self.dchis[m] for m in elim]


def solve_reduced(rs, t_end, dt, fp_tol=1e-12, fp_max_iter=50):
    """Integrate the reduced system for the retained species.

    Retained states advance with RK4.  Chi values are x_m(0) plus the
    cumulative trapezoidal integral of the stored integrand history.  The
    newest integrand sample depends on the newest retained rates, which in
    turn depend on chi, so each node solves that fixed point by iteration,
    seeded with the previous node's chi values.  Within a step the RK4
    stages see chi extrapolated linearly from the node value and integrand.
    """
    n = uniform_steps(t_end, dt)
    ev = _NodeEvaluator(rs)
    s, k = len(rs.retained), len(rs.steps)
    x0 = rs.model.x0
    xr = [float(x0[r]) for r in rs.retained]
    chi = [st.chi.initial_value for st in rs.steps]

    X = np.empty((n + 1, s))
    DX = np.empty((n + 1, s))
    CHI = np.empty((n + 1, k))
    F = np.empty((n + 1, k))
    Y = np.empty((n + 1, k))
    iters = np.zeros(n, dtype=int)

    dxr, y, f = ev.full(xr, chi)
    X[0], DX[0], CHI[0], F[0], Y[0] = xr, dxr, chi, f, y
    half = 0.5 * dt
    sixth = dt / 6.0
    rng = range(s)
    krange = range(k)

    for step in range(n):
        t = step * dt
        chi_mid = [chi[i] + half * f[i] for i in krange]
        chi_end = [chi[i] + dt * f[i] for i in krange]
        k1 = dxr
        y2 = [xr[i] + half * k1[i] for i in rng]
        _positive(y2, t + half, rs.retained)
        k2 = ev.rates(y2, chi_mid)
        y3 = [xr[i] + half * k2[i] for i in rng]
        _positive(y3, t + half, rs.retained)
        k3 = ev.rates(y3, chi_mid)
        y4 = [xr[i] + dt * k3[i] for i in rng]
        _positive(y4, t + dt, rs.retained)
        k4 = ev.rates(y4, chi_end)
        xr = [xr[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in rng]
        _positive(xr, t + dt, rs.retained)

        guess = list(chi)
        it = 0
        while True:
            it += 1
            _, _, fg = ev.full(xr, guess)
            new = [chi[i] + half * (f[i] + fg[i]) for i in krange]
            res = max((abs(new[i] - guess[i]) for i in krange), default=0.0)
            guess = new
            if res <= fp_tol:
                break
            if it >= fp_max_iter or not np.isfinite(res):
                raise ConvergenceError(step + 1, res, it)
        chi = guess
        _positive(chi, t + dt, rs.eliminated)
        dxr, y, f = ev.full(xr, chi)
        iters[step] = it
        X[step + 1], DX[step + 1], CHI[step + 1] = xr, dxr, chi
        F[step + 1], Y[step + 1] = f, y

    return ReducedTrajectory(
        time_grid(n, dt), rs.retained, rs.eliminated, X, DX, CHI, F, Y, iters,
        float(dt), tuple(rs.model.species_labels),
    )


def _positive(values, t, species):
    for v, sp in zip(values, species):
        if not v > 0.0:
            what = "non-finite value" if not np.isfinite(v) else "positivity breach"
            raise IntegrationError(f"{what} in species {sp + 1} at t={t:.6g}", t, sp)


def reconstruct_eliminated(rs, rt):
    """Chi series per eliminated species, keyed by label, ascending species order."""
    return {rt.labels[m]: rt.chi_for(m).copy() for m in sorted(rs.eliminated)}


# -- JSON ------------------------------------------------------------------

def _pairs(terms):
    return [[str(ref), a] for a, ref in terms]


def reduced_system_to_dict(rs):
    model = rs.model
    steps = []
    graph = rs.term_edges()
    for st in rs.steps:
        y, chi = st.y, st.chi
        steps.append({
            "index": st.index,
            "eliminated": st.eliminated + 1,
            "pivot": st.pivot + 1,
            "zero_requirements": [[r + 1, c + 1] for r, c in st.zero_requirements],
            "coefficients": {
                "inverse_pivot": 1.0 / y.pivot_coef,
                "pivot": y.pivot_coef,
                "pivot_growth": y.growth,
                "pivot_row": _pairs(y.terms),
                "growth": chi.growth,
                "self": chi.self_coef,
                "row": _pairs(chi.terms),
                "initial_value": chi.initial_value,
            },
            "pivot_state": str(y.pivot_state),
            "pivot_rate": str(y.pivot_rate),
            "depends_on": {
                kind: [{"step": i, "term": t} for i, t in graph[(st.index, kind)]]
                for kind in ("y", "chi")
            },
        })
    return {
        "format": FORMAT,
        "version": VERSION,
        "model": model_to_dict(model),
        "zeroed": [[i + 1, j + 1, v] for i, j, v in model.zeroed],
        "plan": rs.plan.to_dict(),
        "retained": [r + 1 for r in rs.retained],
        "steps": steps,
        "equations": [
            {"species": eq.species + 1, "growth": eq.growth, "terms": _pairs(eq.terms)}
            for eq in rs.equations
        ],
    }


def reduced_system_from_json(text):
    """Load a reduced-system document, checking it against a rebuild.

    Declared dependency edges must be acyclic, and every declared step must
    match what the embedded model and plan produce.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ParseError(f"not a {FORMAT} document")
    try:
        steps = doc["steps"]
        graph = {}
        for st in steps:
            for kind in ("y", "chi"):
                graph[(int(st["index"]), kind)] = [
                    (int(d["step"]), d["term"]) for d in st["depends_on"][kind]
                ]
        model = model_from_dict(doc["model"])
        zeroed = tuple((int(i) - 1, int(j) - 1, float(v)) for i, j, v in doc.get("zeroed", []))
        plan = EliminationPlan.from_dict(doc["plan"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed reduced-system document: {exc!r}") from None
    _check_acyclic(graph)
    model = type(model)(model.b, model.A, model.x0, model.labels, zeroed)
    rs = build_reduced_system(model, plan)
    rebuilt = reduced_system_to_dict(rs)
    for key in ("retained", "steps", "equations"):
        if doc.get(key) != json.loads(json.dumps(rebuilt[key])):
            raise IntegrityError(f"declared {key!r} do not match the model and plan")
    return rs


def reduce(model, retained, **search):
    """Search for a plan keeping ``retained`` and build the reduced system."""
    from .reducibility import check_reducible

    report = check_reducible(model, retained, **search)
    if not report.feasible:
        _raise_first_violation(report.plan)
    return build_reduced_system(model, report.plan)
