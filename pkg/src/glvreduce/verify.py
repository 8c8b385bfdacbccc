"""Compare reduced against detailed runs and package the outcome as a report."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import algebraic
from .errors import UsageError
from .integrate import integrate_fixed, rk4, uniform_steps
from .memory import reduce, solve_reduced

TOL_RETAINED = 1e-4
TOL_RECONSTRUCTED = 1e-4
TOL_RESIDUAL = 1e-10


def error_norms(reference, approx):
    reference = np.asarray(reference, dtype=float)
    err = np.asarray(approx, dtype=float) - reference
    ref_inf = float(np.abs(reference).max())
    ref_l2 = float(np.sqrt(np.sum(reference ** 2)))
    return {
        "linf_abs": float(np.abs(err).max()),
        "linf_rel": float(np.abs(err).max()) / ref_inf,
        "l2_rel": float(np.sqrt(np.sum(err ** 2))) / ref_l2,
    }


def compare_columns(t_detailed, detailed, t_reduced, reduced, *,
                    tol_retained=TOL_RETAINED, tol_reconstructed=TOL_RECONSTRUCTED):
    """Per-species error table between two column sets.

    ``detailed`` maps label -> series in species order; ``reduced`` maps a
    retained label or ``chi_<label>`` to its series.  Works identically on
    in-memory results and on CSV files read back.
    """
    if len(t_detailed) != len(t_reduced) or not np.array_equal(t_detailed, t_reduced):
        raise UsageError("detailed and reduced grids differ; use the same t_end and dt")
    rows = []
    for idx, label in enumerate(detailed):
        if label in reduced:
            role, series, tol = "retained", reduced[label], tol_retained
        elif f"chi_{label}" in reduced:
            role, series, tol = "reconstructed", reduced[f"chi_{label}"], tol_reconstructed
        else:
            continue
        norms = error_norms(detailed[label], series)
        rows.append({
            "species": idx + 1,
            "label": label,
            "role": role,
            **norms,
            "tol": tol,
            "pass": norms["linf_rel"] <= tol,
        })
    return {
        "species": rows,
        "max_linf_rel_retained": max((r["linf_rel"] for r in rows if r["role"] == "retained"), default=0.0),
        "max_linf_rel_reconstructed": max(
            (r["linf_rel"] for r in rows if r["role"] == "reconstructed"), default=0.0),
        "pass": all(r["pass"] for r in rows),
    }


def detailed_columns(traj):
    return {lab: traj.x[:, i] for i, lab in enumerate(traj.labels)}


def reduced_columns(rt):
    cols = {rt.labels[r]: rt.x[:, i] for i, r in enumerate(rt.retained)}
    for m in sorted(rt.eliminated):
        cols[f"chi_{rt.labels[m]}"] = rt.chi_for(m)
    return cols


@dataclass
class VerificationReport:
    mode: str
    settings: dict
    passed: bool
    comparison: dict | None = None
    residuals: dict | None = None
    solver: dict | None = None
    plan: dict | None = None
    modifications: list = field(default_factory=list)
    error: dict | None = None
    runtime: float | None = None

    def to_dict(self):
        out = {
            "mode": self.mode,
            "pass": self.passed,
            "settings": self.settings,
            "modifications": self.modifications,
        }
        for key in ("plan", "comparison", "residuals", "solver", "error", "runtime"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def modifications_of(model):
    return [{"entry": [i + 1, j + 1], "original": v, "now": 0.0} for i, j, v in model.zeroed]


def verify_memory(model, retained, t_end=10.0, dt=1e-3, *, tol_retained=TOL_RETAINED,
                  tol_reconstructed=TOL_RECONSTRUCTED, fp_tol=1e-12, fp_max_iter=50,
                  heuristic=False, timing=False):
    """Detailed run, reduction, reduced run and comparison in one go.

    Returns (report, detailed trajectory, reduced system, reduced trajectory).
    Infeasible reductions and solver failures propagate as exceptions.
    """
    uniform_steps(t_end, dt)
    settings = {
        "method": "memory",
        "retained": [r + 1 for r in sorted(retained)],
        "t_end": t_end,
        "dt": dt,
        "tol_retained": tol_retained,
        "tol_reconstructed": tol_reconstructed,
        "fp_tol": fp_tol,
        "fp_max_iter": fp_max_iter,
    }
    start = time.perf_counter()
    traj = integrate_fixed(model, t_end, dt)
    rs = reduce(model, retained, heuristic=heuristic)
    rt = solve_reduced(rs, t_end, dt, fp_tol=fp_tol, fp_max_iter=fp_max_iter)
    comparison = compare_columns(
        traj.t, detailed_columns(traj), rt.t, reduced_columns(rt),
        tol_retained=tol_retained, tol_reconstructed=tol_reconstructed,
    )
    elapsed = time.perf_counter() - start
    return VerificationReport(
        mode="memory",
        settings=settings,
        passed=comparison["pass"],
        comparison=comparison,
        solver={"max_fp_iterations": rt.max_fp_iterations, "steps": len(rt.t) - 1},
        plan=rs.plan.to_dict(),
        modifications=modifications_of(model),
        runtime=elapsed if timing else None,
    ), traj, rs, rt


def residual_summary(residuals, scales):
    rel = np.abs(residuals) / np.where(scales > 0, scales, 1.0)
    return {
        "max_abs": float(np.abs(residuals).max()),
        "max_rel": float(rel.max()),
        "n_states": int(len(residuals)),
    }


def verify_algebraic(model, t_end=10.0, dt=1e-3, *, tol=TOL_RESIDUAL, stride=0,
                     solve_demo=False, timing=False):
    """Residual of the S=2 second-order equation along the detailed flow."""
    settings = {"method": "algebraic", "retained": [1], "t_end": t_end, "dt": dt, "tol_residual": tol}
    start = time.perf_counter()
    traj = integrate_fixed(model, t_end, dt)
    res, scale = algebraic.residual_along(model, traj.x)
    summary = residual_summary(res, scale)
    summary["tol"] = tol
    summary["pass"] = summary["max_rel"] <= tol
    if stride:
        summary["states"] = [
            {"t": float(traj.t[i]), "state": [float(v) for v in traj.x[i]],
             "residual": float(res[i]), "relative_scale": float(scale[i])}
            for i in range(0, len(res), stride)
        ]
    passed = summary["pass"]
    solver = None
    if solve_demo:
        # the first-order (x1, y) form of the reduced equation is the original pair
        n = uniform_steps(t_end, dt)
        pair, _ = rk4(algebraic.second_order_pair(model), model.x0, n, dt, positive=True)
        solver = {"solve_demo_max_abs_diff": float(np.abs(pair - traj.x).max())}
    elapsed = time.perf_counter() - start
    return VerificationReport(
        mode="algebraic",
        settings=settings,
        passed=passed,
        residuals=summary,
        solver=solver,
        modifications=modifications_of(model),
        runtime=elapsed if timing else None,
    ), traj


def lorenz_report(alpha, beta, gamma, x0, t_end, dt, *, stride=10, tol=1e-9):
    """Printed-versus-rederived residuals along a simulated Lorenz trajectory."""
    n = uniform_steps(t_end, dt)
    xs, _ = rk4(algebraic.lorenz_rhs(alpha, beta, gamma), x0, n, dt)
    states = []
    res_r, res_p, scales = [], [], []
    for i in range(0, n + 1, stride):
        s = xs[i]
        if s[0] == 0.0:
            continue
        jet = algebraic.lorenz_jet(alpha, beta, gamma, s)
        r, p, sc = algebraic._lorenz_parts(alpha, beta, gamma, jet)
        res_r.append(r)
        res_p.append(p)
        scales.append(sc)
        states.append({
            "t": i * dt,
            "state": [float(v) for v in s],
            "residual_rederived": r,
            "residual_printed": p,
            "relative_scale": sc,
            "agree": abs(r - p) <= 1e-9 * sc,
        })
    res_r, res_p, scales = map(np.asarray, (res_r, res_p, scales))
    summary = residual_summary(res_r, scales)
    summary["printed_max_rel"] = residual_summary(res_p, scales)["max_rel"]
    summary["printed_rederived_agree"] = all(st["agree"] for st in states)
    summary["tol"] = tol
    summary["pass"] = summary["max_rel"] <= tol
    return {
        "parameters": {"alpha": alpha, "beta": beta, "gamma": gamma},
        "x0": [float(v) for v in x0],
        "t_end": t_end,
        "dt": dt,
        "stride": stride,
        "summary": summary,
        "states": states,
    }
