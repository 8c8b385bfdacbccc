"""Generalized Lotka-Volterra model.

    dx_i/dt = x_i * (b_i + sum_j a_ij * x_j)

b is the intrinsic growth rate vector and A the interaction matrix.  Species
indices are 0-based in the Python API; human-facing messages and every file
format use 1-based species numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

_KEYS = ("b", "A", "x0", "labels")


@dataclass(frozen=True)
class Violation:
    field: str
    index: object
    reason: str

    def __str__(self):
        if self.index is None:
            return f"{self.field}: {self.reason}"
        return f"{self.field}{self.index} {self.reason}"


@dataclass(frozen=True, eq=False)
class GlvModel:
    b: np.ndarray
    A: np.ndarray
    x0: np.ndarray
    labels: tuple | None = None
    # audit trail of entries explicitly zeroed via with_zeroed()
    zeroed: tuple = field(default=())

    def __post_init__(self):
        for name in ("b", "A", "x0"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        object.__setattr__(self, "zeroed", tuple(tuple(p) for p in self.zeroed))

    @property
    def S(self):
        return self.A.shape[0] if self.A.ndim == 2 else len(self.x0)

    def label(self, i):
        if self.labels is not None:
            return self.labels[i]
        return f"x{i + 1}"

    @property
    def species_labels(self):
        return [self.label(i) for i in range(self.S)]

    def __eq__(self, other):
        if not isinstance(other, GlvModel):
            return NotImplemented
        return (
            self.b.shape == other.b.shape
            and self.A.shape == other.A.shape
            and self.x0.shape == other.x0.shape
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.x0, other.x0)
            and self.labels == other.labels
        )

    __hash__ = None

    def with_x0(self, x0):
        return GlvModel(self.b, self.A, x0, self.labels, self.zeroed)

    def with_zeroed(self, entries):
        """Return a copy with the given (i, j) entries of A set to exactly 0.

        The original values are kept in ``zeroed`` so that reports can show
        what was modified.
        """
        A = self.A.copy()
        log = list(self.zeroed)
        for i, j in entries:
            if not (0 <= i < self.S and 0 <= j < self.S):
                raise ValueError(f"entry ({i + 1},{j + 1}) outside a {self.S}x{self.S} matrix")
            log.append((i, j, float(A[i, j])))
            A[i, j] = 0.0
        return GlvModel(self.b, A, self.x0, self.labels, tuple(log))


def rhs(model, x):
    """Right-hand side d_i = x_i (b_i + sum_j a_ij x_j)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.S,):
        raise ValueError(f"state has shape {x.shape}, model has S={model.S}")
    return x * (model.b + model.A @ x)


def equilibrium(model):
    """Interior fixed point solving b + A x* = 0 (may be infeasible)."""
    return np.linalg.solve(model.A, -model.b)


def validate(model):
    """Return the list of invariant violations; empty means the model is valid."""
    out = []
    A = model.A
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        out.append(Violation("A", None, f"dimension mismatch: expected a square matrix, got shape {A.shape}"))
        return out
    S = A.shape[0]
    for name in ("b", "x0"):
        arr = getattr(model, name)
        if arr.shape != (S,):
            out.append(Violation(name, None, f"dimension mismatch: length {arr.size}, expected S={S}"))
    if model.labels is not None and len(model.labels) != S:
        out.append(Violation("labels", None, f"dimension mismatch: {len(model.labels)} labels for S={S}"))
    for name in ("b", "A", "x0"):
        arr = getattr(model, name)
        for idx in zip(*np.nonzero(~np.isfinite(arr))):
            where = "[" + ",".join(str(k + 1) for k in idx) + "]"
            out.append(Violation(name, where, "not finite"))
    if model.x0.shape == (S,):
        for i, v in enumerate(model.x0):
            if np.isfinite(v) and v <= 0:
                out.append(Violation("x0", f"[{i + 1}]", "not positive"))
    return out


def check_valid(model):
    violations = validate(model)
    if violations:
        raise ValidationError(violations)
    return model


def model_to_dict(model):
    doc = {
        "b": [float(v) for v in model.b],
        "A": [[float(v) for v in row] for row in model.A],
        "x0": [float(v) for v in model.x0],
    }
    if model.labels is not None:
        doc["labels"] = list(model.labels)
    return doc


def model_from_dict(doc):
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    unknown = sorted(set(doc) - set(_KEYS))
    if unknown:
        raise ParseError(f"unknown key(s) in model document: {', '.join(unknown)}")
    for key in ("b", "A", "x0"):
        if key not in doc:
            raise ParseError(f"missing required field {key!r}")

    def numbers(value, name):
        if not isinstance(value, list):
            raise ParseError(f"field {name!r} must be an array")
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"field {name!r} contains a non-number: {v!r}")
        return [float(v) for v in value]

    b = numbers(doc["b"], "b")
    x0 = numbers(doc["x0"], "x0")
    if not isinstance(doc["A"], list):
        raise ParseError("field 'A' must be an array of rows")
    rows = [numbers(r, "A") for r in doc["A"]]
    if len({len(r) for r in rows}) > 1:
        raise ParseError("field 'A' has rows of unequal length")
    A = np.array(rows, dtype=float).reshape(len(rows), -1) if rows else np.zeros((0, 0))
    labels = doc.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise ParseError("field 'labels' must be an array of strings")
    return GlvModel(np.array(b), A, np.array(x0), labels)


def load_model(data):
    """Parse and validate a model JSON document (bytes or str)."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"model document is not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    model = model_from_dict(doc)
    return check_valid(model)


def save_model(model):
    return (json.dumps(model_to_dict(model), indent=2) + "\n").encode("utf-8")


def random_stable_model(S, rng, *, b_range=(0.5, 1.5), diag_range=(-1.5, -0.5),
                        offdiag=0.3, x0_range=(0.1, 1.0), max_tries=1000):
    """Draw a random model with a negative-definite symmetric part of A.

    Entries are uniform in the given ranges.  Draws whose A + A^T is not
    negative definite are rejected, which keeps trajectories bounded.
    """
    for _ in range(max_tries):
        b = rng.uniform(*b_range, size=S)
        A = rng.uniform(-offdiag, offdiag, size=(S, S))
        A[np.diag_indices(S)] = rng.uniform(*diag_range, size=S)
        x0 = rng.uniform(*x0_range, size=S)
        if np.linalg.eigvalsh(A + A.T).max() < 0:
            return GlvModel(b, A, x0)
    raise RuntimeError(f"no stable draw for S={S} in {max_tries} tries")
