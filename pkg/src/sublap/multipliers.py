"""Spectral multipliers F(lambda), optionally times a cutoff chi(eta)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ValidationError

HEAT_TAIL = 1e-12


def bump(lam, a, b):
    """exp(1 - 1/(1-y^2)) for y = (2 lam - a - b)/(b - a) in (-1, 1), else 0."""
    lam = np.asarray(lam, dtype=float)
    y = (2.0 * lam - a - b) / (b - a)
    inside = np.abs(y) < 1.0
    out = np.zeros(lam.shape)
    yi = y[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - yi * yi))
    return out


@dataclass(frozen=True, eq=False)
class Multiplier:
    """A multiplier F with declared support bound, possibly joint with chi(eta).

    ``kind`` is one of ``bump``, ``heat``, ``table``, ``zero``, ``sum`` or
    ``func``.  Use the constructors below rather than building instances by
    hand.
    """

    kind: str
    params: dict
    support_bound: float
    joint_factor: Callable | None = field(default=None, repr=False)
    joint_label: str | None = None
    terms: tuple = field(default=(), repr=False)
    func: Callable | None = field(default=None, repr=False)

    # -- evaluation -----------------------------------------------------
    def eval(self, lam):
        lam = np.asarray(lam, dtype=float)
        k = self.kind
        if k == "bump":
            return bump(lam, self.params["a"], self.params["b"])
        if k == "heat":
            return np.exp(-self.params["t"] * lam)
        if k == "zero":
            return np.zeros(lam.shape)
        if k == "table":
            lam0, dl = self.params["lam0"], self.params["dlam"]
            vals = self.params["values"]
            x = (lam - lam0) / dl
            inside = (x >= 0) & (x <= len(vals) - 1)
            xs = np.clip(x, 0, len(vals) - 1)
            out = np.interp(xs, np.arange(len(vals)), vals.real) + 1j * np.interp(xs, np.arange(len(vals)), vals.imag)
            out = np.where(inside, out, 0.0)
            return out.real if not np.any(vals.imag) else out
        if k == "func":
            return np.asarray(self.func(lam))
        if k == "sum":
            raise ValidationError("a sum multiplier has no single F; evaluate H(lam, eta)")
        raise ValidationError(f"unknown multiplier kind {k!r}")

    def joint(self, eta) -> np.ndarray | float:
        if self.joint_factor is None:
            return 1.0
        return self.joint_factor(np.asarray(eta, dtype=float))

    def H(self, lam, eta):
        """H(lam, eta) = F(lam) chi(eta) for a single eta."""
        if self.kind == "sum":
            return sum(t.H(lam, eta) for t in self.terms)
        chi = self.joint(eta)
        if np.all(chi == 0):
            return np.zeros(np.shape(lam))
        return self.eval(lam) * chi

    @property
    def is_real(self) -> bool:
        if self.kind == "sum":
            return all(t.is_real for t in self.terms)
        if self.kind == "table":
            return not np.any(self.params["values"].imag)
        return self.kind != "func" or self.params.get("real", True)

    @property
    def is_zero(self) -> bool:
        if self.kind == "sum":
            return all(t.is_zero for t in self.terms)
        return self.kind == "zero"

    @property
    def support_interval(self):
        """(lo, hi) with F = 0 outside; lo is 0 when unknown."""
        if self.kind == "bump":
            return self.params["a"], self.params["b"]
        if self.kind == "sum":
            return min(t.support_interval[0] for t in self.terms), self.support_bound
        return self.params.get("lo", 0.0), self.support_bound

    def nyquist_bound(self, tail: float = 1e-6) -> float:
        """Spectral radius used for grid checks; heat uses a looser tail than truncation."""
        if self.kind == "heat":
            return -np.log(tail) / self.params["t"]
        if self.kind == "sum":
            return max(t.nyquist_bound(tail) for t in self.terms)
        return self.support_bound

    # -- transformations --------------------------------------------------
    def with_joint(self, chi: Callable, label: str | None = None) -> "Multiplier":
        if self.kind == "sum":
            return Multiplier("sum", {}, self.support_bound, terms=tuple(t.with_joint(chi, label) for t in self.terms))
        if self.joint_factor is not None:
            inner = self.joint_factor
            return replace(self, joint_factor=lambda eta: inner(eta) * chi(eta),
                           joint_label=f"{self.joint_label}*{label}")
        return replace(self, joint_factor=chi, joint_label=label)

    def dilate(self, t: float) -> "Multiplier":
        """lam -> F(t lam)."""
        t = float(t)
        if t <= 0:
            raise ValidationError("dilation factor must be positive")
        k = self.kind
        if k == "bump":
            return replace(self, params={"a": self.params["a"] / t, "b": self.params["b"] / t},
                           support_bound=self.support_bound / t)
        if k == "heat":
            return replace(self, params={**self.params, "t": self.params["t"] * t}, support_bound=self.support_bound / t)
        if k == "zero":
            return self
        if k == "table":
            p = dict(self.params)
            p["lam0"], p["dlam"] = p["lam0"] / t, p["dlam"] / t
            return replace(self, params=p, support_bound=self.support_bound / t)
        if k == "func":
            f = self.func
            p = dict(self.params)
            p["lo"] = p.get("lo", 0.0) / t
            return replace(self, params=p, func=lambda lam: f(t * lam), support_bound=self.support_bound / t)
        return Multiplier("sum", {}, self.support_bound / t, terms=tuple(x.dilate(t) for x in self.terms))

    def __add__(self, other: "Multiplier") -> "Multiplier":
        mine = self.terms if self.kind == "sum" else (self,)
        theirs = other.terms if other.kind == "sum" else (other,)
        return Multiplier("sum", {}, max(self.support_bound, other.support_bound), terms=mine + theirs)

    def to_spec(self) -> dict:
        if self.kind == "sum":
            return {"kind": "sum", "terms": [t.to_spec() for t in self.terms]}
        spec = {"kind": self.kind}
        if self.kind == "table":
            spec.update({"lam0": self.params["lam0"], "dlam": self.params["dlam"], "n": len(self.params["values"])})
            if "path" in self.params:
                spec["path"] = self.params["path"]
        elif self.kind == "func":
            spec["label"] = self.params.get("label", "callable")
        else:
            spec.update({k: v for k, v in self.params.items()})
        spec["support_bound"] = self.support_bound
        if self.joint_label:
            spec["joint"] = self.joint_label
        return spec


def bump_multiplier(a: float = 1.0, b: float = 2.0) -> Multiplier:
    if not 0 <= a < b:
        raise ValidationError(f"bump needs 0 <= a < b, got a={a}, b={b}")
    return Multiplier("bump", {"a": float(a), "b": float(b)}, float(b))


def heat_multiplier(t: float = 1.0, tail: float = HEAT_TAIL) -> Multiplier:
    if not t > 0:
        raise ValidationError("heat time must be positive")
    return Multiplier("heat", {"t": float(t), "tail": float(tail)}, -np.log(tail) / float(t))


def zero_multiplier() -> Multiplier:
    return Multiplier("zero", {}, 1.0)


def func_multiplier(f: Callable, support_bound: float, label: str = "callable", lo: float = 0.0,
                    real: bool = True) -> Multiplier:
    """Wrap an arbitrary vectorised F, declared to vanish outside [lo, support_bound]."""
    return Multiplier("func", {"label": label, "lo": lo, "real": real}, float(support_bound), func=f)


def table_multiplier(lam, values, path: str | None = None) -> Multiplier:
    lam = np.asarray(lam, dtype=float)
    values = np.asarray(values, dtype=complex)
    if lam.ndim != 1 or len(lam) < 2 or len(lam) != len(values):
        raise ValidationError("table needs at least two (lambda, value) rows")
    d = np.diff(lam)
    if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(abs(d[0]), 1.0):
        raise ValidationError("table lambda values must be uniformly spaced and increasing")
    nz = np.flatnonzero(values != 0)
    hi = float(lam[nz[-1]] if len(nz) else lam[-1])
    hi = min(float(lam[-1]), hi + d[0])  # linear interpolation reaches one step further
    lo = float(lam[nz[0]] - d[0]) if len(nz) else 0.0
    params = {"lam0": float(lam[0]), "dlam": float(d[0]), "values": values, "lo": max(lo, 0.0)}
    if path:
        params["path"] = str(path)
    return Multiplier("table", params, max(hi, 1e-300))


def load_table_csv(path) -> Multiplier:
    """Read a ``lambda,re,im`` CSV with uniform lambda spacing."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read multiplier table {path}: {exc}") from exc
    if not rows or [h.strip().lower() for h in rows[0]] != ["lambda", "re", "im"]:
        raise ValidationError('multiplier CSV must start with the header "lambda,re,im"')
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry in {path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValidationError("multiplier CSV rows must have three columns")
    return table_multiplier(data[:, 0], data[:, 1] + 1j * data[:, 2], path=str(path))


def multiplier_from_spec(spec) -> Multiplier:
    """Build a multiplier from a config entry such as ``{"kind": "heat", "t": 1}``."""
    if isinstance(spec, Multiplier):
        return spec
    if isinstance(spec, str):
        if spec.endswith(".csv"):
            return load_table_csv(spec)
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError(f"bad multiplier spec {spec!r}")
    kind = spec["kind"]
    try:
        if kind == "bump":
            return bump_multiplier(spec.get("a", 1.0), spec.get("b", 2.0))
        if kind == "heat":
            return heat_multiplier(spec.get("t", 1.0), spec.get("tail", HEAT_TAIL))
        if kind == "zero":
            return zero_multiplier()
        if kind == "table":
            return load_table_csv(spec["path"])
        if kind == "sum":
            terms = [multiplier_from_spec(s) for s in spec["terms"]]
            out = terms[0]
            for t in terms[1:]:
                out = out + t
            return out
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad multiplier spec {spec!r}: {exc}") from exc
    raise ValidationError(f"unknown multiplier kind {kind!r}")
