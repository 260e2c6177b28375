"""2-step stratified groups given by structure constants.

A group is stored through its structure tensor ``c`` of shape (d2, d1, d1),
``c[k, i, j]`` being the k-th central coordinate of ``[X_i, X_j]``.  The
first layer carries the standard inner product of the X-basis.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AmbiguousClassification,
    DimensionMismatch,
    NotAntisymmetric,
    NotSkew,
    NotStratified,
    OddDimension,
    UnknownName,
    ValidationError,
)

SKEW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StratifiedGroup:
    d1: int
    d2: int
    c: np.ndarray = field(repr=False)
    name: str | None = None

    @property
    def Q(self) -> int:
        return self.d1 + 2 * self.d2

    @property
    def dim(self) -> int:
        return self.d1 + self.d2

    def bracket(self, x, y):
        return np.einsum("kij,...i,...j->...k", self.c, x, y)


@dataclass(frozen=True)
class GroupPoint:
    x: np.ndarray
    u: np.ndarray


def validate_structure(d1, d2, c, name=None) -> StratifiedGroup:
    """Check antisymmetry and stratification, never repairing the input."""
    d1, d2 = int(d1), int(d2)
    if d1 < 2 or d2 < 1:
        raise ValidationError(f"need d1 >= 2 and d2 >= 1, got d1={d1}, d2={d2}")
    c = np.array(c, dtype=float)
    if c.shape != (d2, d1, d1):
        raise DimensionMismatch(f"structure tensor has shape {c.shape}, expected {(d2, d1, d1)}")
    if not np.all(np.isfinite(c)):
        raise ValidationError("structure tensor has non-finite entries")
    if np.max(np.abs(c + c.transpose(0, 2, 1)), initial=0.0) > SKEW_TOL:
        raise NotAntisymmetric("c[k][i][j] != -c[k][j][i]")
    iu = np.triu_indices(d1, 1)
    rank = np.linalg.matrix_rank(c[:, iu[0], iu[1]]) if d1 > 1 else 0
    if rank < d2:
        raise NotStratified(f"bracket rank {rank} < d2 = {d2}")
    c.setflags(write=False)
    return StratifiedGroup(d1, d2, c, name)


def _quaternion_left(k):
    # left multiplication by i, j, k on H = span(1, i, j, k)
    table = {
        1: [(1, 1), (0, -1), (3, 1), (2, -1)],
        2: [(2, 1), (3, -1), (0, -1), (1, 1)],
        3: [(3, 1), (2, 1), (1, -1), (0, -1)],
    }
    m = np.zeros((4, 4))
    for col, (row, sign) in enumerate(table[k]):
        m[row, col] = sign
    return m


def _g37d_j(eta):
    e1, e2, e3 = eta
    return np.array(
        [
            [0.0, 0.0, -e1 - e3, -e2],
            [0.0, 0.0, -e2, e1 - e3],
            [e1 + e3, e2, 0.0, 0.0],
            [e2, -e1 + e3, 0.0, 0.0],
        ]
    )


def _builtin_tensor(name):
    if name == "H1":
        c = np.zeros((1, 2, 2))
        c[0, 0, 1], c[0, 1, 0] = 1.0, -1.0
        return 2, 1, c
    if name == "H2":
        c = np.zeros((1, 4, 4))
        for i, j in ((0, 1), (2, 3)):
            c[0, i, j], c[0, j, i] = 1.0, -1.0
        return 4, 1, c
    if name == "N32":
        c = np.zeros((3, 3, 3))
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    c[k, i, j] = np.sign((i - j) * (j - k) * (k - i))  # epsilon_{ijk}
        return 3, 3, c
    if name == "G37D":
        # J_eta = sum_k eta_k c[k]^T, so c[k] = -J_{e_k}
        c = np.stack([-_g37d_j(e) for e in np.eye(3)])
        return 4, 3, c
    if name == "HTYPE3":
        c = np.stack([-_quaternion_left(k) for k in (1, 2, 3)])
        return 4, 3, c
    raise UnknownName(f"unknown builtin group {name!r}; choose from {', '.join(BUILTINS)}")


BUILTINS = ("H1", "H2", "N32", "G37D", "HTYPE3")


def builtin_group(name: str) -> StratifiedGroup:
    d1, d2, c = _builtin_tensor(name)
    return validate_structure(d1, d2, c, name=name)


def j_matrix(G: StratifiedGroup, eta) -> np.ndarray:
    """(J_eta)_{ij} = sum_k eta_k c[k][j][i]; vectorised over leading axes of eta."""
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 0:
        eta = eta[None]
    if eta.shape[-1] != G.d2:
        raise DimensionMismatch(f"eta has {eta.shape[-1]} components, group has d2={G.d2}")
    return np.einsum("...k,kji->...ij", eta, G.c)


def _check_skew(m):
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionMismatch("expected a square matrix")
    if m.shape[-1] % 2:
        raise OddDimension(f"Pfaffian needs even dimension, got {m.shape[-1]}")
    if np.max(np.abs(m + np.swapaxes(m, -1, -2)), initial=0.0) > SKEW_TOL:
        raise NotSkew("matrix is not skew-symmetric within 1e-12")
    return m


def _pf_recursive(m):
    n = m.shape[-1]
    if n == 0:
        return np.ones(m.shape[:-2])
    if n == 2:
        return m[..., 0, 1]
    total = np.zeros(m.shape[:-2])
    for j in range(1, n):
        keep = [i for i in range(1, n) if i != j]
        minor = m[..., keep, :][..., :, keep]
        sign = 1.0 if j % 2 == 1 else -1.0
        total = total + sign * m[..., 0, j] * _pf_recursive(minor)
    return total


def pfaffian(m):
    """Pfaffian of a skew matrix (or a stack of them).

    4x4 uses ``m12 m34 - m13 m24 + m14 m23``; larger sizes use expansion
    along the first row.
    """
    m = _check_skew(m)
    n = m.shape[-1]
    if n == 4:
        out = m[..., 0, 1] * m[..., 2, 3] - m[..., 0, 2] * m[..., 1, 3] + m[..., 0, 3] * m[..., 1, 2]
    else:
        out = _pf_recursive(m)
    return out if np.ndim(out) else float(out)


def homogeneous_norm(G: StratifiedGroup, p) -> np.ndarray | float:
    """|x| + |u|^{1/2}."""
    x, u = (p.x, p.u) if isinstance(p, GroupPoint) else p
    out = np.linalg.norm(np.asarray(x, float), axis=-1) + np.sqrt(np.linalg.norm(np.asarray(u, float), axis=-1))
    return out if np.ndim(out) else float(out)


def dilate(p: GroupPoint, r: float) -> GroupPoint:
    return GroupPoint(r * np.asarray(p.x, float), r * r * np.asarray(p.u, float))


def group_product(G: StratifiedGroup, p: GroupPoint, q: GroupPoint) -> GroupPoint:
    x, u = np.asarray(p.x, float), np.asarray(p.u, float)
    y, v = np.asarray(q.x, float), np.asarray(q.u, float)
    return GroupPoint(x + y, u + v + 0.5 * G.bracket(x, y))


def group_inverse(p: GroupPoint) -> GroupPoint:
    return GroupPoint(-np.asarray(p.x, float), -np.asarray(p.u, float))


def pfaffian_form(G: StratifiedGroup) -> np.ndarray:
    """Symmetric S with pf J_eta = eta^T S eta, by polarization (6 evaluations)."""
    if (G.d1, G.d2) != (4, 3):
        raise DimensionMismatch(f"Pfaffian form needs d1=4, d2=3, got d1={G.d1}, d2={G.d2}")
    e = np.eye(3)
    S = np.zeros((3, 3))
    for k in range(3):
        S[k, k] = pfaffian(j_matrix(G, e[k]))
    for k in range(3):
        for l in range(k + 1, 3):
            S[k, l] = S[l, k] = 0.5 * (pfaffian(j_matrix(G, e[k] + e[l])) - S[k, k] - S[l, l])
    return S


RANK_TOL = 1e-9
_AMBIGUOUS_BAND = 1e-6


def classify_pfaffian_form(G: StratifiedGroup) -> str:
    """Map the signature of the Pfaffian form to a (37·) class label."""
    S = pfaffian_form(G)
    ev = np.linalg.eigvalsh(S)
    top = np.max(np.abs(ev))
    # a vanishing form is judged against the size of the structure constants
    if top <= RANK_TOL * np.max(np.abs(G.c)) ** 2:
        return "37A"
    rel = np.abs(ev) / top
    if np.any((rel >= RANK_TOL) & (rel < _AMBIGUOUS_BAND)):
        raise AmbiguousClassification(f"Pfaffian form eigenvalues {ev} straddle the rank threshold")
    nz = ev[rel >= RANK_TOL]
    rank = len(nz)
    definite = bool(np.all(nz > 0) or np.all(nz < 0))
    if rank == 1:
        return "37C"
    if rank == 2:
        return "37B₁" if definite else "37B"
    return "37D₁" if definite else "37D"


# -- group definition files ------------------------------------------------

def load_group(path) -> StratifiedGroup:
    """Read ``{"d1", "d2", "brackets": [{"i", "j", "k", "v"}]}`` with 1-based i<j."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        d1, d2 = int(doc["d1"]), int(doc["d2"])
        entries = doc["brackets"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"cannot read group file {path}: {exc}") from exc
    c = np.zeros((d2, d1, d1))
    for e in entries:
        i, j, k, v = int(e["i"]) - 1, int(e["j"]) - 1, int(e["k"]) - 1, float(e["v"])
        if not (0 <= i < j < d1 and 0 <= k < d2):
            raise ValidationError(f"bracket entry out of range or not i<j: {e}")
        c[k, i, j] += v
        c[k, j, i] -= v
    return validate_structure(d1, d2, c, name=doc.get("name", path.stem))


def group_to_json(G: StratifiedGroup) -> dict:
    brackets = []
    for k in range(G.d2):
        for i in range(G.d1):
            for j in range(i + 1, G.d1):
                if G.c[k, i, j] != 0.0:
                    brackets.append({"i": i + 1, "j": j + 1, "k": k + 1, "v": float(G.c[k, i, j])})
    out = {"d1": G.d1, "d2": G.d2, "brackets": brackets}
    if G.name:
        out["name"] = G.name
    return out


def resolve_group(spec) -> StratifiedGroup:
    """Builtin name, path to a definition file, or a group passed through."""
    if isinstance(spec, StratifiedGroup):
        return spec
    if isinstance(spec, str) and spec in BUILTINS:
        return builtin_group(spec)
    p = Path(str(spec))
    if p.suffix == ".json" or p.exists():
        return load_group(p)
    raise UnknownName(f"unknown builtin group {spec!r}; choose from {', '.join(BUILTINS)} or give a .json file")
