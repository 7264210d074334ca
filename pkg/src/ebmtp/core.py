"""Datasets, modified treatment policies, and input validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[np.ndarray, Sequence[float]]


class ValidationError(ValueError):
    """Raised when a dataset or policy violates its invariants."""


class DimensionError(ValidationError):
    pass


class NonFiniteError(ValidationError):
    pass


def _frozen(arr: ArrayLike, ndim: int) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    if ndim == 2 and out.ndim == 1:
        out = out.reshape(-1, 1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Observational data: covariates ``X`` (n x p), treatment ``A``, outcome ``Y``.

    Arrays are copied and made read-only on construction. Construction does not
    validate; call :func:`validate` (every estimator does so on entry).
    """

    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    column_names: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "X", _frozen(self.X, 2))
        object.__setattr__(self, "A", _frozen(self.A, 1))
        object.__setattr__(self, "Y", _frozen(self.Y, 1))
        if self.column_names is not None:
            object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        """Rows ``idx`` (with repetition allowed), as a new dataset."""
        return Dataset(self.X[idx], self.A[idx], self.Y[idx], self.column_names)

    def with_outcome(self, Y: ArrayLike) -> "Dataset":
        return Dataset(self.X, self.A, Y, self.column_names)


def _check_finite(name: str, arr: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(arr.ravel()))
    if bad.size:
        flat = int(bad[0])
        if arr.ndim == 2:
            where = f"row {flat // arr.shape[1]}, column {flat % arr.shape[1]}"
        else:
            where = f"index {flat}"
        raise NonFiniteError(f"{name} has a non-finite entry at {where}")


def validate(data: Dataset) -> None:
    """Check the dataset invariants, raising :class:`ValidationError` on failure.

    Errors name the offending field, and for non-finite entries the index.
    """
    if data.X.ndim != 2:
        raise DimensionError(f"X must be 2-D, got {data.X.ndim}-D")
    n, p = data.X.shape
    if n < 2:
        raise DimensionError(f"X needs at least 2 rows, got {n}")
    if p < 1:
        raise DimensionError("X needs at least 1 column")
    for name, vec in (("A", data.A), ("Y", data.Y)):
        if vec.ndim != 1 or vec.shape[0] != n:
            raise DimensionError(f"{name} has length {vec.size}, expected n={n}")
    if data.column_names is not None and len(data.column_names) != p:
        raise DimensionError(
            f"column_names has {len(data.column_names)} entries, expected p={p}"
        )
    _check_finite("X", data.X)
    _check_finite("A", data.A)
    _check_finite("Y", data.Y)


def standardize_columns(
    Z: np.ndarray, reference: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Column means and sample sds of ``reference`` (default ``Z``).

    Constant columns get scale 1 so they pass through centred but unscaled.
    """
    ref = Z if reference is None else reference
    center = ref.mean(axis=0)
    scale = ref.std(axis=0, ddof=1) if ref.shape[0] > 1 else np.ones(ref.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    return center, scale


# -- policies ---------------------------------------------------------------


@dataclass(frozen=True)
class Piece:
    """One affine rule ``q(a) = slope*a + intercept_per_tau*tau + intercept_const``
    on the interval ``[lower, upper)``."""

    lower: float
    upper: float
    slope: float = 1.0
    intercept_per_tau: float = 0.0
    intercept_const: float = 0.0

    def intercept(self, tau: float) -> float:
        return self.intercept_per_tau * tau + self.intercept_const


@dataclass(frozen=True)
class PolicySpec:
    """A piecewise-affine modified treatment policy in the treatment alone.

    Pieces are ordered, left-closed/right-open, and must partition the real
    line. ``tau`` scales the per-tau part of each intercept.
    """

    pieces: tuple[Piece, ...]
    tau: float = 0.0
    _lowers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        check_policy(self)
        lowers = np.array([pc.lower for pc in pieces], dtype=np.float64)
        lowers.setflags(write=False)
        object.__setattr__(self, "_lowers", lowers)

    def with_tau(self, tau: float) -> "PolicySpec":
        return replace(self, tau=float(tau))

    @property
    def is_identity(self) -> bool:
        return all(
            pc.slope == 1.0 and pc.intercept(self.tau) == 0.0 for pc in self.pieces
        )

    def piece_index(self, a: ArrayLike) -> np.ndarray:
        """Index of the piece containing each treatment value."""
        return np.searchsorted(self._lowers, np.asarray(a, dtype=np.float64), side="right") - 1

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "pieces": [
                {
                    "lower": _encode_bound(pc.lower),
                    "upper": _encode_bound(pc.upper),
                    "slope": pc.slope,
                    "intercept_per_tau": pc.intercept_per_tau,
                    "intercept_const": pc.intercept_const,
                }
                for pc in self.pieces
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PolicySpec":
        try:
            pieces = tuple(
                Piece(
                    lower=_decode_bound(raw["lower"]),
                    upper=_decode_bound(raw["upper"]),
                    slope=float(raw.get("slope", 1.0)),
                    intercept_per_tau=float(raw.get("intercept_per_tau", 0.0)),
                    intercept_const=float(raw.get("intercept_const", 0.0)),
                )
                for raw in obj["pieces"]
            )
            tau = float(obj.get("tau", 0.0))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed policy: {exc!r}") from exc
        return cls(pieces, tau)

    @classmethod
    def from_json(cls, path) -> "PolicySpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _encode_bound(x: float):
    if math.isinf(x):
        return "-inf" if x < 0 else "+inf"
    return x


def _decode_bound(x) -> float:
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("-inf", "-infinity"):
            return -math.inf
        if s in ("+inf", "inf", "+infinity", "infinity"):
            return math.inf
        raise ValidationError(f"unrecognised interval bound {x!r}")
    return float(x)


def check_policy(policy: PolicySpec) -> None:
    """Pieces must tile (-inf, +inf) in order with nonzero slopes and finite rules."""
    pieces = policy.pieces
    if not pieces:
        raise ValidationError("policy has no pieces")
    if not (math.isfinite(policy.tau) and policy.tau >= 0):
        raise ValidationError(f"tau must be finite and >= 0, got {policy.tau}")
    if pieces[0].lower != -math.inf:
        raise ValidationError("first piece must start at -inf")
    if pieces[-1].upper != math.inf:
        raise ValidationError("last piece must end at +inf")
    for j, pc in enumerate(pieces):
        if not pc.lower < pc.upper:
            raise ValidationError(f"piece {j} is empty: [{pc.lower}, {pc.upper})")
        if j and pc.lower != pieces[j - 1].upper:
            raise ValidationError(
                f"pieces {j - 1} and {j} leave a gap or overlap at "
                f"{pieces[j - 1].upper} / {pc.lower}"
            )
        if pc.slope == 0 or not math.isfinite(pc.slope):
            raise ValidationError(f"piece {j} has non-invertible slope {pc.slope}")
        if not (math.isfinite(pc.intercept_per_tau) and math.isfinite(pc.intercept_const)):
            raise ValidationError(f"piece {j} has a non-finite intercept")


def apply_policy(policy: PolicySpec, a):
    """Evaluate the modified treatment ``q(a)``; scalar in, scalar out."""
    arr = np.asarray(a, dtype=np.float64)
    idx = policy.piece_index(arr)
    slopes = np.array([pc.slope for pc in policy.pieces])
    intercepts = np.array([pc.intercept(policy.tau) for pc in policy.pieces])
    out = slopes[idx] * arr + intercepts[idx]
    if out.ndim == 0:
        return float(out)
    return out


def shifted_sample(data: Dataset, policy: PolicySpec) -> np.ndarray:
    """Rows ``(X_i, q(X_i, A_i))`` of the policy-shifted target sample."""
    validate(data)
    return np.column_stack([data.X, apply_policy(policy, data.A)])


def observed_sample(data: Dataset) -> np.ndarray:
    return np.column_stack([data.X, data.A])


# -- stock policies ---------------------------------------------------------


def identity_policy() -> PolicySpec:
    return PolicySpec((Piece(-math.inf, math.inf),), 0.0)


def shift_policy(delta: float) -> PolicySpec:
    """``q(a) = a + delta``, with ``delta`` carried as tau."""
    if delta >= 0:
        return PolicySpec((Piece(-math.inf, math.inf, 1.0, 1.0, 0.0),), float(delta))
    return PolicySpec((Piece(-math.inf, math.inf, 1.0, -1.0, 0.0),), float(-delta))


def piecewise_shift_policy(
    breaks: Iterable[float], shifts_per_tau: Iterable[float], tau: float = 0.0
) -> PolicySpec:
    """Location shifts ``a + shift_j * tau`` on the intervals cut at ``breaks``."""
    breaks = [float(b) for b in breaks]
    shifts = [float(s) for s in shifts_per_tau]
    if len(shifts) != len(breaks) + 1:
        raise ValidationError("need one shift per interval (len(breaks) + 1)")
    edges = [-math.inf, *breaks, math.inf]
    pieces = tuple(
        Piece(edges[j], edges[j + 1], 1.0, shifts[j], 0.0) for j in range(len(shifts))
    )
    return PolicySpec(pieces, tau)


def case_study_policy(tau: float = 0.0) -> PolicySpec:
    """Mechanical-power reduction: identity below 5, then ``a - k*tau`` with
    k = 5, 10, 15, 30 on [5,10), [10,20), [20,40), [40,inf)."""
    return piecewise_shift_policy([5, 10, 20, 40], [0, -5, -10, -15, -30], tau)


# -- weights ----------------------------------------------------------------


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative sample weights summing to n, with solver metadata."""

    w: np.ndarray
    objective: float = float("nan")
    converged: bool = True
    iterations: int = 0
    lam: Optional[float] = None
    history: tuple[float, ...] = ()
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "w", _frozen(self.w, 1))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def is_feasible(self, cap: Optional[float] = None, rtol: float = 1e-8) -> bool:
        w = self.w
        ok = bool(np.all(w >= 0) and abs(w.sum() - w.size) <= rtol * w.size)
        if cap is not None:
            ok = ok and bool(np.all(w <= cap * (1 + 1e-12)))
        return ok
