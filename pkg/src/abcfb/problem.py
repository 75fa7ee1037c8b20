"""Composite problems ``F = f + sum_i g_i`` over a block-partitioned vector.

A problem carries oracles for the smooth part ``f`` (value and blockwise
gradients), for the block-separable nonsmooth part ``g`` (value and prox), and
the Lipschitz metadata the stepsize rules need.  Vectors are flat float arrays;
a :class:`BlockLayout` says which contiguous slice belongs to which block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ParameterError, StructuralError

__all__ = [
    "BlockLayout",
    "LipschitzData",
    "WeightVector",
    "ReferenceOptimum",
    "BlockFunction",
    "ZeroFunction",
    "L1Norm",
    "BoxIndicator",
    "IndicatorZero",
    "QuadraticSmooth",
    "CompositeProblem",
    "eval_F",
    "partial_grad",
    "full_gradient",
    "prox_block",
    "weighted_norm_sq",
    "prox_grad_residual",
    "spectral_norm",
]


@dataclass(frozen=True)
class BlockLayout:
    """Partition of ``N`` coordinates into ``m`` contiguous blocks."""

    block_dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.block_dims)
        if len(dims) < 1:
            raise StructuralError("a layout needs at least one block")
        if any(d < 1 for d in dims):
            raise StructuralError(f"block dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "block_dims", dims)
        offsets = np.zeros(len(dims) + 1, dtype=np.int64)
        np.cumsum(dims, out=offsets[1:])
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        owner = np.repeat(np.arange(len(dims)), dims)
        owner.setflags(write=False)
        object.__setattr__(self, "coord_block", owner)
        object.__setattr__(self, "_slices", tuple(
            slice(int(offsets[i]), int(offsets[i + 1])) for i in range(len(dims))))

    @classmethod
    def scalar(cls, m: int) -> "BlockLayout":
        """``m`` blocks of dimension one."""
        return cls((1,) * int(m))

    @property
    def m(self) -> int:
        return len(self.block_dims)

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    @property
    def is_scalar(self) -> bool:
        return self.dim == self.m

    def slice(self, i: int) -> slice:
        return self._slices[i]

    def block(self, x: np.ndarray, i: int) -> np.ndarray:
        return x[self._slices[i]]

    def check_index(self, i) -> int:
        if not (0 <= int(i) < self.m) or int(i) != i:
            raise StructuralError(f"block index {i} outside [0, {self.m})")
        return int(i)

    def check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise StructuralError(
                f"vector of shape {x.shape} does not match layout dimension {self.dim}")
        return x

    def expand(self, per_block) -> np.ndarray:
        """Broadcast one value per block to one value per coordinate."""
        per_block = np.asarray(per_block)
        if per_block.shape != (self.m,):
            raise StructuralError(f"expected {self.m} block values, got shape {per_block.shape}")
        return per_block[self.coord_block]

    def block_sq_norms(self, x: np.ndarray) -> np.ndarray:
        """``|x_i|^2`` for every block."""
        sq = np.asarray(x, dtype=float) ** 2
        if self.is_scalar:
            return sq
        return np.add.reduceat(sq, self.offsets[:-1])


@dataclass(frozen=True)
class LipschitzData:
    """Blockwise constants ``L_i`` and the cross-block constant ``L_res``.

    ``L_i`` bounds the variation of the partial gradient of block ``i`` when
    only block ``i`` moves; ``L_res`` bounds the variation of the full
    gradient when any single block moves, hence ``max L_i <= L_res``.
    """

    per_block: np.ndarray
    residual: float

    def __post_init__(self):
        per_block = np.array(self.per_block, dtype=float).reshape(-1)
        per_block.setflags(write=False)
        object.__setattr__(self, "per_block", per_block)
        object.__setattr__(self, "residual", float(self.residual))
        if per_block.size == 0:
            raise StructuralError("need at least one blockwise Lipschitz constant")
        if not np.all(np.isfinite(per_block)) or np.any(per_block <= 0):
            raise ParameterError("blockwise Lipschitz constants must be positive and finite")
        if not math.isfinite(self.residual) or self.residual <= 0:
            raise ParameterError("L_res must be positive and finite")
        if self.L_max > self.residual:
            raise ParameterError(
                f"L_max = {self.L_max!r} exceeds L_res = {self.residual!r}")

    @property
    def m(self) -> int:
        return self.per_block.size

    @property
    def L_max(self) -> float:
        return float(self.per_block.max())

    @property
    def L_min(self) -> float:
        return float(self.per_block.min())


@dataclass(frozen=True)
class WeightVector:
    """Block weights of the diagonal metrics ``V``, ``Gamma^-1`` and ``W``."""

    kind: str
    weights: np.ndarray

    def __post_init__(self):
        if self.kind not in ("V", "GammaInv", "W"):
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ParameterError("metric weights must be positive and finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def V(cls, p) -> "WeightVector":
        return cls("V", np.asarray(p, dtype=float))

    @classmethod
    def gamma_inv(cls, gamma) -> "WeightVector":
        return cls("GammaInv", 1.0 / np.asarray(gamma, dtype=float))

    @classmethod
    def W(cls, gamma, p) -> "WeightVector":
        return cls("W", 1.0 / (np.asarray(gamma, dtype=float) * np.asarray(p, dtype=float)))


@dataclass(frozen=True)
class ReferenceOptimum:
    """An optimal value together with how it was obtained."""

    value: float
    provenance: str
    x: Optional[np.ndarray] = None
    residual: Optional[float] = None


# --------------------------------------------------------------------------
# Nonsmooth building blocks.  All built-ins are coordinatewise separable, so
# ``prox`` accepts a scalar or per-coordinate ``gamma``.
# --------------------------------------------------------------------------

class BlockFunction:
    """Proper convex lsc function on one block, with a closed-form prox."""

    def value(self, v: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, v: np.ndarray, gamma) -> np.ndarray:
        raise NotImplementedError


class ZeroFunction(BlockFunction):
    def value(self, v):
        return 0.0

    def prox(self, v, gamma):
        return np.array(v, dtype=float, copy=True)

    def __repr__(self):
        return "ZeroFunction()"


class L1Norm(BlockFunction):
    """``lam * |v|_1``; its prox is soft thresholding at ``lam * gamma``."""

    def __init__(self, lam: float = 1.0):
        if not lam >= 0:
            raise ParameterError(f"l1 weight must be nonnegative, got {lam}")
        self.lam = float(lam)

    def value(self, v):
        return self.lam * float(np.sum(np.abs(v)))

    def prox(self, v, gamma):
        v = np.asarray(v, dtype=float)
        return np.sign(v) * np.maximum(np.abs(v) - self.lam * np.asarray(gamma), 0.0)

    def __repr__(self):
        return f"L1Norm(lam={self.lam!r})"


class BoxIndicator(BlockFunction):
    """Indicator of ``[lower, upper]`` componentwise; prox is clamping."""

    def __init__(self, lower=-np.inf, upper=np.inf):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ParameterError("box lower bound exceeds upper bound")

    def value(self, v):
        v = np.asarray(v, dtype=float)
        inside = np.all((v >= self.lower) & (v <= self.upper))
        return 0.0 if inside else math.inf

    def prox(self, v, gamma):
        return np.clip(np.asarray(v, dtype=float), self.lower, self.upper)

    def __repr__(self):
        return f"BoxIndicator(lower={self.lower!r}, upper={self.upper!r})"


class IndicatorZero(BoxIndicator):
    """Indicator of ``{0}``."""

    def __init__(self):
        super().__init__(0.0, 0.0)

    def __repr__(self):
        return "IndicatorZero()"


class QuadraticSmooth:
    """``f(x) = 1/2 x^T Q x - c^T x + const`` with ``Q`` symmetric PSD."""

    def __init__(self, Q, c=None, const: float = 0.0):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise StructuralError(f"Q must be square, got shape {Q.shape}")
        self.Q = Q
        self.c = np.zeros(Q.shape[0]) if c is None else np.asarray(c, dtype=float)
        if self.c.shape != (Q.shape[0],):
            raise StructuralError("linear term does not match Q")
        self.const = float(const)

    def value(self, x):
        return 0.5 * float(x @ (self.Q @ x)) - float(self.c @ x) + self.const

    def gradient(self, x):
        return self.Q @ x - self.c

    def lipschitz(self, layout: BlockLayout) -> LipschitzData:
        """Exact ``L_i = |Q_ii|_2`` and ``L_res = max_i |Q[:, block i]|_2``."""
        per_block, cols = [], []
        for i in range(layout.m):
            sl = layout.slice(i)
            per_block.append(np.linalg.norm(self.Q[sl, sl], 2))
            cols.append(np.linalg.norm(self.Q[:, sl], 2))
        return LipschitzData(np.array(per_block), max(cols))


NonsmoothSpec = Union[BlockFunction, Sequence[BlockFunction]]


@dataclass(frozen=True)
class CompositeProblem:
    """Oracles and constants of ``F(x) = f(x) + sum_i g_i(x_i)``.

    Parameters
    ----------
    layout : BlockLayout
    smooth_value : callable ``x -> f(x)``
    partial_gradient : callable ``(x, i) -> grad_i f(x)``
    nonsmooth : BlockFunction or sequence of ``m`` BlockFunction
        A single function is applied to every block (and must then be
        coordinatewise separable, as all built-ins are).
    lipschitz : LipschitzData
    gradient : callable ``x -> grad f(x)``, optional
        Defaults to stacking the partial gradients.
    smooth_lipschitz : float, optional
        Lipschitz constant of the full gradient, used by the reference
        solver.  Defaults to ``sqrt(m) * L_res``, which is always valid.
    """

    layout: BlockLayout
    smooth_value: Callable[[np.ndarray], float]
    partial_gradient: Callable[[np.ndarray, int], np.ndarray]
    nonsmooth: NonsmoothSpec
    lipschitz: LipschitzData
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smooth_lipschitz: Optional[float] = None
    reference_optimum: Optional[ReferenceOptimum] = None
    name: str = "composite"
    instance: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.lipschitz.m != self.layout.m:
            raise StructuralError(
                f"{self.lipschitz.m} Lipschitz constants for {self.layout.m} blocks")
        if not isinstance(self.nonsmooth, BlockFunction):
            funcs = tuple(self.nonsmooth)
            if len(funcs) != self.layout.m:
                raise StructuralError(f"{len(funcs)} nonsmooth terms for {self.layout.m} blocks")
            object.__setattr__(self, "nonsmooth", funcs)

    @property
    def m(self) -> int:
        return self.layout.m

    @property
    def dim(self) -> int:
        return self.layout.dim

    def block_function(self, i: int) -> BlockFunction:
        if isinstance(self.nonsmooth, BlockFunction):
            return self.nonsmooth
        return self.nonsmooth[i]

    def nonsmooth_value(self, i: int, v: np.ndarray) -> float:
        return self.block_function(i).value(v)

    def prox(self, i: int, v: np.ndarray, gamma: float) -> np.ndarray:
        return self.block_function(i).prox(v, gamma)

    def g_value(self, x: np.ndarray) -> float:
        if isinstance(self.nonsmooth, BlockFunction):
            return self.nonsmooth.value(x)
        return math.fsum(g.value(self.layout.block(x, i)) for i, g in enumerate(self.nonsmooth))

    def prox_all(self, v: np.ndarray, gamma: np.ndarray) -> np.ndarray:
        """Blockwise ``prox_{gamma_i g_i}`` applied to every block of ``v``."""
        if isinstance(self.nonsmooth, BlockFunction):
            return self.nonsmooth.prox(v, self.layout.expand(gamma))
        out = np.empty_like(v, dtype=float)
        for i, g in enumerate(self.nonsmooth):
            sl = self.layout.slice(i)
            out[sl] = g.prox(v[sl], gamma[i])
        return out

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        if self.gradient is not None:
            return self.gradient(x)
        return np.concatenate([np.atleast_1d(self.partial_gradient(x, i)) for i in range(self.m)])

    def full_lipschitz(self) -> float:
        if self.smooth_lipschitz is not None:
            return float(self.smooth_lipschitz)
        return math.sqrt(self.m) * self.lipschitz.residual

    def F(self, x: np.ndarray) -> float:
        gx = self.g_value(x)
        if gx == math.inf:
            return math.inf
        return self.smooth_value(x) + gx

    @classmethod
    def quadratic(cls, layout: BlockLayout, Q, c=None, nonsmooth: NonsmoothSpec = None,
                  const: float = 0.0, name: str = "quadratic") -> "CompositeProblem":
        """Quadratic ``f`` with exact Lipschitz constants."""
        f = QuadraticSmooth(Q, c, const)
        if f.Q.shape[0] != layout.dim:
            raise StructuralError("Q does not match the layout dimension")
        Q_ = f.Q
        c_ = f.c

        def partial(x, i):
            sl = layout.slice(i)
            return Q_[sl] @ x - c_[sl]

        return cls(
            layout=layout,
            smooth_value=f.value,
            partial_gradient=partial,
            nonsmooth=ZeroFunction() if nonsmooth is None else nonsmooth,
            lipschitz=f.lipschitz(layout),
            gradient=f.gradient,
            smooth_lipschitz=float(np.linalg.norm(Q_, 2)),
            name=name,
            instance=f,
        )


# --------------------------------------------------------------------------
# Checked operations
# --------------------------------------------------------------------------

def eval_F(problem: CompositeProblem, x) -> float:
    """``f(x) + sum_i g_i(x_i)``; ``math.inf`` outside the domain of ``g``."""
    x = problem.layout.check_vector(x)
    return problem.F(x)


def partial_grad(problem: CompositeProblem, x, i) -> np.ndarray:
    x = problem.layout.check_vector(x)
    i = problem.layout.check_index(i)
    return np.atleast_1d(np.asarray(problem.partial_gradient(x, i), dtype=float))


def full_gradient(problem: CompositeProblem, x) -> np.ndarray:
    x = problem.layout.check_vector(x)
    return problem.full_gradient(x)


def prox_block(problem: CompositeProblem, i, v, gamma: float) -> np.ndarray:
    i = problem.layout.check_index(i)
    if not gamma > 0:
        raise ParameterError(f"prox parameter must be positive, got {gamma}")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (problem.layout.block_dims[i],):
        raise StructuralError(f"block {i} has dimension {problem.layout.block_dims[i]}, got {v.shape}")
    return problem.prox(i, v, gamma)


def weighted_norm_sq(layout: BlockLayout, x, w) -> float:
    """``sum_i w_i |x_i|^2`` for block weights ``w`` (array or WeightVector)."""
    weights = w.weights if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    x = layout.check_vector(x)
    if weights.shape != (layout.m,):
        raise StructuralError(f"expected {layout.m} weights, got shape {weights.shape}")
    return float(weights @ layout.block_sq_norms(x))


def prox_grad_residual(problem: CompositeProblem, x, gamma) -> float:
    """Forward-backward residual ``|x - prox(x - Gamma grad f(x))|_{Gamma^-1}``.

    Vanishes exactly at the minimizers of ``F``.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (problem.m,):
        raise StructuralError(f"expected {problem.m} stepsizes, got shape {gamma.shape}")
    if np.any(gamma <= 0):
        raise ParameterError("stepsizes must be positive")
    x = problem.layout.check_vector(x)
    return _residual(problem, x, gamma)


def _residual(problem: CompositeProblem, x: np.ndarray, gamma: np.ndarray) -> float:
    gcoord = problem.layout.expand(gamma)
    forward = x - gcoord * problem.full_gradient(x)
    diff = x - problem.prox_all(forward, gamma)
    return math.sqrt(float((1.0 / gamma) @ problem.layout.block_sq_norms(diff)))


def spectral_norm(A, tol: float = 1e-10, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``.

    Stops when the relative change of the estimate drops below ``tol``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise StructuralError("spectral_norm needs a nonempty matrix")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        Av = A @ v
        new_sigma = float(np.linalg.norm(Av))
        if new_sigma == 0.0:
            # start vector in the null space; A is zero on it, restart
            v = rng.standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            if not np.any(A):
                return 0.0
            continue
        w = A.T @ Av
        v = w / np.linalg.norm(w)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return float(np.linalg.norm(A @ v))
