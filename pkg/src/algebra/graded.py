"""
Operators with Grassmann-valued matrix entries
Kets carry Grassmann coefficients to the right of basis vectors and bras to
the left, so an operator |n⟩M_nk⟨k| acts by plain matrix products over the
Grassmann ring. Left multiplication of a ket by a Grassmann element g is the
diagonal operator g_even + (-1)^|n| g_odd.
"""

import logging
from itertools import combinations
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import expm

from algebra.fock import FockOperator, HilbertSpec, DimensionError, build_fermion_ops
from algebra.grassmann import (
    GeneratorRegistry,
    GrassmannElement,
    GrassmannError,
    canonicalize,
    common_registry,
    contract,
    involution_map,
    mask_parity,
    merge_signs,
    mask_indices,
)

logger = logging.getLogger(__name__)

MAX_REGULAR_GENERATORS = 10


class GrassmannOperator:
    """Matrix over the Grassmann algebra acting on right-coefficient kets"""

    __array_ufunc__ = None

    def __init__(
        self,
        spec: HilbertSpec,
        registry: GeneratorRegistry,
        masks: np.ndarray,
        coeffs: np.ndarray,
        canonical: bool = False,
        name: Optional[str] = None,
        shift: Optional[Tuple[int, str, str]] = None
    ):
        if not canonical:
            masks, coeffs = canonicalize(masks, coeffs)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[:2] != (spec.dimension, spec.dimension):
            raise DimensionError(f"Entry array {coeffs.shape[:2]} does not match dimension {spec.dimension}")
        self.spec = spec
        self.registry = registry
        self.masks = np.asarray(masks, dtype=np.uint64)
        self.coeffs = coeffs
        self.name = name
        # (mode, θ̄ label, θ label) when this is f_mode − θ or its adjoint
        self.shift = shift

    def __repr__(self) -> str:
        return f"GrassmannOperator({self.name or 'operator'}, dim={self.spec.dimension}, monomials={len(self.masks)})"

    # --- constructors ---------------------------------------------------------------

    @classmethod
    def from_fock(cls, op: FockOperator, registry: GeneratorRegistry) -> "GrassmannOperator":
        return cls(op.spec, registry, np.zeros(1, dtype=np.uint64), op.matrix[:, :, None], name=op.name)

    @classmethod
    def scalar(cls, spec: HilbertSpec, element: GrassmannElement) -> "GrassmannOperator":
        """Left multiplication by a Grassmann element as an operator"""
        signs = np.where(spec.fermion_parities() == 1, -1.0, 1.0)
        odd = mask_parity(element.masks) == 1
        diag = np.where(odd[None, :], signs[:, None], 1.0) * element.coeffs[None, :]
        coeffs = np.zeros((spec.dimension, spec.dimension, len(element.masks)), dtype=complex)
        idx = np.arange(spec.dimension)
        coeffs[idx, idx, :] = diag
        return cls(spec, element.registry, element.masks, coeffs)

    @classmethod
    def outer(cls, ket, bra) -> "GrassmannOperator":
        """|ket⟩⟨bra| as an operator"""
        if ket.side != "ket" or bra.side != "bra":
            raise GrassmannError("outer needs a ket and a bra")
        registry = common_registry(ket.registry, bra.registry)
        masks, coeffs = contract("n,m->nm", ket.masks, ket.coeffs, bra.masks, bra.coeffs)
        return cls(ket.spec, registry, masks, coeffs, canonical=True)

    # --- arithmetic -------------------------------------------------------------------

    def _promote(self, other) -> "GrassmannOperator":
        if isinstance(other, GrassmannOperator):
            if other.spec != self.spec:
                raise DimensionError(f"Operators live on different spaces: {self.spec} vs {other.spec}")
            return other
        if isinstance(other, FockOperator):
            return GrassmannOperator.from_fock(other, self.registry)
        if isinstance(other, GrassmannElement):
            return GrassmannOperator.scalar(self.spec, other)
        if isinstance(other, (int, float, complex)):
            return GrassmannOperator.from_fock(other * FockOperator.identity(self.spec), self.registry)
        raise TypeError(f"Cannot combine GrassmannOperator with {type(other).__name__}")

    def __add__(self, other):
        other = self._promote(other)
        registry = common_registry(self.registry, other.registry)
        return GrassmannOperator(
            self.spec, registry,
            np.concatenate([self.masks, other.masks]),
            np.concatenate([self.coeffs, other.coeffs], axis=2)
        )

    __radd__ = __add__

    def __neg__(self):
        return GrassmannOperator(self.spec, self.registry, self.masks, -self.coeffs, canonical=True)

    def __sub__(self, other):
        return self + (-self._promote(other))

    def __rsub__(self, other):
        return self._promote(other) - self

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, complex, np.number)):
            return NotImplemented
        return GrassmannOperator(self.spec, self.registry, self.masks, self.coeffs * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = self._promote(other)
        registry = common_registry(self.registry, other.registry)
        masks, coeffs = contract("nj,jk->nk", self.masks, self.coeffs, other.masks, other.coeffs)
        return GrassmannOperator(self.spec, registry, masks, coeffs, canonical=True)

    def __rmatmul__(self, other):
        return self._promote(other) @ self

    # --- inspection -----------------------------------------------------------------

    def entry(self, row: int, col: int) -> GrassmannElement:
        return GrassmannElement(self.registry, self.masks, self.coeffs[row, col])

    def numeric_part(self) -> FockOperator:
        hit = np.nonzero(self.masks == 0)[0]
        if hit.size:
            return FockOperator(self.spec, self.coeffs[:, :, hit[0]])
        return FockOperator.zero(self.spec)

    def is_numeric(self) -> bool:
        return bool(np.all(self.masks == 0))

    def dagger(self) -> "GrassmannOperator":
        """Transpose with involuted entries"""
        images, signs = involution_map(self.registry, self.masks)
        coeffs = np.conj(np.transpose(self.coeffs, (1, 0, 2))) * signs
        name = f"{self.name}†" if self.name else None
        return GrassmannOperator(self.spec, self.registry, images, coeffs, name=name, shift=self.shift)

    def parity(self) -> str:
        """Total grading: monomial degree plus the fermion parity of the move"""
        parities = self.spec.fermion_parities()
        flips = (parities[:, None] + parities[None, :]) % 2
        nonzero = np.abs(self.coeffs) > 0
        total = (flips[:, :, None] + mask_parity(self.masks)[None, None, :]) % 2
        seen = set(np.unique(total[nonzero]).tolist())
        if seen <= {0}:
            return "even"
        if seen == {1}:
            return "odd"
        return "mixed"

    def max_deviation(self, other) -> float:
        diff = self - self._promote(other)
        return float(np.max(np.abs(diff.coeffs))) if diff.coeffs.size else 0.0

    # --- exponential ------------------------------------------------------------------

    def expm(self, scale: complex = 1.0) -> "GrassmannOperator":
        """
        exp(scale·M) through the regular representation

        M acts on Grassmann-valued vectors spanned by (basis state, monomial)
        for every monomial over the generators present in M; the numeric
        exponential of that representation applied to the columns (k, 1)
        gives exp(M) exactly.
        """
        support = 0
        for m in self.masks:
            support |= int(m)
        generators = mask_indices(support)
        if len(generators) > MAX_REGULAR_GENERATORS:
            raise GrassmannError(
                f"expm supports at most {MAX_REGULAR_GENERATORS} generators in the entries, got {len(generators)}"
            )
        subsets = np.array(
            [sum(1 << g for g in chosen) for r in range(len(generators) + 1) for chosen in combinations(generators, r)],
            dtype=np.uint64
        )
        position = {int(m): j for j, m in enumerate(subsets)}
        dim = self.spec.dimension
        width = len(subsets)
        rep = np.zeros((dim, width, dim, width), dtype=complex)
        merged, signs = merge_signs(self.masks, subsets)
        for t in range(len(self.masks)):
            for s in range(width):
                if signs[t, s] == 0:
                    continue
                target = position[int(merged[t, s])]
                rep[:, target, :, s] += signs[t, s] * self.coeffs[:, :, t]
        exponent = expm(scale * rep.reshape(dim * width, dim * width)).reshape(dim, width, dim, width)
        logger.debug("expm via regular representation of size %d", dim * width)
        # column (k, empty monomial) holds exp(M) e_k
        coeffs = np.transpose(exponent[:, :, :, 0], (0, 2, 1))
        return GrassmannOperator(self.spec, self.registry, subsets, coeffs)


def as_grassmann(op: Union[FockOperator, GrassmannOperator], registry: GeneratorRegistry) -> GrassmannOperator:
    if isinstance(op, GrassmannOperator):
        return op
    return GrassmannOperator.from_fock(op, registry)


def shifted_annihilator(
    spec: HilbertSpec,
    registry: GeneratorRegistry,
    mode: int,
    theta: Tuple[str, str]
) -> Tuple[GrassmannOperator, GrassmannOperator]:
    """
    χ = f_mode − θ and χ† = f_mode† − θ̄ as Grassmann operators

    Args:
        spec: Fermion Hilbert space
        registry: Registry receiving the (θ̄, θ) pair
        mode: 1-based fermion mode
        theta: (bar label, label) of the shift generators

    Returns:
        Tuple of (χ, χ†)
    """
    bar_label, label = theta
    thetabar, theta_gen = registry.pair(bar_label, label)
    f, _ = build_fermion_ops(spec)[mode - 1]
    chi = GrassmannOperator.from_fock(f, registry) - GrassmannOperator.scalar(spec, theta_gen)
    chi.name = f"f{mode}-{label}"
    chi.shift = (mode, bar_label, label)
    return chi, chi.dagger()
