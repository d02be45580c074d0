"""
Grassmann algebra arithmetic
Exact sparse arithmetic in the complex Grassmann algebra. Monomials are
bitmasks over a generator registry, stored in ascending generator order with
every reordering sign folded into a complex coefficient.
"""

import logging
import re
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from utils.settings import settings

logger = logging.getLogger(__name__)

MAX_GENERATORS = 64
_ONE = np.uint64(1)
_FORBIDDEN_LABEL_CHARS = set(" ·()+")

Number = Union[int, float, complex]


class GrassmannError(ValueError):
    """Base class for Grassmann algebra errors"""


class RegistryMismatchError(GrassmannError):
    pass


class RegistryFullError(GrassmannError):
    pass


class UnknownGeneratorError(GrassmannError):
    pass


class UnpairedGeneratorError(GrassmannError):
    pass


class ParityError(GrassmannError):
    pass


class GeneratorLeakError(GrassmannError):
    pass


class GeneratorRegistry:
    """
    Append-only table of Grassmann generators

    Generator indices are issued in insertion order and never change, so
    monomial bitmasks stay valid for the registry's lifetime. A scoped child
    registry shares every generator of its parent and may add its own; the
    parent must not grow while children are in use.
    """

    def __init__(self, labels: Iterable[str] = (), parent: Optional["GeneratorRegistry"] = None):
        self.parent = parent
        self._labels: List[str] = []
        self._index: Dict[str, int] = {}
        self._partner: Dict[int, int] = {}
        self._base = 0
        if parent is not None:
            self._labels = list(parent._labels)
            self._index = dict(parent._index)
            self._partner = dict(parent._partner)
            self._base = len(parent._labels)
        for label in labels:
            self.add(label)

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __repr__(self) -> str:
        return f"GeneratorRegistry({len(self)} generators)"

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(self._labels)

    def add(self, label: str) -> int:
        """
        Register a generator, returning its index (existing labels are reused)

        Args:
            label: Symbolic name such as "psi_1" or "thetabar"

        Returns:
            Ordering index of the generator
        """
        if label in self._index:
            return self._index[label]
        if not label or _FORBIDDEN_LABEL_CHARS.intersection(label):
            raise GrassmannError(f"Invalid generator label: {label!r}")
        if len(self._labels) >= MAX_GENERATORS:
            raise RegistryFullError(
                f"Registry holds {MAX_GENERATORS} generators; cannot add {label!r}"
            )
        index = len(self._labels)
        self._labels.append(label)
        self._index[label] = index
        return index

    def add_pair(self, bar_label: str, label: str) -> Tuple[int, int]:
        """
        Register a conjugate pair used by the involution

        Args:
            bar_label: Conjugate generator label (e.g. "psibar_1")
            label: Generator label (e.g. "psi_1")

        Returns:
            Tuple of (bar index, index)
        """
        bar_index = self.add(bar_label)
        index = self.add(label)
        for a, b in ((bar_index, index), (index, bar_index)):
            current = self._partner.get(a)
            if current is not None and current != b:
                raise GrassmannError(
                    f"Generator {self._labels[a]!r} is already paired with {self._labels[current]!r}"
                )
            self._partner[a] = b
        return bar_index, index

    def pair(self, bar_label: str, label: str) -> Tuple["GrassmannElement", "GrassmannElement"]:
        """Register a conjugate pair and return both generators as elements"""
        self.add_pair(bar_label, label)
        return self.generator(bar_label), self.generator(label)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownGeneratorError(f"Generator {label!r} is not registered")

    def label(self, index: int) -> str:
        return self._labels[index]

    def partner(self, index: int) -> int:
        try:
            return self._partner[index]
        except KeyError:
            raise UnpairedGeneratorError(
                f"Generator {self._labels[index]!r} has no declared conjugate partner"
            )

    def mask(self, labels: Iterable[str]) -> int:
        mask = 0
        for label in labels:
            mask |= 1 << self.index(label)
        return mask

    def labels_of(self, mask: int) -> List[str]:
        return [self._labels[i] for i in mask_indices(mask)]

    def generator(self, label: str) -> "GrassmannElement":
        bit = np.array([_ONE << np.uint64(self.index(label))], dtype=np.uint64)
        return GrassmannElement(self, bit, np.ones(1, dtype=complex), canonical=True)

    def scalar(self, value: Number) -> "GrassmannElement":
        return GrassmannElement(self, np.zeros(1, dtype=np.uint64), np.array([value], dtype=complex))

    def zero(self) -> "GrassmannElement":
        return GrassmannElement(self, np.zeros(0, dtype=np.uint64), np.zeros(0, dtype=complex), canonical=True)

    def scope(self) -> "GeneratorRegistry":
        """Child registry for run-local generators (lattice slices)"""
        return GeneratorRegistry(parent=self)

    def local_mask(self) -> int:
        """Bitmask of generators added in this scope rather than inherited"""
        return sum(1 << i for i in range(self._base, len(self._labels)))

    def is_ancestor_of(self, other: "GeneratorRegistry") -> bool:
        node = other
        while node.parent is not None:
            if node._base != len(node.parent):
                raise RegistryMismatchError(
                    "Parent registry grew after a scoped registry was created"
                )
            if node.parent is self:
                return True
            node = node.parent
        return False


def mask_indices(mask: int) -> List[int]:
    mask = int(mask)
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def common_registry(a: GeneratorRegistry, b: GeneratorRegistry) -> GeneratorRegistry:
    """Registry able to hold elements of both a and b"""
    if a is b:
        return a
    if a.is_ancestor_of(b):
        return b
    if b.is_ancestor_of(a):
        return a
    raise RegistryMismatchError("Grassmann elements belong to unrelated registries")


def mask_parity(masks: np.ndarray) -> np.ndarray:
    """Parity (0 or 1) of the generator count of each bitmask"""
    v = np.array(masks, dtype=np.uint64, copy=True)
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> np.uint64(shift)
    return (v & _ONE).astype(np.int64)


def canonicalize(
    masks: np.ndarray,
    coeffs: np.ndarray,
    threshold: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Merge duplicate monomials and prune small coefficients

    Args:
        masks: Monomial bitmasks, shape (K,)
        coeffs: Coefficients with the monomial axis last, shape (..., K)
        threshold: Prune threshold (defaults to settings.prune_threshold)

    Returns:
        Tuple of sorted unique masks and matching coefficients
    """
    if threshold is None:
        threshold = settings.prune_threshold
    masks = np.asarray(masks, dtype=np.uint64).ravel()
    coeffs = np.asarray(coeffs, dtype=complex)
    lead = coeffs.shape[:-1]
    if masks.size == 0:
        return masks, np.zeros(lead + (0,), dtype=complex)

    unique, inverse = np.unique(masks, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    folding = sparse.csr_matrix(
        (np.ones(masks.size), (inverse, np.arange(masks.size))),
        shape=(unique.size, masks.size)
    )
    flat = coeffs.reshape(-1, masks.size)
    folded = np.asarray(folding @ flat.T).T.reshape(lead + (unique.size,))
    folded[np.abs(folded) < threshold] = 0
    keep = np.any(folded.reshape(-1, unique.size) != 0, axis=0)
    return unique[keep], np.ascontiguousarray(folded[..., keep])


def merge_signs(masks_a: np.ndarray, masks_b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pairwise products of two monomial lists

    Returns the merged masks (len(a), len(b)) and the reordering signs;
    overlapping monomials get sign 0.
    """
    a = np.asarray(masks_a, dtype=np.uint64)[:, None]
    b = np.asarray(masks_b, dtype=np.uint64)[None, :]
    merged = a | b
    if merged.size == 0:
        return merged, np.zeros(merged.shape)
    disjoint = (a & b) == 0

    # sign = parity of pairs (i in a, j in b) with i > j
    odd = np.zeros(merged.shape, dtype=bool)
    above = np.zeros(a.shape, dtype=bool)
    for g in range(int(merged.max()).bit_length() - 1, -1, -1):
        bit = _ONE << np.uint64(g)
        odd ^= above & ((b & bit) != 0)
        above ^= (a & bit) != 0
    signs = np.where(disjoint, np.where(odd, -1.0, 1.0), 0.0)
    return merged, signs


def contract(
    subscripts: str,
    masks_a: np.ndarray,
    coeffs_a: np.ndarray,
    masks_b: np.ndarray,
    coeffs_b: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    einsum over arrays of Grassmann elements, left operand kept on the left

    Args:
        subscripts: einsum spec without the monomial axes, e.g. "nk,k->n"
        masks_a, coeffs_a: left operand (coefficients shaped (..., Ka))
        masks_b, coeffs_b: right operand (coefficients shaped (..., Kb))

    Returns:
        Canonical (masks, coeffs) of the result
    """
    inputs, output = subscripts.split("->")
    left, right = inputs.split(",")
    pair = np.einsum(f"{left}Y,{right}Z->{output}YZ", coeffs_a, coeffs_b)
    masks, signs = merge_signs(masks_a, masks_b)
    pair = pair * signs
    return canonicalize(masks.ravel(), pair.reshape(pair.shape[:-2] + (-1,)))


def integrate_array(
    masks: np.ndarray,
    coeffs: np.ndarray,
    index: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Left Berezin integration over generator `index` of an element array"""
    bit = _ONE << np.uint64(index)
    masks = np.asarray(masks, dtype=np.uint64)
    has = (masks & bit) != 0
    signs = np.where(mask_parity(masks & (bit - _ONE)) == 1, -1.0, 1.0)
    return canonicalize(masks[has] ^ bit, coeffs[..., has] * signs[has])


def involution_map(registry: GeneratorRegistry, masks: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Image masks and signs of c·g1...gk -> c*·p(gk)...p(g1) for each mask"""
    images = np.zeros(len(masks), dtype=np.uint64)
    signs = np.ones(len(masks))
    for j, mask in enumerate(masks):
        sequence = [registry.partner(i) for i in reversed(mask_indices(mask))]
        inversions = sum(
            1 for p in range(len(sequence)) for q in range(p + 1, len(sequence))
            if sequence[p] > sequence[q]
        )
        signs[j] = -1.0 if inversions % 2 else 1.0
        images[j] = sum(1 << i for i in sequence)
    return images, signs


class GrassmannElement:
    """Immutable element of the complex Grassmann algebra over a registry"""

    __slots__ = ("registry", "masks", "coeffs")
    # numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __init__(
        self,
        registry: GeneratorRegistry,
        masks: np.ndarray,
        coeffs: np.ndarray,
        canonical: bool = False
    ):
        if not canonical:
            masks, coeffs = canonicalize(masks, coeffs)
        masks = np.asarray(masks, dtype=np.uint64)
        coeffs = np.asarray(coeffs, dtype=complex)
        masks.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "registry", registry)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("GrassmannElement is immutable")

    # --- construction helpers -------------------------------------------------

    def _coerce(self, other) -> Optional["GrassmannElement"]:
        if isinstance(other, GrassmannElement):
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return self.registry.scalar(complex(other))
        return None

    # --- arithmetic -------------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        registry = common_registry(self.registry, other.registry)
        return GrassmannElement(
            registry,
            np.concatenate([self.masks, other.masks]),
            np.concatenate([self.coeffs, other.coeffs])
        )

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.registry, self.masks, -self.coeffs, canonical=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GrassmannElement):
            return multiply(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            return GrassmannElement(self.registry, self.masks, self.coeffs * complex(other))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return GrassmannElement(self.registry, self.masks, complex(other) * self.coeffs)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return GrassmannElement(self.registry, self.masks, self.coeffs / complex(other))
        return NotImplemented

    # --- inspection ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.masks)

    def __repr__(self) -> str:
        return f"GrassmannElement({render(self)})"

    __str__ = __repr__

    @property
    def terms(self) -> Dict[int, complex]:
        return {int(m): complex(c) for m, c in zip(self.masks, self.coeffs)}

    def is_zero(self) -> bool:
        return len(self.masks) == 0

    def scalar_part(self) -> complex:
        hit = np.nonzero(self.masks == 0)[0]
        return complex(self.coeffs[hit[0]]) if hit.size else 0j

    def coefficient(self, labels: Sequence[str]) -> complex:
        """Coefficient of the product of `labels` taken in the given order"""
        target = monomial(self.registry, labels)
        if target.is_zero():
            return 0j
        sign = target.coeffs[0].real
        return sign * self.terms.get(int(target.masks[0]), 0j)

    def support_mask(self) -> int:
        mask = 0
        for m in self.masks:
            mask |= int(m)
        return mask

    def generator_labels(self) -> List[str]:
        return self.registry.labels_of(self.support_mask())

    def parity(self) -> str:
        return parity(self)

    def even_part(self) -> "GrassmannElement":
        keep = mask_parity(self.masks) == 0
        return GrassmannElement(self.registry, self.masks[keep], self.coeffs[keep], canonical=True)

    def odd_part(self) -> "GrassmannElement":
        keep = mask_parity(self.masks) == 1
        return GrassmannElement(self.registry, self.masks[keep], self.coeffs[keep], canonical=True)

    def max_deviation(self, other: "GrassmannElement") -> float:
        """Largest coefficient difference against another element"""
        diff = self - other
        return float(np.max(np.abs(diff.coeffs))) if len(diff) else 0.0

    def rebind(self, registry: GeneratorRegistry) -> "GrassmannElement":
        """
        Move the element to a related registry

        Moving into an ancestor checks that no scoped generator survives.
        """
        if registry is self.registry or self.registry.is_ancestor_of(registry):
            return GrassmannElement(registry, self.masks, self.coeffs, canonical=True)
        if registry.is_ancestor_of(self.registry):
            leaked = self.support_mask() >> len(registry)
            if leaked:
                names = self.registry.labels_of(self.support_mask() & ~((1 << len(registry)) - 1))
                raise GeneratorLeakError(f"Element still depends on scoped generators {names}")
            return GrassmannElement(registry, self.masks, self.coeffs, canonical=True)
        raise RegistryMismatchError("Cannot rebind to an unrelated registry")

    def integrate(self, label: str) -> "GrassmannElement":
        return berezin_integrate(self, label)

    def involute(self) -> "GrassmannElement":
        return involute(self)

    def exp(self) -> "GrassmannElement":
        return exp_even(self)


def monomial(registry: GeneratorRegistry, labels: Sequence[str], coeff: Number = 1.0) -> GrassmannElement:
    """coeff times the ordered product of generators"""
    result = registry.scalar(coeff)
    for label in labels:
        result = result * registry.generator(label)
    return result


def multiply(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Product a·b with reordering signs folded into coefficients"""
    registry = common_registry(a.registry, b.registry)
    masks, coeffs = contract(",->", a.masks, a.coeffs, b.masks, b.coeffs)
    return GrassmannElement(registry, masks, coeffs, canonical=True)


def parity(x: GrassmannElement) -> str:
    bits = mask_parity(x.masks)
    if np.all(bits == 0):
        return "even"
    if np.all(bits == 1):
        return "odd"
    return "mixed"


def berezin_integrate(x: GrassmannElement, label: str) -> GrassmannElement:
    """
    Left Berezin integral ∫dg x

    The integration operator is odd: g is anticommuted to the front of each
    monomial and deleted; terms without g vanish.
    """
    masks, coeffs = integrate_array(x.masks, x.coeffs, x.registry.index(label))
    return GrassmannElement(x.registry, masks, coeffs, canonical=True)


def differentiate(x: GrassmannElement, label: str) -> GrassmannElement:
    """Left derivative d/dg x (same sign rule as berezin_integrate)"""
    masks, coeffs = integrate_array(x.masks, x.coeffs, x.registry.index(label))
    return GrassmannElement(x.registry, masks, coeffs, canonical=True)


def integrate_pairs(x: GrassmannElement, pairs: Sequence[Tuple[str, str]]) -> GrassmannElement:
    """
    ∫dψ̄₁dψ₁⋯dψ̄_Ndψ_N x, innermost differential first

    Args:
        x: Integrand
        pairs: (bar label, label) per mode in measure order
    """
    for bar_label, label in reversed(list(pairs)):
        x = berezin_integrate(x, label)
        x = berezin_integrate(x, bar_label)
    return x


def exp_even(x: GrassmannElement) -> GrassmannElement:
    """
    Exponential of an even element

    The scalar part s is factored out as exp(s); the nilpotent remainder is
    summed until its powers vanish.
    """
    if parity(x) != "even":
        raise ParityError(f"exp_even needs an even element, got {parity(x)} parity")
    s = x.scalar_part()
    nilpotent = x - s
    result = x.registry.scalar(1.0)
    term = result
    k = 1
    while True:
        term = term * nilpotent / k
        if term.is_zero():
            break
        result = result + term
        k += 1
    return result * np.exp(s)


def involute(x: GrassmannElement) -> GrassmannElement:
    """c·ψ₁⋯ψ_k -> c*·ψ̄_k⋯ψ̄₁ using the registry's declared pairs"""
    images, signs = involution_map(x.registry, x.masks)
    return GrassmannElement(x.registry, images, np.conj(x.coeffs) * signs)


# --- text format ------------------------------------------------------------------

_FLOAT = r"[+-](?:\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|inf|nan)"
_TERM = re.compile(rf"^\((?P<re>{_FLOAT})(?P<im>{_FLOAT})i\)(?P<labels>(?:·[^·\s]+)*)$")


def _format_real(value: float) -> str:
    text = repr(float(value))
    return text if text.startswith("-") else "+" + text


def render(x: GrassmannElement) -> str:
    """
    Canonical text form, e.g. "(+1.0+0.0i) + (-0.5+0.0i)·psibar_1·psi_1"

    Terms are listed by degree, then by generator order.
    """
    if x.is_zero():
        return "0"
    order = sorted(range(len(x.masks)), key=lambda j: (len(mask_indices(x.masks[j])), mask_indices(x.masks[j])))
    parts = []
    for j in order:
        c = x.coeffs[j]
        head = f"({_format_real(c.real)}{_format_real(c.imag)}i)"
        parts.append("·".join([head] + x.registry.labels_of(int(x.masks[j]))))
    return " + ".join(parts)


def parse(text: str, registry: GeneratorRegistry) -> GrassmannElement:
    """
    Parse the output of render back into an element

    Args:
        text: Rendered element
        registry: Registry holding every label used in the text

    Returns:
        GrassmannElement
    """
    text = text.strip()
    if text == "0":
        return registry.zero()
    result = registry.zero()
    for chunk in text.split(" + "):
        match = _TERM.match(chunk.strip())
        if match is None:
            raise GrassmannError(f"Cannot parse Grassmann term: {chunk!r}")
        coeff = complex(float(match.group("re")), float(match.group("im")))
        labels = [s for s in match.group("labels").split("·") if s]
        result = result + monomial(registry, labels, coeff)
    return result
