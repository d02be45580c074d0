"""
Explanation utilities: attach a short description of what a failed check
exercises, so a failing report points at the relation that broke.
"""
from typing import List

import pandas as pd

# check name fragment -> description
CHECK_CONTEXT = [
    ("associativity", "Grassmann product associativity; look at the sign merge of overlapping monomials"),
    ("graded-commutativity", "ab = (-1)^(|a||b|) ba; reordering signs or parity bookkeeping"),
    ("odd-nilpotency", "odd elements must square to zero"),
    ("gaussian-integral", "Berezin integration order and sign against det(A)"),
    ("exp-inverse", "exponential of even elements; series truncation or scalar factoring"),
    ("involution", "conjugation must reverse products and conjugate coefficients"),
    ("render-parse", "canonical text form must reproduce every coefficient"),
    ("overlap", "coherent-state overlap against exp(-psibar psi/2 ... + psibar'' psi')"),
    ("identity-resolution", "integral of |psi><psi| must give the identity"),
    ("normal-order-substitution", "normal-ordered operators act as G(psibar'', psi') between coherent states"),
    ("canonical-anticommutators", "Jordan-Wigner signs of the fermion ladder operators"),
    ("odd-state", "odd coherent states |thetabar) and their matrix elements"),
    ("projector-routes", "group average, spectral kernel and the (1-E) average must agree"),
    ("complement", "three-fermion projector should equal 1 - Phi"),
    ("classification", "closure fit of the constraint superalgebra"),
    ("kernel", "operator-side kernel against the closed form"),
    ("outer", "rank-one factorization of the odd-pair projector"),
    ("sec62", "nonlinear odd constraint: X spectrum, projector ranks, rescaling"),
    ("family", "diagonal odd family: anticommutators, product ranks, decomposition of 1"),
    ("even-replacement", "even averages of chi^dag chi must reproduce the odd-pair projectors"),
    ("bose-fermi", "multiplier quadrature against the truncated mode sum"),
    ("lattice", "slice kernels convolved over fresh generators against the closed form"),
    ("multiplier", "lattice kernel must not depend on the multiplier schedule"),
    ("trotter", "log-log slope of the normal-symbol lattice error"),
]


def describe_check(name: str) -> List[str]:
    return [text for fragment, text in CHECK_CONTEXT if fragment in name]


def generate_explanations(df: pd.DataFrame) -> List[str]:
    """Bullet lines for the failed rows of a report frame.

    Output: list of plain-text bullet strings (empty when nothing failed).
    """
    if df.empty:
        return []
    failed = df[~df['passed'].astype(bool)]
    lines: List[str] = []
    for _, row in failed.iterrows():
        context = describe_check(row['name'])
        reason = "; ".join(context) if context else "no description for this check"
        detail = f" ({row['detail']})" if row.get('detail') else ""
        lines.append(f"- {row['suite']}/{row['name']}: {reason}{detail}")
    return lines
