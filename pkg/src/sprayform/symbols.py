"""Exact symbol calculus for the metrizability systems, over the adapted frame.

In a frame (H_1..H_n, V_1..V_n) with the spray last among the horizontals and
V_i the vertical lift of H_i, the operators acting inside every symbol have
constant integer action:

    h(H_i) = H_i   h(V_i) = 0     J(H_i) = V_i   J(V_i) = 0
    S = H_n        C = V_n

so the entire order-2/order-3 symbol analysis is spray-independent integer
linear algebra.  This module builds those matrices, the obstruction-quotient
maps tau, and audits ranks, kernels, exact sequences and involutivity with
fraction-free (Bareiss) elimination -- no floating point, no tolerances.

Two systems are covered: ``P1`` couples the second-order metrizability
operator with the homogeneity operator; ``P2`` replaces the first with the
connection-contracted operator that absorbs the first integrability
condition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

OPERATORS = ("PC", "PS", "PGamma")
SYSTEMS = ("P1", "P2")


# -- symmetric tensor bases ------------------------------------------------


def sym_basis(k: int, n: int) -> list[tuple[int, ...]]:
    """Sorted index tuples enumerating a basis of S^k over the 2n-frame."""
    if k not in (1, 2, 3):
        raise ValueError(f"unsupported symmetric order {k}")
    return list(itertools.combinations_with_replacement(range(2 * n), k))


def sym_dim(k: int, n: int) -> int:
    return math.comb(2 * n + k - 1, k)


@dataclass
class IntMatrix:
    """Dense integer matrix with basis labels, plus exact rank arithmetic."""

    rows: list
    ncols: int
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    def rank(self) -> int:
        return bareiss_rank(self.rows, self.ncols)

    def kernel_dim(self) -> int:
        return self.ncols - self.rank()

    def stack(self, other: "IntMatrix") -> "IntMatrix":
        if other.ncols != self.ncols:
            raise ValueError("column mismatch in stack")
        return IntMatrix(
            [r[:] for r in self.rows] + [r[:] for r in other.rows],
            self.ncols,
            self.row_labels + other.row_labels,
            self.col_labels,
        )


def bareiss_rank(rows, ncols: int) -> int:
    """Rank by fraction-free Gaussian elimination; all divisions are exact."""
    m = [list(r) for r in rows if any(r)]
    nrows = len(m)
    r = 0
    prev = 1
    for c in range(ncols):
        piv = None
        for i in range(r, nrows):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        if piv != r:
            m[r], m[piv] = m[piv], m[r]
        pivot = m[r][c]
        row_r = m[r]
        # every row below is rescaled, even at mic = 0: the exactness of the
        # later divisions by `prev` depends on it
        for i in range(r + 1, nrows):
            row_i = m[i]
            mic = row_i[c]
            for j in range(c + 1, ncols):
                row_i[j] = (row_i[j] * pivot - mic * row_r[j]) // prev
            row_i[c] = 0
        prev = pivot
        r += 1
        if r == nrows:
            break
    return r


def det_sign_nonzero(mat) -> bool:
    """Exact nonsingularity test for a square integer matrix."""
    size = len(mat)
    return bareiss_rank(mat, size) == size


# -- frame vectors and multilinear rows --------------------------------------
#
# A frame vector is a length-2n integer coefficient list; indices 0..n-1 are
# horizontal (H_1..H_n), n..2n-1 vertical (V_1..V_n).


def frame_unit(i: int, n: int) -> list[int]:
    v = [0] * (2 * n)
    v[i] = 1
    return v


def spray_index(n: int) -> int:
    return n - 1


def liouville_index(n: int) -> int:
    return 2 * n - 1


def act_h(vec, n):
    return vec[:n] + [0] * n


def act_J(vec, n):
    return [0] * n + vec[:n]


def _sym_row(vectors, k: int, n: int, basis_index) -> list[int]:
    """Row of A |-> A(v_1, ..., v_k) over the sorted-tuple coordinates of S^k."""
    row = [0] * sym_dim(k, n)
    dim = 2 * n
    supports = [[(i, c) for i, c in enumerate(v) if c] for v in vectors]
    for combo in itertools.product(*supports):
        coeff = 1
        idx = []
        for i, c in combo:
            coeff *= c
            idx.append(i)
        row[basis_index[tuple(sorted(idx))]] += coeff
    return row


def _basis_index(k, n):
    return {t: i for i, t in enumerate(sym_basis(k, n))}


# -- symbol matrices ----------------------------------------------------------


def _frame(n):
    return [frame_unit(i, n) for i in range(2 * n)]


def symbol_matrix(op: str, k: int, n: int) -> IntMatrix:
    """Exact matrix of the order-k symbol of one operator over sym_basis(k, n).

    Row sets per (op, k): the homogeneity operator contracts the last slot
    with C at every order; the metrizability operator compares the
    (S, J .)-contraction against the C-contraction; the connection-contracted
    operator antisymmetrizes the (h ., J .) pair, with values in semi-basic
    2-forms (rows over horizontal index pairs i < j).
    """
    if op not in OPERATORS:
        raise ValueError(f"unknown operator {op!r}")
    bi = _basis_index(k, n)
    frame = _frame(n)
    S = frame[spray_index(n)]
    C = frame[liouville_index(n)]
    rows, labels = [], []

    def sub(vs_plus, vs_minus=None, scale=1):
        row = _sym_row(vs_plus, k, n, bi)
        if vs_minus is not None:
            neg = _sym_row(vs_minus, k, n, bi)
            row = [a - b for a, b in zip(row, neg)]
        if scale != 1:
            row = [scale * a for a in row]
        return row

    if (op, k) == ("PC", 1):
        rows.append(sub([C]))
        labels.append("A(C)")
    elif (op, k) == ("PC", 2):
        for a, X in enumerate(frame):
            rows.append(sub([X, C]))
            labels.append(f"A(e{a},C)")
    elif (op, k) == ("PC", 3):
        for a, X in enumerate(frame):
            for b, Y in enumerate(frame):
                rows.append(sub([X, Y, C]))
                labels.append(f"A(e{a},e{b},C)")
    elif (op, k) == ("PS", 2):
        for a, X in enumerate(frame):
            rows.append(sub([S, act_J(X, n)], [X, C]))
            labels.append(f"A(S,Je{a})-A(e{a},C)")
    elif (op, k) == ("PS", 3):
        for a, X in enumerate(frame):
            for b, Y in enumerate(frame):
                rows.append(sub([X, S, act_J(Y, n)], [X, Y, C]))
                labels.append(f"A(e{a},S,Je{b})-A(e{a},e{b},C)")
    elif (op, k) == ("PGamma", 2):
        for i in range(n):
            for j in range(i + 1, n):
                rows.append(sub([act_h(frame[i], n), act_J(frame[j], n)],
                                [act_h(frame[j], n), act_J(frame[i], n)], scale=2))
                labels.append(f"2(A(h{i},Jh{j})-A(h{j},Jh{i}))")
    elif (op, k) == ("PGamma", 3):
        for a, X in enumerate(frame):
            for i in range(n):
                for j in range(i + 1, n):
                    rows.append(sub([X, act_h(frame[i], n), act_J(frame[j], n)],
                                    [X, act_h(frame[j], n), act_J(frame[i], n)],
                                    scale=2))
                    labels.append(f"2(A(e{a},h{i},Jh{j})-A(e{a},h{j},Jh{i}))")
    else:
        raise ValueError(f"symbol of {op} at order {k} is not defined")
    return IntMatrix(rows, sym_dim(k, n), labels,
                     [str(t) for t in sym_basis(k, n)])


def _pc3_symmetric(n: int) -> IntMatrix:
    """The order-3 homogeneity symbol with S^2-coordinate rows (sorted pairs).

    Same map as symbol_matrix('PC', 3, n) minus duplicate rows; this is the
    coordinate form needed to compose with tau, whose domain carries the
    symmetric factor once.
    """
    bi = _basis_index(3, n)
    frame = _frame(n)
    C = frame[liouville_index(n)]
    rows, labels = [], []
    for a, b in sym_basis(2, n):
        rows.append(_sym_row([frame[a], frame[b], C], 3, n, bi))
        labels.append(f"A(e{a},e{b},C)")
    return IntMatrix(rows, sym_dim(3, n), labels,
                     [str(t) for t in sym_basis(3, n)])


def system_symbol(sys: str, k: int, n: int) -> IntMatrix:
    """Stacked symbol of a system at order k (k = 2 or 3).

    At order 3 the homogeneity block uses the symmetric-coordinate rows so
    the codomain matches the domain of ``tau_matrix`` coordinate for
    coordinate (duplicate rows would not change ranks or kernels, but they
    would break the composition bookkeeping).
    """
    if sys == "P1":
        first = "PS"
    elif sys == "P2":
        first = "PGamma"
    else:
        raise ValueError(f"unknown system {sys!r}")
    if k == 2:
        return symbol_matrix(first, 2, n).stack(symbol_matrix("PC", 2, n))
    if k == 3:
        return symbol_matrix(first, 3, n).stack(_pc3_symmetric(n))
    raise ValueError(f"system symbol undefined at order {k}")


# -- tau: the obstruction-quotient maps ---------------------------------------
#
# Domain coordinates: for P1, B_S over ordered frame pairs (a,b) followed by
# B_C over sorted pairs; for P2, B_Gamma over (frame vector; horizontal pair
# i<j) followed by B_C over sorted pairs.


class _TauBuilder:
    def __init__(self, sys, n):
        self.sys = sys
        self.n = n
        dim = 2 * n
        self.pairs2 = sym_basis(2, n)
        self.pair_index = {t: i for i, t in enumerate(self.pairs2)}
        if sys == "P1":
            self.first_cols = dim * dim
            self.col_labels = [f"BS({a},{b})" for a in range(dim) for b in range(dim)]
        else:
            self.hpairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            self.hpair_index = {t: i for i, t in enumerate(self.hpairs)}
            self.first_cols = dim * len(self.hpairs)
            self.col_labels = [f"BG({a};{i}<{j})" for a in range(dim)
                               for i, j in self.hpairs]
        self.col_labels += [f"BC{t}" for t in self.pairs2]
        self.ncols = self.first_cols + len(self.pairs2)

    def new_row(self):
        return [0] * self.ncols

    def add_BS(self, row, u, v, coeff=1):
        """B_S(u, v): u, v frame coefficient vectors; ordered-pair coordinates."""
        dim = 2 * self.n
        for a, ca in enumerate(u):
            if not ca:
                continue
            for b, cb in enumerate(v):
                if cb:
                    row[a * dim + b] += coeff * ca * cb


    def add_BC(self, row, u, v, coeff=1):
        for a, ca in enumerate(u):
            if not ca:
                continue
            for b, cb in enumerate(v):
                if cb:
                    row[self.first_cols + self.pair_index[tuple(sorted((a, b)))]] \
                        += coeff * ca * cb

    def add_BGamma(self, row, w, u, v, coeff=1):
        """B_Gamma(w; u, v): semi-basic skew in (u, v)."""
        npairs = len(self.hpairs)
        for a, ca in enumerate(w):
            if not ca:
                continue
            for i, ci in enumerate(u[: self.n]):
                if not ci:
                    continue
                for j, cj in enumerate(v[: self.n]):
                    if not cj or i == j:
                        continue
                    sign = 1 if i < j else -1
                    col = a * npairs + self.hpair_index[(min(i, j), max(i, j))]
                    row[col] += coeff * ca * ci * cj * sign


def tau_matrix(sys: str, n: int) -> IntMatrix:
    """Exact matrix of the quotient map whose kernel is the image of sigma_3.

    Rows are enumerated over strictly increasing frame tuples for the
    alternating components and over all ordered tuples otherwise; identical
    or sign-flipped duplicates are thereby dropped without changing the
    kernel.  The one fractional coefficient (the half in the C-slot row of
    the P2 map) is cleared by scaling that row by two.
    """
    if sys not in SYSTEMS:
        raise ValueError(f"unknown system {sys!r}")
    b = _TauBuilder(sys, n)
    frame = _frame(n)
    S = frame[spray_index(n)]
    C = frame[liouville_index(n)]
    rows, labels = [], []

    if sys == "P1":
        # tau^1_S (alternating in X, Y)
        for a in range(2 * n):
            for c in range(a + 1, 2 * n):
                X, Y = frame[a], frame[c]
                row = b.new_row()
                b.add_BS(row, act_J(X, n), act_h(Y, n), 1)
                b.add_BS(row, act_h(Y, n), act_J(X, n), -1)
                b.add_BS(row, act_J(Y, n), act_h(X, n), -1)
                b.add_BS(row, act_h(X, n), act_J(Y, n), 1)
                rows.append(row)
                labels.append(f"tauS1({a},{c})")
        # tau^2_S
        for a in range(2 * n):
            row = b.new_row()
            b.add_BS(row, frame[a], S, 1)
            rows.append(row)
            labels.append(f"tauS2({a})")
        # tau^1_SC over ordered pairs
        for a in range(2 * n):
            for c in range(2 * n):
                X, Y = frame[a], frame[c]
                row = b.new_row()
                b.add_BS(row, X, act_J(Y, n), 1)
                b.add_BC(row, X, act_J(Y, n), 1)
                rows.append(row)
                labels.append(f"tauSC1({a},{c})")
        # tau^2_SC depends on X only
        for a in range(2 * n):
            X = frame[a]
            row = b.new_row()
            b.add_BS(row, C, act_h(X, n), 1)
            b.add_BC(row, S, act_J(X, n), -1)
            b.add_BC(row, act_h(X, n), C, 1)
            rows.append(row)
            labels.append(f"tauSC2({a})")
    else:
        # tau^1_Gamma and tau^2_Gamma (alternating in X, Y, Z)
        for a, c, d in itertools.combinations(range(2 * n), 3):
            X, Y, Z = frame[a], frame[c], frame[d]
            row = b.new_row()
            b.add_BGamma(row, act_h(X, n), Y, Z, 1)
            b.add_BGamma(row, act_h(Y, n), Z, X, 1)
            b.add_BGamma(row, act_h(Z, n), X, Y, 1)
            rows.append(row)
            labels.append(f"tauG1({a},{c},{d})")
        for a, c, d in itertools.combinations(range(2 * n), 3):
            X, Y, Z = frame[a], frame[c], frame[d]
            row = b.new_row()
            b.add_BGamma(row, act_J(X, n), Y, Z, 1)
            b.add_BGamma(row, act_J(Y, n), Z, X, 1)
            b.add_BGamma(row, act_J(Z, n), X, Y, 1)
            rows.append(row)
            labels.append(f"tauG2({a},{c},{d})")
        # tau_GammaC (alternating in X, Y), row scaled by 2
        for a in range(2 * n):
            for c in range(a + 1, 2 * n):
                X, Y = frame[a], frame[c]
                row = b.new_row()
                b.add_BGamma(row, C, X, Y, 1)
                b.add_BC(row, act_h(X, n), act_J(Y, n), -2)
                b.add_BC(row, act_h(Y, n), act_J(X, n), 2)
                rows.append(row)
                labels.append(f"tauGC({a},{c})")
    return IntMatrix(rows, b.ncols, labels, b.col_labels)


# -- closed forms --------------------------------------------------------------


def g2_dim_formula(sys: str, n: int) -> int:
    if sys == "P1":
        return n * n + (n - 1) ** 2
    return n * (n + 1) // 2 + n * (n - 1)


def g3_dim_formula(sys: str, n: int) -> int:
    if sys == "P1":
        return (8 * n ** 3 - 9 * n ** 2 + 7 * n) // 6
    return (4 * n ** 3 + 3 * n ** 2 - n) // 6


def rank_sigma3_formula(sys: str, n: int) -> int:
    if sys == "P1":
        return (7 * n ** 2 - n) // 2
    return (4 * n ** 3 + 9 * n ** 2 + 5 * n) // 6


def restricted_dim_formula(sys: str, n: int, k: int) -> int:
    """Printed closed form for dim g2 restricted by the first k flag vectors.

    The P1 branch for k > n is reproduced as printed even though it turns
    positive again for large k, contradicting the nesting of the restricted
    spaces; ``involutivity_audit`` compares it against the exact computation
    and flags the disagreements instead of guessing a correction.
    """
    if sys == "P1":
        if k <= n:
            return ((n - k) * (n - k + 1)) // 2 + (n - k) * (n - 1) \
                + ((n - 2) * (n - 1)) // 2
        return ((n - 2 - k) * (n - k - 1)) // 2
    if k <= n:
        return ((n - k + 1) * (n - k)) // 2 + (n - 1) * (n - k)
    return 0


# -- exactness, flags, involutivity --------------------------------------------


@dataclass
class ExactnessReport:
    system: str
    n: int
    composition_zero: bool
    rank_sigma3: int
    ker_tau: int
    exact: bool


def _compose(tau: IntMatrix, sigma: IntMatrix) -> list:
    """tau @ sigma with sparse row traversal (entries are mostly zero)."""
    out = []
    for trow in tau.rows:
        acc = [0] * sigma.ncols
        for j, tv in enumerate(trow):
            if tv == 0:
                continue
            srow = sigma.rows[j]
            for c, sv in enumerate(srow):
                if sv:
                    acc[c] += tv * sv
        out.append(acc)
    return out


def exactness_check(sys: str, n: int) -> ExactnessReport:
    """Verify tau . sigma_3 = 0 and rank sigma_3 = dim Ker tau, exactly."""
    sigma = system_symbol(sys, 3, n)
    tau = tau_matrix(sys, n)
    if tau.ncols != sigma.nrows:
        raise AssertionError("tau domain does not match sigma_3 codomain")
    product = _compose(tau, sigma)
    comp_zero = all(all(v == 0 for v in row) for row in product)
    rank = sigma.rank()
    ker = tau.kernel_dim()
    return ExactnessReport(sys, n, comp_zero, rank, ker,
                           comp_zero and rank == ker)


def flag_basis(sys: str, n: int) -> list:
    """The designated quasi-regular flag for each system.

    P1: (H_1, .., H_{n-1}, H_n + V_1 + .. + V_n, V_1, .., V_n).
    P2: the same tail, but H_i + i V_i in the i-th horizontal slot.
    """
    basis = []
    for i in range(n - 1):
        v = frame_unit(i, n)
        if sys == "P2":
            v[n + i] = i + 1
        basis.append(v)
    en = frame_unit(n - 1, n)
    for i in range(n):
        en[n + i] += 1
    basis.append(en)
    for i in range(n):
        basis.append(frame_unit(n + i, n))
    return basis


def restricted_kernel_dims(sys: str, basis, n: int) -> list[int]:
    """[dim g2, dim g2_{e1}, ..., dim g2_{e1..e_{2n}}] for one flag basis.

    Each contraction i_e A = 0 contributes 2n rows A(e, frame_b) over the
    S^2 coordinates; dimensions are exact kernel counts of the growing stack.
    """
    if len(basis) != 2 * n or not det_sign_nonzero([list(v) for v in basis]):
        raise ValueError("flag basis must be 2n linearly independent vectors")
    bi = _basis_index(2, n)
    frame = _frame(n)
    stack = system_symbol(sys, 2, n)
    rows = [r[:] for r in stack.rows]
    dims = [IntMatrix(rows, stack.ncols).kernel_dim()]
    for e in basis:
        for fb in frame:
            rows.append(_sym_row([list(e), fb], 2, n, bi))
        dims.append(IntMatrix(rows, stack.ncols).kernel_dim())
    return dims


@dataclass
class InvolutivityReport:
    system: str
    n: int
    g2: int
    g3: int
    restricted: list
    flag_sum: int
    quasi_regular: bool
    g2_formula: int
    g3_formula: int
    restricted_formula: list
    printed_branch_mismatches: list

    @property
    def formulas_match(self) -> bool:
        return self.g2 == self.g2_formula and self.g3 == self.g3_formula


def involutivity_audit(sys: str, n: int) -> InvolutivityReport:
    """Cartan test of the designated flag: does the restricted tower fill g3?

    All dimensions are computed exactly; the closed-form branch values are
    reported alongside, with any disagreement listed (the printed P1 branch
    for k > n disagrees by construction, see restricted_dim_formula).
    """
    basis = flag_basis(sys, n)
    dims = restricted_kernel_dims(sys, basis, n)
    g2 = dims[0]
    restricted = dims[1:]
    g3 = system_symbol(sys, 3, n).kernel_dim()
    flag_sum = g2 + sum(restricted)
    formula = [restricted_dim_formula(sys, n, k) for k in range(1, 2 * n + 1)]
    mismatches = [
        {"k": k + 1, "exact": restricted[k], "printed": formula[k]}
        for k in range(2 * n)
        if restricted[k] != formula[k]
    ]
    return InvolutivityReport(
        sys, n, g2, g3, restricted, flag_sum,
        quasi_regular=(flag_sum == g3),
        g2_formula=g2_dim_formula(sys, n),
        g3_formula=g3_dim_formula(sys, n),
        restricted_formula=formula,
        printed_branch_mismatches=mismatches,
    )
