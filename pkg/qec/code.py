"""
Toric codes as hypergraph products of cyclic repetition codes.

Qubits sit on lattice edges. Qubit (axis a, coords (i, j, k)) has index
a*L**3 + i*L**2 + j*L + k in 3D and a*L**2 + i*L + j in 2D; coordinate i is
acted on by c_x = H_c(L) (x) I (x) I, j by c_y and k by c_z.

Face checks are Z-type (they flag X errors), vertex checks are X-type (they
flag Z errors). Syndromes list face bits first, vertex bits last.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from qec.gf2 import BitMatrix, BitVector, dense_mod2_product, kron

AXIS_NAMES = ("ab", "or", "ap")  # abscissa, ordinate, applicate

# Expected row weights per dimension: (face, vertex)
_ROW_WEIGHTS = {2: (4, 4), 3: (4, 6)}
# Expected column weights per dimension: (face, vertex)
_COL_WEIGHTS = {2: (2, 2), 3: (4, 2)}


class CodeError(ValueError):
    pass


def repetition_check(L: int) -> BitMatrix:
    """Cyclic repetition code check matrix, H[i, j] = d(i, j) + d(i, (j + 1) mod L)."""
    if L < 2:
        raise CodeError(f"repetition code needs L >= 2, got {L}")
    h = np.zeros((L, L), dtype=np.uint8)
    for i in range(L):
        for j in range(L):
            h[i, j] = (i == j) + (i == (j + 1) % L)
    return BitMatrix.from_array(h)


@dataclass(frozen=True)
class LogicalSet:
    """Canonical logical representatives, one X/Z pair per lattice axis.

    Z-type logicals are strings along their axis (weight L); X-type logicals
    are the membranes of qubits on that axis with the axis coordinate 0
    (weight L**(dim-1)). X_s and Z_t overlap on exactly one qubit when s == t.
    """

    z_logicals: tuple[BitVector, ...]
    x_logicals: tuple[BitVector, ...]

    @property
    def names(self) -> tuple[str, ...]:
        axes = AXIS_NAMES[: len(self.x_logicals)]
        return tuple(f"X_{a}" for a in axes) + tuple(f"Z_{a}" for a in axes)

    def x_matrix(self) -> np.ndarray:
        return np.stack([v.to_array() for v in self.x_logicals])

    def z_matrix(self) -> np.ndarray:
        return np.stack([v.to_array() for v in self.z_logicals])

    def pairing(self) -> np.ndarray:
        """|supp(X_s) & supp(Z_t)| mod 2 for every (s, t)."""
        return dense_mod2_product(self.x_matrix(), self.z_matrix().T)


@dataclass(frozen=True)
class ToricCode:
    L: int
    dim: int
    face_checks: BitMatrix
    vertex_checks: BitMatrix

    @functools.cached_property
    def logicals(self) -> LogicalSet:
        return build_logicals(self)

    @property
    def n_qubits(self) -> int:
        return self.dim * self.L**self.dim

    @property
    def n_sites(self) -> int:
        return self.L**self.dim

    @property
    def n_face_checks(self) -> int:
        return self.face_checks.rows

    @property
    def n_checks(self) -> int:
        return self.face_checks.rows + self.vertex_checks.rows

    @property
    def n_channels(self) -> int:
        """Syndrome channels: one per face-check block plus the vertex block."""
        return self.n_checks // self.n_sites

    @property
    def n_logicals(self) -> int:
        return 2 * self.dim

    @property
    def n_classes(self) -> int:
        return 2**self.n_logicals

    @property
    def lattice_shape(self) -> tuple[int, ...]:
        return (self.L,) * self.dim

    @functools.cached_property
    def dense_face_checks(self) -> np.ndarray:
        return self.face_checks.to_array()

    @functools.cached_property
    def dense_vertex_checks(self) -> np.ndarray:
        return self.vertex_checks.to_array()

    @functools.cached_property
    def label_matrix(self) -> np.ndarray:
        """(n_logicals, 2 n_qubits) map from [x | z] error bits to label bits.

        The first ``dim`` rows read the z part against the X logicals, the
        last ``dim`` rows read the x part against the Z logicals.
        """
        n = self.n_qubits
        m = np.zeros((self.n_logicals, 2 * n), dtype=np.uint8)
        m[: self.dim, n:] = self.logicals.x_matrix()
        m[self.dim:, :n] = self.logicals.z_matrix()
        return m


def qubit_index(L: int, axis: int, coords: tuple[int, ...]) -> int:
    index = axis
    for c in coords:
        index = index * L + (c % L)
    return index


def _axis_factors(L: int, dim: int) -> list[BitMatrix]:
    h = repetition_check(L)
    eye = BitMatrix.identity(L)
    factors = []
    for axis in range(dim):
        m = h if axis == 0 else eye
        for other in range(1, dim):
            m = kron(m, h if other == axis else eye)
        factors.append(m)
    return factors


@functools.lru_cache(maxsize=16)
def build_toric(L: int, dim: int = 3) -> ToricCode:
    if dim not in _ROW_WEIGHTS:
        raise CodeError(f"unsupported dimension {dim}; expected 2 or 3")
    if L < 2:
        raise CodeError(f"lattice size must be >= 2, got {L}")

    if dim == 3:
        c_x, c_y, c_z = _axis_factors(L, 3)
        faces = BitMatrix.block([
            [c_y, c_x, None],
            [None, c_z, c_y],
            [c_z, None, c_x],
        ])
        vertices = BitMatrix.block([[c_x.T, c_y.T, c_z.T]])
    else:
        c_x, c_y = _axis_factors(L, 2)
        faces = BitMatrix.block([[c_y, c_x]])
        vertices = BitMatrix.block([[c_x.T, c_y.T]])

    return ToricCode(
        L=L,
        dim=dim,
        face_checks=faces,
        vertex_checks=vertices,
    )


def build_logicals(code: ToricCode) -> LogicalSet:
    L, dim = code.L, code.dim
    n = dim * L**dim
    sites = np.indices((L,) * dim).reshape(dim, -1).T
    z_logicals, x_logicals = [], []
    for axis in range(dim):
        transverse = [a for a in range(dim) if a != axis]
        on_string = np.all(sites[:, transverse] == 0, axis=1)
        on_membrane = sites[:, axis] == 0
        z_logicals.append(BitVector.from_support(
            n, [qubit_index(L, axis, tuple(s)) for s in sites[on_string]]
        ))
        x_logicals.append(BitVector.from_support(
            n, [qubit_index(L, axis, tuple(s)) for s in sites[on_membrane]]
        ))
    return LogicalSet(z_logicals=tuple(z_logicals), x_logicals=tuple(x_logicals))


# ── validation ────────────────────────────────────────────────────────────────

@dataclass
class ValidationReport:
    L: int
    dim: int
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def first_failure(self) -> str | None:
        return self.failures[0] if self.failures else None


def validate(code: ToricCode) -> ValidationReport:
    """Check every structural identity of ``code``; failures are collected, not raised."""
    report = ValidationReport(L=code.L, dim=code.dim)
    faces = code.face_checks.to_array()
    vertices = code.vertex_checks.to_array()
    n, sites = code.n_qubits, code.n_sites
    face_w, vertex_w = _ROW_WEIGHTS[code.dim]
    face_cw, vertex_cw = _COL_WEIGHTS[code.dim]

    expected_faces = (3 if code.dim == 3 else 1) * sites
    if faces.shape != (expected_faces, n):
        report.failures.append(f"face block has shape {faces.shape}, expected {(expected_faces, n)}")
    if vertices.shape != (sites, n):
        report.failures.append(f"vertex block has shape {vertices.shape}, expected {(sites, n)}")

    if dense_mod2_product(vertices, faces.T).any():
        report.failures.append("CSS condition violated: vertex_checks @ face_checks.T != 0")

    for name, block, row_w, col_w in (
        ("face", faces, face_w, face_cw),
        ("vertex", vertices, vertex_w, vertex_cw),
    ):
        bad_rows = np.flatnonzero(block.sum(axis=1) != row_w)
        if bad_rows.size:
            report.failures.append(f"{name} check row {int(bad_rows[0])} does not have weight {row_w}")
        bad_cols = np.flatnonzero(block.sum(axis=0) != col_w)
        if bad_cols.size:
            report.failures.append(f"qubit {int(bad_cols[0])} is not in exactly {col_w} {name} checks")

    x_log = code.logicals.x_matrix()
    z_log = code.logicals.z_matrix()
    if dense_mod2_product(faces, x_log.T).any():
        report.failures.append("an X logical anticommutes with a face check")
    if dense_mod2_product(vertices, z_log.T).any():
        report.failures.append("a Z logical anticommutes with a vertex check")
    if not np.array_equal(code.logicals.pairing(), np.eye(code.dim, dtype=np.uint8)):
        report.failures.append("logical pairing matrix is not the identity")

    return report
