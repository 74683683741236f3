"""Model types, simulation, kernel evaluation, and membership checks.

The central object is a deep linear state-space model with diagonal state
matrices: scalar input x(t) and output y(t) related by

    h_1(t) = A_1 h_1(t-1) + B_1 x(t)
    h_i(t) = A_i h_i(t-1) + B_i h_{i-1}(t),   i = 2..l
    y(t)   = C^T h_l(t)

with every state zero before t = 0 and no conjugation in the read-out.
Because the map x -> y is linear and time invariant, the model is fully
described by its convolution kernel rho with y = rho * x, and rho(t) is
the response to the unit impulse at t = 0.  Two kernel paths are provided:
:func:`kernel_by_simulation` runs the recurrence above on the impulse,
while :func:`kernel_closed_form` sums, over all index paths through the
layers, the path weight times a complete homogeneous sum of the visited
eigenvalues.  The two must agree to rounding; tests lean on that.

Complex scalars serialize as ``[re, im]`` pairs and matrices row-major,
so JSON round-trips are bit-for-bit (Python emits shortest round-trip
decimal reprs).
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    ShapeMismatch,
    StabilityWarning,
    UnstableModel,
    WidthMismatch,
)
from .symfun import extend_homogeneous

__all__ = [
    "DEFAULT_HORIZON",
    "LayerParams",
    "DeepLinearSSM",
    "ShallowRealization",
    "ConvolutionKernel",
    "DenseSSM",
    "DenseDeepSSM",
    "MembershipReport",
    "simulate",
    "kernel_by_simulation",
    "kernel_closed_form",
    "convolve",
    "check_membership",
    "parameter_norm",
    "model_to_json_dict",
    "model_from_json_dict",
    "save_model",
    "load_model",
    "dense_to_json_dict",
    "dense_from_json_dict",
    "save_dense",
    "load_dense",
    "kernel_csv_text",
    "parse_kernel_csv",
    "save_kernel_csv",
    "load_kernel_csv",
    "atomic_write_text",
]

#: Default truncation horizon for kernels; long enough that stable spectra
#: have decayed well below working precision at typical moduli.
DEFAULT_HORIZON = 64


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise DomainError("model parameters must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LayerParams:
    """One layer: diagonal state matrix plus dense input map.

    ``state_diag`` holds the diagonal of the state matrix; ``input_matrix``
    is ``(m, 1)`` for the first layer (it multiplies the scalar input) and
    ``(m, m)`` for deeper layers (it multiplies the previous layer's state).
    """

    state_diag: np.ndarray
    input_matrix: np.ndarray

    def __post_init__(self):
        diag = _freeze(np.atleast_1d(self.state_diag))
        if diag.ndim != 1:
            raise ShapeMismatch(f"state_diag must be a vector, got shape {diag.shape}")
        mat = np.asarray(self.input_matrix)
        if mat.ndim == 1:
            mat = mat[:, None]
        mat = _freeze(mat)
        if mat.ndim != 2:
            raise ShapeMismatch(
                f"input_matrix must be two-dimensional, got shape {mat.shape}"
            )
        if mat.shape[0] != diag.size:
            raise WidthMismatch(
                f"input_matrix has {mat.shape[0]} rows for width {diag.size}"
            )
        object.__setattr__(self, "state_diag", diag)
        object.__setattr__(self, "input_matrix", mat)

    @property
    def width(self) -> int:
        return self.state_diag.size


@dataclass(frozen=True)
class DeepLinearSSM:
    """Stack of diagonal-state layers with a shared width and one read-out."""

    layers: tuple[LayerParams, ...]
    read_out: np.ndarray

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeMismatch("a model needs at least one layer")
        m = layers[0].width
        if layers[0].input_matrix.shape[1] != 1:
            raise ShapeMismatch(
                "first layer input_matrix must have one column, got "
                f"{layers[0].input_matrix.shape}"
            )
        for i, layer in enumerate(layers[1:], start=2):
            if layer.width != m:
                raise WidthMismatch(
                    f"layer {i} has width {layer.width}, expected {m}"
                )
            if layer.input_matrix.shape != (m, m):
                raise WidthMismatch(
                    f"layer {i} input_matrix has shape {layer.input_matrix.shape}, "
                    f"expected ({m}, {m})"
                )
        out = _freeze(np.atleast_1d(self.read_out))
        if out.ndim != 1 or out.size != m:
            raise WidthMismatch(
                f"read_out has shape {out.shape}, expected ({m},)"
            )
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "read_out", out)

    @property
    def width(self) -> int:
        return self.layers[0].width

    @property
    def depth(self) -> int:
        return len(self.layers)

    def spectral_radius(self) -> float:
        return max(float(np.max(np.abs(layer.state_diag))) for layer in self.layers)

    def constrained_parameters(self):
        """Yield ``(name, array)`` for every norm-constrained parameter block."""
        yield "B1", self.layers[0].input_matrix
        for i, layer in enumerate(self.layers[1:], start=2):
            yield f"B{i}", layer.input_matrix
        yield "C", self.read_out


@dataclass(frozen=True)
class ShallowRealization:
    """Width-K single recurrence in modal form: kernel(t) = sum c_i b_i s_i^t."""

    eigenvalues: np.ndarray
    read_in: np.ndarray
    read_out: np.ndarray

    def __post_init__(self):
        eig = _freeze(np.atleast_1d(self.eigenvalues))
        bin_ = _freeze(np.atleast_1d(self.read_in))
        bout = _freeze(np.atleast_1d(self.read_out))
        if eig.ndim != 1:
            raise ShapeMismatch("eigenvalues must be a vector")
        if bin_.shape != eig.shape or bout.shape != eig.shape:
            raise WidthMismatch(
                "eigenvalues, read_in and read_out must share one length, got "
                f"{eig.shape}, {bin_.shape}, {bout.shape}"
            )
        object.__setattr__(self, "eigenvalues", eig)
        object.__setattr__(self, "read_in", bin_)
        object.__setattr__(self, "read_out", bout)

    @property
    def mode_count(self) -> int:
        return self.eigenvalues.size

    def weights(self) -> np.ndarray:
        """Per-mode kernel weights ``read_in * read_out``."""
        return np.asarray(self.read_in * self.read_out)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def kernel(self, horizon: int = DEFAULT_HORIZON) -> "ConvolutionKernel":
        ts = np.arange(_checked_horizon(horizon))
        taps = (self.eigenvalues[:, None] ** ts[None, :] * self.weights()[:, None]).sum(axis=0)
        return ConvolutionKernel(taps)

    def as_model(self) -> DeepLinearSSM:
        """Equivalent one-layer :class:`DeepLinearSSM`."""
        layer = LayerParams(self.eigenvalues, self.read_in[:, None])
        return DeepLinearSSM((layer,), self.read_out)

    @classmethod
    def from_model(cls, model: DeepLinearSSM) -> "ShallowRealization":
        if model.depth != 1:
            raise ShapeMismatch(
                f"expected a one-layer model, got depth {model.depth}"
            )
        layer = model.layers[0]
        return cls(layer.state_diag, layer.input_matrix[:, 0], model.read_out)


@dataclass(frozen=True)
class ConvolutionKernel:
    """Causal kernel taps rho(0..T-1) of a linear time-invariant map."""

    taps: np.ndarray

    def __post_init__(self):
        taps = _freeze(np.atleast_1d(self.taps))
        if taps.ndim != 1 or taps.size == 0:
            raise ShapeMismatch(f"taps must be a non-empty vector, got {taps.shape}")
        object.__setattr__(self, "taps", taps)

    @property
    def horizon(self) -> int:
        return self.taps.size


@dataclass(frozen=True)
class DenseSSM:
    """One-layer recurrence with a general (dense) state matrix."""

    state_matrix: np.ndarray
    read_in: np.ndarray
    read_out: np.ndarray

    def __post_init__(self):
        mat = _freeze(np.atleast_2d(self.state_matrix))
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ShapeMismatch(f"state_matrix must be square, got {mat.shape}")
        bin_ = np.asarray(self.read_in)
        if bin_.ndim == 2 and bin_.shape[1] == 1:
            bin_ = bin_[:, 0]
        bin_ = _freeze(np.atleast_1d(bin_))
        bout = _freeze(np.atleast_1d(self.read_out))
        n = mat.shape[0]
        if bin_.shape != (n,) or bout.shape != (n,):
            raise WidthMismatch(
                f"read_in/read_out must have shape ({n},), got "
                f"{bin_.shape} and {bout.shape}"
            )
        object.__setattr__(self, "state_matrix", mat)
        object.__setattr__(self, "read_in", bin_)
        object.__setattr__(self, "read_out", bout)

    @property
    def width(self) -> int:
        return self.state_matrix.shape[0]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.state_matrix))))

    def kernel(self, horizon: int = DEFAULT_HORIZON) -> ConvolutionKernel:
        """Taps ``read_out^T A^t read_in`` by repeated application of A."""
        horizon = _checked_horizon(horizon)
        taps = np.empty(horizon, dtype=complex)
        vec = self.read_in.copy()
        for t in range(horizon):
            taps[t] = self.read_out @ vec
            vec = self.state_matrix @ vec
        return ConvolutionKernel(taps)


@dataclass(frozen=True)
class DenseDeepSSM:
    """Layer stack like :class:`DeepLinearSSM` but with dense state matrices."""

    state_matrices: tuple[np.ndarray, ...]
    input_matrices: tuple[np.ndarray, ...]
    read_out: np.ndarray

    def __post_init__(self):
        states = tuple(_freeze(np.atleast_2d(a)) for a in self.state_matrices)
        inputs = []
        for mat in self.input_matrices:
            arr = np.asarray(mat)
            if arr.ndim == 1:
                arr = arr[:, None]
            inputs.append(_freeze(arr))
        inputs = tuple(inputs)
        if not states or len(states) != len(inputs):
            raise ShapeMismatch(
                "state_matrices and input_matrices must be equally long and non-empty"
            )
        m = states[0].shape[0]
        for i, a in enumerate(states, start=1):
            if a.shape != (m, m):
                raise WidthMismatch(f"layer {i} state matrix has shape {a.shape}")
        if inputs[0].shape != (m, 1):
            raise ShapeMismatch(
                f"first input matrix must be ({m}, 1), got {inputs[0].shape}"
            )
        for i, b in enumerate(inputs[1:], start=2):
            if b.shape != (m, m):
                raise WidthMismatch(f"layer {i} input matrix has shape {b.shape}")
        out = _freeze(np.atleast_1d(self.read_out))
        if out.shape != (m,):
            raise WidthMismatch(f"read_out has shape {out.shape}, expected ({m},)")
        object.__setattr__(self, "state_matrices", states)
        object.__setattr__(self, "input_matrices", inputs)
        object.__setattr__(self, "read_out", out)

    @property
    def width(self) -> int:
        return self.state_matrices[0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.state_matrices)

    def kernel(self, horizon: int = DEFAULT_HORIZON) -> ConvolutionKernel:
        horizon = _checked_horizon(horizon)
        m, depth = self.width, self.depth
        states = [np.zeros(m, dtype=complex) for _ in range(depth)]
        taps = np.empty(horizon, dtype=complex)
        for t in range(horizon):
            drive = 1.0 if t == 0 else 0.0
            states[0] = self.state_matrices[0] @ states[0] + self.input_matrices[0][:, 0] * drive
            for i in range(1, depth):
                states[i] = self.state_matrices[i] @ states[i] + self.input_matrices[i] @ states[i - 1]
            taps[t] = self.read_out @ states[-1]
        return ConvolutionKernel(taps)


@dataclass(frozen=True)
class MembershipReport:
    """Outcome of checking a model against the entrywise norm class."""

    is_member: bool
    width: int
    depth: int
    measured_norm: float
    violations: tuple[tuple[str, float], ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        return {
            "is_member": self.is_member,
            "width": self.width,
            "depth": self.depth,
            "measured_norm": self.measured_norm,
            "violations": [
                {"constraint": name, "value": value} for name, value in self.violations
            ],
        }


def _checked_horizon(horizon: int) -> int:
    horizon = int(horizon)
    if horizon < 1:
        raise DomainError(f"horizon must be positive, got {horizon}")
    return horizon


def _stability_gate(radius: float, strict: bool) -> None:
    if radius < 1.0:
        return
    message = f"spectral radius {radius:.6g} is not below 1"
    if strict:
        raise UnstableModel(message)
    warnings.warn(message, StabilityWarning, stacklevel=3)


def simulate(model: DeepLinearSSM, inputs, *, strict_stability: bool = False) -> np.ndarray:
    """Run the layered recurrence on a scalar input sequence.

    Returns the complex output sequence of the same length.  With
    ``strict_stability`` a spectral radius >= 1 raises
    :class:`UnstableModel`; otherwise it only warns.
    """
    x = np.atleast_1d(np.asarray(inputs, dtype=complex))
    if x.ndim != 1:
        raise ShapeMismatch(f"inputs must be a scalar sequence, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("inputs contain non-finite entries")
    _stability_gate(model.spectral_radius(), strict_stability)
    m, depth = model.width, model.depth
    diags = [layer.state_diag for layer in model.layers]
    mats = [layer.input_matrix for layer in model.layers]
    states = [np.zeros(m, dtype=complex) for _ in range(depth)]
    out = np.empty(x.size, dtype=complex)
    for t in range(x.size):
        # A_i is diagonal, so the state update is elementwise.
        states[0] = diags[0] * states[0] + mats[0][:, 0] * x[t]
        for i in range(1, depth):
            states[i] = diags[i] * states[i] + mats[i] @ states[i - 1]
        out[t] = model.read_out @ states[-1]
    return out


def kernel_by_simulation(
    model: DeepLinearSSM,
    horizon: int = DEFAULT_HORIZON,
    *,
    strict_stability: bool = False,
) -> ConvolutionKernel:
    """Kernel taps as the simulated response to the unit impulse."""
    horizon = _checked_horizon(horizon)
    delta = np.zeros(horizon, dtype=complex)
    delta[0] = 1.0
    return ConvolutionKernel(simulate(model, delta, strict_stability=strict_stability))


def kernel_closed_form(
    model: DeepLinearSSM,
    horizon: int = DEFAULT_HORIZON,
    *,
    strict_stability: bool = False,
) -> ConvolutionKernel:
    """Kernel taps from the homogeneous-sum expansion over index paths.

    Each path (j_1..j_l) through the layer indices contributes its weight
    C[j_l] * B_l[j_l, j_{l-1}] * ... * B_2[j_2, j_1] * B_1[j_1] times the
    complete homogeneous sums of the visited eigenvalues.  Paths whose
    weight is exactly zero are dropped as they arise, which keeps sparse
    constructions cheap; cost is otherwise Theta(m^l * l * horizon).
    """
    horizon = _checked_horizon(horizon)
    _stability_gate(model.spectral_radius(), strict_stability)
    m = model.width
    delta = np.zeros(horizon, dtype=complex)
    delta[0] = 1.0

    first = model.layers[0]
    weights = first.input_matrix[:, 0].copy()
    keep = np.flatnonzero(weights != 0)
    if keep.size == 0:
        return ConvolutionKernel(np.zeros(horizon, dtype=complex))
    weights = weights[keep]
    seqs = np.stack([extend_homogeneous(delta, first.state_diag[j]) for j in keep])
    last = keep

    for layer in model.layers[1:]:
        mat = layer.input_matrix
        next_seqs, next_weights, next_last = [], [], []
        for j in range(m):
            stepped = weights * mat[j, last]
            alive = np.flatnonzero(stepped != 0)
            if alive.size == 0:
                continue
            next_seqs.append(extend_homogeneous(seqs[alive], layer.state_diag[j]))
            next_weights.append(stepped[alive])
            next_last.append(np.full(alive.size, j))
        if not next_seqs:
            return ConvolutionKernel(np.zeros(horizon, dtype=complex))
        seqs = np.vstack(next_seqs)
        weights = np.concatenate(next_weights)
        last = np.concatenate(next_last)

    taps = (weights * model.read_out[last]) @ seqs
    return ConvolutionKernel(taps)


def convolve(kernel: ConvolutionKernel, inputs) -> np.ndarray:
    """Causal convolution ``y(t) = sum_s taps[s] x(t-s)`` truncated to len(x)."""
    x = np.atleast_1d(np.asarray(inputs, dtype=complex))
    if x.ndim != 1:
        raise ShapeMismatch(f"inputs must be a scalar sequence, got shape {x.shape}")
    return np.convolve(kernel.taps, x)[: x.size]


def parameter_norm(model: DeepLinearSSM) -> float:
    """Largest modulus over all norm-constrained parameters (B's and C)."""
    return max(float(np.max(np.abs(arr))) for _, arr in model.constrained_parameters())


def check_membership(model: DeepLinearSSM, bound: float) -> MembershipReport:
    """Check the model against the entrywise class with parameter bound ``c``.

    Membership requires spectral radius strictly below one and every entry
    of B_1, B_2..B_l and C at modulus <= ``bound``.  Each violated matrix
    is reported through its worst entry.
    """
    if bound <= 0:
        raise DomainError(f"bound must be positive, got {bound}")
    violations: list[tuple[str, float]] = []
    radius = model.spectral_radius()
    if not radius < 1.0:
        violations.append(("spectral_radius", radius))
    measured = 0.0
    for name, arr in model.constrained_parameters():
        mags = np.abs(arr)
        worst = float(np.max(mags))
        measured = max(measured, worst)
        if worst > bound:
            if arr.shape[1:] == (1,) or arr.ndim == 1:
                label = name
            else:
                i, j = np.unravel_index(int(np.argmax(mags)), arr.shape)
                label = f"{name}[{i},{j}]"
            violations.append((label, worst))
    return MembershipReport(
        is_member=not violations,
        width=model.width,
        depth=model.depth,
        measured_norm=measured,
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# serialization


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _unpair(obj) -> complex:
    if (
        not isinstance(obj, (list, tuple))
        or len(obj) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj)
    ):
        raise ShapeMismatch(f"expected a [re, im] pair, got {obj!r}")
    return complex(obj[0], obj[1])


def _vector_json(arr: np.ndarray) -> list:
    return [_pair(z) for z in np.asarray(arr).ravel()]


def _matrix_json(arr: np.ndarray) -> list:
    return [[_pair(z) for z in row] for row in np.asarray(arr)]


def _vector_from_json(obj) -> np.ndarray:
    if not isinstance(obj, list):
        raise ShapeMismatch(f"expected a list of [re, im] pairs, got {obj!r}")
    return np.array([_unpair(p) for p in obj], dtype=complex)


def _matrix_from_json(obj) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ShapeMismatch(f"expected a list of rows, got {obj!r}")
    rows = [[_unpair(p) for p in row] for row in obj]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ShapeMismatch("matrix rows have differing lengths")
    return np.array(rows, dtype=complex)


def model_to_json_dict(model: DeepLinearSSM) -> dict:
    return {
        "layers": [
            {
                "state_diag": _vector_json(layer.state_diag),
                "input_matrix": _matrix_json(layer.input_matrix),
            }
            for layer in model.layers
        ],
        "read_out": _vector_json(model.read_out),
    }


def model_from_json_dict(data) -> DeepLinearSSM:
    if not isinstance(data, dict) or "layers" not in data or "read_out" not in data:
        raise ShapeMismatch("model JSON must contain 'layers' and 'read_out'")
    raw_layers = data["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ShapeMismatch("model JSON needs a non-empty 'layers' list")
    layers = []
    for entry in raw_layers:
        if not isinstance(entry, dict):
            raise ShapeMismatch("each layer must be an object")
        layers.append(
            LayerParams(
                _vector_from_json(entry.get("state_diag")),
                _matrix_from_json(entry.get("input_matrix")),
            )
        )
    return DeepLinearSSM(tuple(layers), _vector_from_json(data["read_out"]))


def dense_to_json_dict(dense: DenseSSM) -> dict:
    return {
        "state_matrix": _matrix_json(dense.state_matrix),
        "read_in": _vector_json(dense.read_in),
        "read_out": _vector_json(dense.read_out),
    }


def dense_from_json_dict(data) -> DenseSSM:
    if not isinstance(data, dict):
        raise ShapeMismatch("dense model JSON must be an object")
    try:
        return DenseSSM(
            _matrix_from_json(data["state_matrix"]),
            _vector_from_json(data["read_in"]),
            _vector_from_json(data["read_out"]),
        )
    except KeyError as exc:
        raise ShapeMismatch(f"dense model JSON is missing {exc}") from exc


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see halves."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: DeepLinearSSM, path) -> None:
    atomic_write_text(path, json.dumps(model_to_json_dict(model), indent=2) + "\n")


def load_model(path) -> DeepLinearSSM:
    with open(path, "r") as handle:
        return model_from_json_dict(json.load(handle))


def save_dense(dense: DenseSSM, path) -> None:
    atomic_write_text(path, json.dumps(dense_to_json_dict(dense), indent=2) + "\n")


def load_dense(path) -> DenseSSM:
    with open(path, "r") as handle:
        return dense_from_json_dict(json.load(handle))


def kernel_csv_text(kernel: ConvolutionKernel) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "re", "im"])
    for t, tap in enumerate(kernel.taps):
        writer.writerow([t, repr(float(tap.real)), repr(float(tap.imag))])
    return buf.getvalue()


def parse_kernel_csv(text: str) -> ConvolutionKernel:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["t", "re", "im"]:
        raise ShapeMismatch(f"unexpected kernel CSV header: {header!r}")
    taps = []
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise ShapeMismatch(f"bad kernel CSV row: {row!r}")
        if int(row[0]) != len(taps):
            raise ShapeMismatch("kernel CSV rows must be consecutive from t = 0")
        taps.append(complex(float(row[1]), float(row[2])))
    if not taps:
        raise ShapeMismatch("kernel CSV holds no taps")
    return ConvolutionKernel(np.array(taps, dtype=complex))


def save_kernel_csv(kernel: ConvolutionKernel, path) -> None:
    atomic_write_text(path, kernel_csv_text(kernel))


def load_kernel_csv(path) -> ConvolutionKernel:
    with open(path, "r", newline="") as handle:
        return parse_kernel_csv(handle.read())
