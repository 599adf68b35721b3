"""The four-layer decision model.

Inputs {S, X} feed a hidden representation R of m relu nodes.  The observed
decision head reads nodes R_1..R_m_obs; the desired head reads all m nodes,
so the extra "disparity" nodes R_{m_obs+1}..R_m carry exactly the learned
correction between the two.  A separate linear-sigmoid outcome head predicts
Y from {S, X, H}.

All forwards accept a single row or a stacked batch.  ModelParams carries its
ArchitectureConfig so the observed/disparity partition is self-describing.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .autodiff import sigmoid_value, relu_value


@dataclass(frozen=True)
class ArchitectureConfig:
    n_features: int
    m: int
    m_obs: int

    def __post_init__(self) -> None:
        if self.n_features < 0:
            raise ValueError("n_features must be >= 0")
        if not (1 <= self.m_obs < self.m):
            raise ValueError("need 1 <= m_obs < m")

    @property
    def disparity_nodes(self) -> range:
        return range(self.m_obs, self.m)


@dataclass
class ModelParams:
    """All weights of the network, partitioned by the architecture.

    rep_weights has one column per hidden node over the (1 + n_features)
    inputs (S first, then X).  Columns at index >= m_obs, together with the
    matching rep_bias and head_weights entries, are the disparity-node
    parameters; everything else belongs to the observed/outcome group.
    """

    arch: ArchitectureConfig
    rep_weights: np.ndarray    # (1 + n_features, m)
    rep_bias: np.ndarray       # (m,)
    head_weights: np.ndarray   # (m,)
    head_bias: float
    outcome_weights: np.ndarray  # (1 + n_features + 1,)  inputs (S, X, H)
    outcome_bias: float

    def __post_init__(self) -> None:
        a = self.arch
        self.rep_weights = np.asarray(self.rep_weights, dtype=np.float64)
        self.rep_bias = np.asarray(self.rep_bias, dtype=np.float64)
        self.head_weights = np.asarray(self.head_weights, dtype=np.float64)
        self.outcome_weights = np.asarray(self.outcome_weights, dtype=np.float64)
        if self.rep_weights.shape != (1 + a.n_features, a.m):
            raise ValueError("rep_weights shape mismatch")
        if self.rep_bias.shape != (a.m,):
            raise ValueError("rep_bias shape mismatch")
        if self.head_weights.shape != (a.m,):
            raise ValueError("head_weights shape mismatch")
        if self.outcome_weights.shape != (2 + a.n_features,):
            raise ValueError("outcome_weights shape mismatch")
        self.head_bias = float(self.head_bias)
        self.outcome_bias = float(self.outcome_bias)

    @classmethod
    def zeros(cls, arch: ArchitectureConfig) -> "ModelParams":
        return cls(arch,
                   np.zeros((1 + arch.n_features, arch.m)),
                   np.zeros(arch.m),
                   np.zeros(arch.m),
                   0.0,
                   np.zeros(2 + arch.n_features),
                   0.0)

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, self.rep_weights.copy(), self.rep_bias.copy(),
                           self.head_weights.copy(), self.head_bias,
                           self.outcome_weights.copy(), self.outcome_bias)

    def with_zeroed_disparity(self) -> "ModelParams":
        out = self.copy()
        k = self.arch.m_obs
        out.rep_weights[:, k:] = 0.0
        out.rep_bias[k:] = 0.0
        out.head_weights[k:] = 0.0
        return out

    def disparity_triples(self) -> list[tuple[float, float, np.ndarray, float]]:
        """Per disparity node: (head weight w, w_SR, w_XR vector, bias)."""
        out = []
        for i in self.arch.disparity_nodes:
            col = self.rep_weights[:, i]
            out.append((float(self.head_weights[i]), float(col[0]),
                        col[1:].copy(), float(self.rep_bias[i])))
        return out


def design_matrix(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Stack S as the first column before X; rows are samples."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and s.size > 1:
        x = x.reshape(s.size, -1) if x.size else x.reshape(s.size, 0)
    x = np.atleast_2d(x)
    if x.shape[0] != s.size:
        if x.shape[0] == 1:
            x = np.repeat(x, s.size, axis=0)
        else:
            raise ValueError("s and x row counts differ")
    return np.column_stack([s, x]) if x.size else s.reshape(-1, 1)


def _hidden(params: ModelParams, sx: np.ndarray) -> np.ndarray:
    return relu_value(sx @ params.rep_weights + params.rep_bias)


def _head_logit(params: ModelParams, sx: np.ndarray, upto: int) -> np.ndarray:
    r = _hidden(params, sx)
    return params.head_bias + r[:, :upto] @ params.head_weights[:upto]


def forward_observed(params: ModelParams, x, s):
    """Pr(H=1 | x, s) under the observed decision-maker (first m_obs nodes)."""
    sx = design_matrix(s, x)
    out = sigmoid_value(_head_logit(params, sx, params.arch.m_obs))
    return out if sx.shape[0] > 1 else float(out[0])


def forward_desired(params: ModelParams, x, s):
    """Pr(H=1 | x, s) under the desired decision-maker (all m nodes)."""
    sx = design_matrix(s, x)
    out = sigmoid_value(_head_logit(params, sx, params.arch.m))
    return out if sx.shape[0] > 1 else float(out[0])


def forward_outcome(params: ModelParams, x, s, h):
    """Pr(Y=1 | x, s, h) from the linear-sigmoid outcome head."""
    sx = design_matrix(s, x)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (sx.shape[0],))
    z = (params.outcome_bias + sx @ params.outcome_weights[:-1]
         + h * params.outcome_weights[-1])
    out = sigmoid_value(z)
    return out if sx.shape[0] > 1 else float(out[0])


def representational_disparity(params: ModelParams, x):
    """Logit-space correction RD(x, 1) - RD(x, 0) from the disparity nodes."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim <= 1 and (params.arch.n_features == 0 or x.ndim == 1)
    n = 1 if single else x.shape[0]
    sx1 = design_matrix(np.ones(n), x)
    sx0 = design_matrix(np.zeros(n), x)
    k = params.arch.m_obs
    w = params.head_weights[k:]
    r1 = relu_value(sx1 @ params.rep_weights[:, k:] + params.rep_bias[k:])
    r0 = relu_value(sx0 @ params.rep_weights[:, k:] + params.rep_bias[k:])
    rd = (r1 - r0) @ w
    return rd if n > 1 else float(rd[0])


# ---------------------------------------------------------------------------
# flat key-value serialization (used to freeze params between phases)

_FIELDS = ("rep_weights", "rep_bias", "head_weights", "head_bias",
           "outcome_weights", "outcome_bias")


def dumps_params(params: ModelParams) -> str:
    buf = io.StringIO()
    a = params.arch
    buf.write(f"arch {a.n_features} {a.m} {a.m_obs}\n")
    for name in _FIELDS:
        value = np.atleast_1d(np.asarray(getattr(params, name), dtype=np.float64))
        shape = "x".join(str(d) for d in value.shape)
        flat = " ".join(repr(float(v)) for v in value.ravel())
        buf.write(f"{name} {shape} {flat}\n")
    return buf.getvalue()


def loads_params(text: str) -> ModelParams:
    fields: dict[str, np.ndarray] = {}
    arch: ArchitectureConfig | None = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "arch":
            arch = ArchitectureConfig(int(parts[1]), int(parts[2]), int(parts[3]))
            continue
        name, shape = parts[0], parts[1]
        dims = tuple(int(d) for d in shape.split("x"))
        values = np.array([float(v) for v in parts[2:]], dtype=np.float64)
        fields[name] = values.reshape(dims)
    if arch is None:
        raise ValueError("missing arch line")
    missing = [f for f in _FIELDS if f not in fields]
    if missing:
        raise ValueError(f"missing fields: {missing}")
    return ModelParams(arch,
                       fields["rep_weights"],
                       fields["rep_bias"],
                       fields["head_weights"],
                       float(fields["head_bias"][0]),
                       fields["outcome_weights"],
                       float(fields["outcome_bias"][0]))


def save_params(params: ModelParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_params(params))


def load_params(path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_params(fh.read())
