"""Attention-based feature fusion.

Each sample's standardized feature vector f scores its channels through a
learnable matrix W: pairwise scores e_ij = f_i * W_ij * f_j are averaged
over j into s_i, and softmax(s) gives positive per-feature weights alpha
summing to 1. Fusion has two modes:

* reweight — z_i = n * alpha_i * f_i, dimension-preserving (default), so
  downstream tree ensembles and per-feature importances stay meaningful.
* collapse — z = sum_i alpha_i * f_i, the single-value weighted sum.

W is trained through a logistic surrogate head on the fused output with
full-batch gradient descent and step-halving backtracking; the training
loss never increases across accepted steps.

Numerical note: the reweight scale is computed as (n * exp(s - max)) /
sum(exp(s - max)), so equal scores (in particular W = 0) give a scale of
exactly 1.0 and the fused vector is bit-identical to the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss, SingleClassInput

MODES = ("reweight", "collapse")

_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class AttentionFuser:
    """Learned score matrix plus the surrogate head that trained it."""

    W: np.ndarray
    theta: np.ndarray
    b: float
    mode: str = "reweight"
    loss_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 2:
            raise ValueError(f"W must be square with n_feat >= 2, got {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("W must be finite")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        expected = W.shape[0] if self.mode == "reweight" else 1
        if theta.shape != (expected,):
            raise ValueError(f"theta must have shape ({expected},), got {theta.shape}")
        W.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "theta", theta)

    @property
    def n_feat(self) -> int:
        return self.W.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Fuse a batch of standardized samples; rows stay independent."""
        _, z = fuse_batch(np.asarray(X, dtype=float), self)
        return z


@dataclass(frozen=True)
class FusedSample:
    """Attention weights and fused output for one sample."""

    alpha: np.ndarray
    z: np.ndarray


def identity_fuser(n_feat: int, mode: str = "reweight") -> AttentionFuser:
    """Untrained fuser (W = 0): uniform weights, identity in reweight mode."""
    theta = np.zeros(n_feat if mode == "reweight" else 1)
    return AttentionFuser(W=np.zeros((n_feat, n_feat)), theta=theta, b=0.0, mode=mode)


def _scores(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    """s_i = mean_j f_i W_ij f_j for every row of X."""
    return X * (X @ W.T) / W.shape[0]


def attention_weights(f: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Softmax-normalized per-feature weights for one sample.

    Scores are max-shifted before exponentiation, so adding any constant
    to all of them cannot change the result.
    """
    f = np.asarray(f, dtype=float)
    W = np.asarray(W, dtype=float)
    if f.ndim != 1 or W.shape != (f.size, f.size):
        raise DimensionMismatch(f"f has {f.shape}, W has {W.shape}")
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(W))):
        raise ValueError("f and W must be finite")
    s = _scores(f[None, :], W)[0]
    e = np.exp(s - s.max())
    return e / e.sum()


def fuse(f: np.ndarray, fuser: AttentionFuser) -> FusedSample:
    """Fuse one standardized feature vector."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size != fuser.n_feat:
        raise DimensionMismatch(f"expected {fuser.n_feat} features, got {f.shape}")
    alphas, z = fuse_batch(f[None, :], fuser)
    return FusedSample(alpha=alphas[0], z=z[0])


def fuse_batch(X: np.ndarray, fuser: AttentionFuser) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fuse: returns (alphas (N,n), fused (N,n) or (N,1))."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fuser.n_feat:
        raise DimensionMismatch(f"expected (N, {fuser.n_feat}) samples, got {X.shape}")
    alphas, fused = _forward(X, fuser.W, fuser.mode)
    return alphas, fused


def _forward(X: np.ndarray, W: np.ndarray, mode: str) -> tuple[np.ndarray, np.ndarray]:
    n = W.shape[0]
    s = _scores(X, W)
    e = np.exp(s - s.max(axis=1, keepdims=True))
    denom = e.sum(axis=1, keepdims=True)
    alphas = e / denom
    if mode == "reweight":
        # (n*e)/denom rather than n*(e/denom): equal scores yield a
        # scale of exactly 1.0, making W = 0 the exact identity
        fused = ((n * e) / denom) * X
    else:
        fused = (alphas * X).sum(axis=1, keepdims=True)
    return alphas, fused


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _softplus(u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def loss_and_grads(
    X: np.ndarray,
    y: np.ndarray,
    W: np.ndarray,
    theta: np.ndarray,
    b: float,
    l2_w: float,
    mode: str = "reweight",
) -> tuple[float, np.ndarray, np.ndarray, float]:
    """Surrogate objective and its analytic gradients.

    loss = mean cross-entropy of sigmoid(theta . fused + b) against y,
    plus l2_w * ||W||_F^2. Returns (loss, dW, dtheta, db).
    """
    n_samples, n = X.shape
    alphas, fused = _forward(X, W, mode)
    u = fused @ theta + b
    p = _sigmoid(u)
    loss = float(np.mean(_softplus(u) - y * u) + l2_w * np.sum(W * W))

    du = (p - y) / n_samples
    db = float(du.sum())
    dtheta = fused.T @ du
    if mode == "reweight":
        dalpha = n * du[:, None] * theta[None, :] * X
    else:
        dalpha = (du * theta[0])[:, None] * X
    g = alphas * (dalpha - np.sum(dalpha * alphas, axis=1, keepdims=True))
    dW = (g * X).T @ X / n + 2.0 * l2_w * W
    return loss, dW, dtheta, db


def train_fuser(
    X: np.ndarray,
    y: np.ndarray,
    epochs: int = 500,
    lr: float = 0.1,
    l2_w: float = 1e-3,
    seed: int = 0,
    mode: str = "reweight",
) -> AttentionFuser:
    """Train W and the logistic head by full-batch gradient descent.

    Starts from W = 0, theta = 0, b = logit(base rate). Each step is
    accepted only if the loss does not increase; otherwise the step size
    is halved (backtracking). Training is deterministic; `seed` is kept
    in the signature for interface uniformity but the optimizer draws no
    random numbers.

    Raises SingleClassInput for one-class data and NonFiniteLoss if the
    loss stays non-finite after backtracking is exhausted.
    """
    del seed  # full-batch descent is deterministic
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} does not match y {y.shape}")
    pos = int(np.sum(y == 1))
    if pos < 2 or (y.size - pos) < 2:
        raise SingleClassInput(
            f"need >= 2 samples per class, got {pos} positive of {y.size}"
        )
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")

    n = X.shape[1]
    W = np.zeros((n, n))
    theta = np.zeros(n if mode == "reweight" else 1)
    base = pos / y.size
    b = float(np.log(base / (1.0 - base)))

    loss, dW, dth, db = loss_and_grads(X, y, W, theta, b, l2_w, mode)
    history = [loss]
    step = lr
    for _ in range(epochs):
        accepted = False
        for _attempt in range(_MAX_BACKTRACKS):
            W_new = W - step * dW
            th_new = theta - step * dth
            b_new = b - step * db
            cand = loss_and_grads(X, y, W_new, th_new, b_new, l2_w, mode)
            if np.isfinite(cand[0]) and cand[0] <= loss:
                W, theta, b = W_new, th_new, b_new
                loss, dW, dth, db = cand
                accepted = True
                break
            step *= 0.5
        if not accepted:
            cand_loss = cand[0]
            if not np.isfinite(cand_loss):
                raise NonFiniteLoss(
                    f"loss non-finite after {_MAX_BACKTRACKS} step halvings"
                )
            break  # loss plateaued below float resolution
        history.append(loss)
        gnorm = max(np.abs(dW).max(), np.abs(dth).max(), abs(db))
        if gnorm < 1e-12:
            break
    return AttentionFuser(W=W, theta=theta, b=b, mode=mode, loss_history=tuple(history))


def save_fuser(fuser: AttentionFuser, path: str) -> None:
    """Flat text record: n_feat, mode, W row-major, theta, b."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gravzone-fuser v1\n")
        fh.write(f"n_feat={fuser.n_feat}\n")
        fh.write(f"mode={fuser.mode}\n")
        fh.write("W=" + " ".join(repr(x) for x in fuser.W.ravel()) + "\n")
        fh.write("theta=" + " ".join(repr(x) for x in fuser.theta) + "\n")
        fh.write(f"b={fuser.b!r}\n")


def load_fuser(path: str) -> AttentionFuser:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "gravzone-fuser v1":
        raise ValueError(f"{path}: not a gravzone fuser file")
    fields = dict(line.split("=", 1) for line in lines[1:] if line)
    n = int(fields["n_feat"])
    W = np.array([float(x) for x in fields["W"].split()]).reshape(n, n)
    theta = np.array([float(x) for x in fields["theta"].split()])
    return AttentionFuser(W=W, theta=theta, b=float(fields["b"]), mode=fields["mode"])
