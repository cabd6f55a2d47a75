"""Second-order gradient-boosted trees for binary classification.

Logistic loss, exact greedy split search over all (feature, midpoint)
candidates, L2 leaf regularization, and a split penalty. Per round, with
p = sigmoid(margin): g = p - y and h = p(1 - p); a split's gain is

    1/2 * [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - (GL+GR)^2/(HL+HR+lambda) ] - gamma

and a leaf's weight is -G/(H+lambda) scaled by the learning rate. Training is
fully deterministic: ties on gain resolve to the lowest feature index, then
the smallest threshold.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionMismatch, SingleClass


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    base_score: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.reg_lambda < 0.0 or self.gamma < 0.0:
            raise ValueError("reg_lambda and gamma must be >= 0")
        if not 0.0 < self.base_score < 1.0:
            raise ValueError("base_score must be in (0, 1)")


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (weight)."""
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.weight is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"weight": self.weight}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TreeNode":
        if "weight" in obj:
            return cls(weight=obj["weight"])
        return cls(
            feature=obj["feature"],
            threshold=obj["threshold"],
            left=cls.from_dict(obj["left"]),
            right=cls.from_dict(obj["right"]),
        )


@dataclass
class GbdtModel:
    trees: list[TreeNode]
    config: TrainConfig
    feature_count: int


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logistic_grad_hess(margins: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample gradient and hessian of the logistic loss w.r.t. the margin."""
    p = _sigmoid(margins)
    return p - y, p * (1.0 - p)


def _validate_matrix(X, feature_count: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DimensionMismatch(f"X must be a non-empty 2-D matrix, got shape {X.shape}")
    if feature_count is not None and X.shape[1] != feature_count:
        raise DimensionMismatch(f"expected {feature_count} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DimensionMismatch("X contains non-finite feature values")
    return X


def _best_split(Xn, g, h, lam, gamma, min_child_weight):
    """Exact greedy scan over every (feature, midpoint) candidate.

    Returns (feature, threshold) or None when no candidate has positive gain.
    Gains for all candidates of all features are computed in one vectorized
    pass; argmax scans feature-major so gain ties resolve to the lowest
    feature index, then the smallest threshold.
    """
    m, d = Xn.shape
    if m < 2:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    Xs = np.take_along_axis(Xn, order, axis=0)
    Gl = np.cumsum(g[order], axis=0)[:-1]
    Hl = np.cumsum(h[order], axis=0)[:-1]
    G, H = g.sum(), h.sum()
    Gr, Hr = G - Gl, H - Hl
    with np.errstate(divide="ignore", invalid="ignore"):
        parent = G * G / (H + lam) if H + lam > 0 else 0.0
        gain = 0.5 * (Gl * Gl / (Hl + lam) + Gr * Gr / (Hr + lam) - parent) - gamma
    valid = (Xs[1:] > Xs[:-1]) & (Hl >= min_child_weight) & (Hr >= min_child_weight)
    gain = np.where(valid & np.isfinite(gain), gain, -np.inf)
    flat = int(np.argmax(gain.T))
    f, i = divmod(flat, m - 1)
    if gain[i, f] <= 0.0:
        return None
    return f, float((Xs[i, f] + Xs[i + 1, f]) / 2.0)


def _build_tree(X, g, h, cfg: TrainConfig) -> TreeNode:
    lam, eta = cfg.reg_lambda, cfg.learning_rate

    def leaf(idx) -> TreeNode:
        G, H = g[idx].sum(), h[idx].sum()
        w = 0.0 if H + lam <= 0 else -G / (H + lam) * eta
        return TreeNode(weight=float(w))

    def build(idx, depth) -> TreeNode:
        if depth >= cfg.max_depth or len(idx) < 2:
            return leaf(idx)
        split = _best_split(X[idx], g[idx], h[idx], lam, cfg.gamma, cfg.min_child_weight)
        if split is None:
            return leaf(idx)
        f, thr = split
        left_mask = X[idx, f] < thr
        if not left_mask.any() or left_mask.all():   # degenerate midpoint rounding
            return leaf(idx)
        return TreeNode(
            feature=f,
            threshold=thr,
            left=build(idx[left_mask], depth + 1),
            right=build(idx[~left_mask], depth + 1),
        )

    return build(np.arange(X.shape[0]), 0)


def _tree_margins(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.float64)

    def apply(nd: TreeNode, idx):
        if nd.is_leaf:
            out[idx] = nd.weight
            return
        mask = X[idx, nd.feature] < nd.threshold
        apply(nd.left, idx[mask])
        apply(nd.right, idx[~mask])

    apply(node, np.arange(X.shape[0]))
    return out


def train(X, y: Sequence[int], config: TrainConfig = TrainConfig()) -> GbdtModel:
    """Fit a boosted ensemble; deterministic for identical (X, y, config)."""
    X = _validate_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if len(np.unique(y)) < 2:
        raise SingleClass("training labels contain a single class")

    margins = np.full(X.shape[0], math.log(config.base_score / (1.0 - config.base_score)))
    trees: list[TreeNode] = []
    for _ in range(config.n_trees):
        g, h = logistic_grad_hess(margins, y)
        tree = _build_tree(X, g, h, config)
        trees.append(tree)
        margins += _tree_margins(tree, X)
    return GbdtModel(trees=trees, config=config, feature_count=X.shape[1])


def predict_margin(model: GbdtModel, X) -> np.ndarray:
    X = _validate_matrix(X, model.feature_count)
    base = math.log(model.config.base_score / (1.0 - model.config.base_score))
    margins = np.full(X.shape[0], base)
    for tree in model.trees:
        margins += _tree_margins(tree, X)
    return margins


def staged_margins(model: GbdtModel, X) -> Iterator[np.ndarray]:
    """Margins after 0, 1, ..., n_trees trees (n_trees + 1 arrays)."""
    X = _validate_matrix(X, model.feature_count)
    base = math.log(model.config.base_score / (1.0 - model.config.base_score))
    margins = np.full(X.shape[0], base)
    yield margins.copy()
    for tree in model.trees:
        margins += _tree_margins(tree, X)
        yield margins.copy()


def predict_proba(model: GbdtModel, X) -> np.ndarray:
    return _sigmoid(predict_margin(model, X))


def predict(model: GbdtModel, X, threshold: float = 0.5) -> np.ndarray:
    return (predict_proba(model, X) >= threshold).astype(int)


def model_to_json(model: GbdtModel) -> str:
    return json.dumps({
        "config": asdict(model.config),
        "feature_count": model.feature_count,
        "trees": [t.to_dict() for t in model.trees],
    })


def model_from_json(payload: str) -> GbdtModel:
    obj = json.loads(payload)
    return GbdtModel(
        trees=[TreeNode.from_dict(t) for t in obj["trees"]],
        config=TrainConfig(**obj["config"]),
        feature_count=obj["feature_count"],
    )
