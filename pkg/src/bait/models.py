"""Linear learners used inside the simulation loop."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(W, X, y):
    """Mean of -w_y^T x + log sum_i exp(w_i^T x)."""
    X = np.atleast_2d(X)
    y = np.atleast_1d(y)
    logits = X @ W.T
    top = logits.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.exp(logits - top).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(len(y)), y]))


def cross_entropy_grad(W, X, y):
    """Gradient of ``cross_entropy`` w.r.t. W (rows w_p): mean of (pi_p - 1[y=p]) x."""
    X = np.atleast_2d(X)
    y = np.atleast_1d(y)
    P = softmax(X @ W.T)
    P[np.arange(len(y)), y] -= 1.0
    return P.T @ X / len(y)


@dataclass
class LinearModel:
    """Multinomial logistic regression or multi-output least squares, no intercept.

    ``W`` is (k, d). Classification is fit by full-batch gradient descent with
    step halving whenever the loss would increase; regression by a least
    squares solve with a tiny ridge.
    """

    mode: str = "classification"
    n_classes: int = 2
    step_size: float = 0.1
    max_iter: int = 2000
    tol: float = 1e-6
    ridge: float = 1e-8
    W: np.ndarray = field(default=None, repr=False)
    n_iter_: int = 0
    losses_: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.mode not in ("classification", "regression"):
            raise ConfigError(f"unknown mode {self.mode!r}")

    def init_weights(self, d, k=None):
        k = self.n_classes if k is None else k
        self.W = np.zeros((k, d))
        return self

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty training set")
        if self.mode == "regression":
            return self._fit_lstsq(X, y)
        y = np.asarray(y, dtype=np.int64)
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")
        # cold start from zero every fit
        W = np.zeros((self.n_classes, X.shape[1]))
        step = self.step_size
        loss = cross_entropy(W, X, y)
        self.losses_ = [loss]
        it = 0
        for it in range(1, self.max_iter + 1):
            g = cross_entropy_grad(W, X, y)
            if np.linalg.norm(g) < self.tol:
                break
            for _ in range(60):
                W_new = W - step * g
                new_loss = cross_entropy(W_new, X, y)
                if new_loss <= loss:
                    break
                step *= 0.5
            else:
                break
            W, loss = W_new, new_loss
            self.losses_.append(loss)
        self.W = W
        self.n_iter_ = it
        return self

    def _fit_lstsq(self, X, Y):
        Y = np.asarray(Y, dtype=np.float64)
        vec = Y.ndim == 1
        Y = Y[:, None] if vec else Y
        A = X.T @ X + self.ridge * np.eye(X.shape[1])
        self.W = np.linalg.solve(A, X.T @ Y).T
        self.n_classes = self.W.shape[0]
        return self

    def decision_function(self, X):
        return np.atleast_2d(np.asarray(X, dtype=np.float64)) @ self.W.T

    def predict_proba(self, X):
        if self.mode != "classification":
            raise ConfigError("predict_proba needs a classification model")
        return softmax(self.decision_function(X))

    def predict(self, X):
        out = self.decision_function(X)
        if self.mode == "classification":
            return out.argmax(axis=1)
        return out

    def evaluate(self, X, y):
        """Accuracy for classification, mean squared error for regression."""
        if self.mode == "classification":
            return accuracy(self.predict(X), y)
        return mse(self.predict(X), y)


def accuracy(pred, y):
    return float(np.mean(np.asarray(pred) == np.asarray(y)))


def mse(pred, y):
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(pred.shape)
    return float(np.mean((pred - y) ** 2))


def one_hot(y, k):
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


def onehot_accuracy(model, X, y):
    """Accuracy of argmax over a one-hot regression model's k outputs."""
    return accuracy(model.decision_function(X).argmax(axis=1), y)
