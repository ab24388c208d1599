"""Feed-forward neural-network interpolator for cheap knowledge-space
densification, plus a linear-interpolation fallback for near-linear problems.

The network is a plain ReLU multilayer perceptron trained full-batch with
Adam on mean-square error against min-max normalized inputs and outputs.
Training is single-threaded and bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergedTraining, EmptyInput, ExtrapolationWarning

ZERO_LABEL_TOL = 1e-12  # rows with |label| below this are excluded from MPE


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    hidden: tuple[int, ...] = (64, 64, 64)
    epochs: int = 5000
    learning_rate: float = 1e-4
    split: float = 0.8
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class MlpModel:
    """ReLU multilayer perceptron with min-max input/output normalization."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    in_min: np.ndarray
    in_max: np.ndarray
    out_min: np.ndarray
    out_max: np.ndarray
    activation: str = "relu"
    metadata: dict = field(default_factory=dict)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def normalize_in(self, x: np.ndarray) -> np.ndarray:
        return (x - self.in_min) / (self.in_max - self.in_min)

    def denormalize_out(self, y: np.ndarray) -> np.ndarray:
        return self.out_min + y * (self.out_max - self.out_min)

    def forward_normalized(self, xn: np.ndarray) -> np.ndarray:
        a = xn
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i < last:
                a = np.maximum(a, 0.0)
        return a

    def predict(self, x) -> np.ndarray:
        """Denormalized KPI predictions for a batch of decision vectors."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        slack = 1e-9 * (self.in_max - self.in_min)
        if np.any(x < self.in_min - slack) or np.any(x > self.in_max + slack):
            warnings.warn("prediction inputs outside the fitted range; extrapolating",
                          ExtrapolationWarning, stacklevel=2)
        return self.denormalize_out(self.forward_normalized(self.normalize_in(x)))

    def to_dict(self) -> dict:
        return {
            "kind": "mlp",
            "activation": self.activation,
            "layer_sizes": self.layer_sizes,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "in_min": self.in_min.tolist(),
            "in_max": self.in_max.tolist(),
            "out_min": self.out_min.tolist(),
            "out_max": self.out_max.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpModel":
        return cls(
            weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
            biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
            in_min=np.asarray(doc["in_min"], dtype=float),
            in_max=np.asarray(doc["in_max"], dtype=float),
            out_min=np.asarray(doc["out_min"], dtype=float),
            out_max=np.asarray(doc["out_max"], dtype=float),
            activation=doc.get("activation", "relu"),
            metadata=doc.get("metadata", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _init_model(n_in: int, n_out: int, hidden: tuple[int, ...], rng: np.random.Generator,
                in_min, in_max, out_min, out_max) -> MlpModel:
    sizes = [n_in, *hidden, n_out]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases, in_min=in_min, in_max=in_max,
                    out_min=out_min, out_max=out_max)


def loss_and_gradients(model: MlpModel, xn: np.ndarray, yn: np.ndarray):
    """MSE loss and its gradients w.r.t. every weight and bias (backprop)."""
    acts = [xn]
    pre = []
    a = xn
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        acts.append(a)
    resid = acts[-1] - yn
    n = xn.shape[0]
    loss = float(np.mean(resid**2))

    grad_w = [np.empty_like(w) for w in model.weights]
    grad_b = [np.empty_like(b) for b in model.biases]
    delta = 2.0 * resid / (n * yn.shape[1])
    for i in range(last, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, grad_w, grad_b


def mpe(predictions, labels) -> np.ndarray:
    """Mean percentage error per KPI column, in percent.

    Rows whose label magnitude is below ``ZERO_LABEL_TOL`` are excluded from
    that column's mean.

    Raises
    ------
    EmptyInput
        On zero rows, mismatched lengths, or a column with no usable labels.
    """
    pred = np.atleast_2d(np.asarray(predictions, dtype=float))
    lab = np.atleast_2d(np.asarray(labels, dtype=float))
    if pred.shape != lab.shape:
        raise EmptyInput(f"prediction shape {pred.shape} != label shape {lab.shape}")
    if pred.shape[0] == 0:
        raise EmptyInput("mpe needs at least one row")
    out = np.empty(pred.shape[1])
    for j in range(pred.shape[1]):
        usable = np.abs(lab[:, j]) >= ZERO_LABEL_TOL
        if not np.any(usable):
            raise EmptyInput(f"KPI column {j} has no labels above {ZERO_LABEL_TOL}")
        out[j] = np.mean(np.abs(pred[usable, j] - lab[usable, j]) / np.abs(lab[usable, j])) * 100.0
    return out


@dataclass
class TrainReport:
    """Held-out accuracy of a trained interpolator."""

    train_mpe: np.ndarray
    test_mpe: np.ndarray
    final_loss: float
    epochs: int
    n_train: int
    n_test: int

    def to_dict(self) -> dict:
        return {
            "train_mpe_pct": self.train_mpe.tolist(),
            "test_mpe_pct": self.test_mpe.tolist(),
            "final_loss": self.final_loss,
            "epochs": self.epochs,
            "n_train": self.n_train,
            "n_test": self.n_test,
        }


def train(decisions, kpis, config: TrainConfig | None = None) -> tuple[MlpModel, TrainReport]:
    """Train an MLP interpolator on (decision, KPI) pairs.

    The dataset is split into train/test subsets by a seeded permutation;
    the report carries the mean percentage error of each KPI on both splits.

    Raises
    ------
    DivergedTraining
        If the loss becomes non-finite.
    """
    config = config or TrainConfig()
    x = np.atleast_2d(np.asarray(decisions, dtype=float))
    y = np.atleast_2d(np.asarray(kpis, dtype=float))
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise EmptyInput("decisions and kpis must share a nonzero row count")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DivergedTraining("training data must be finite")

    rng = np.random.Generator(np.random.PCG64(config.seed))
    perm = rng.permutation(x.shape[0])
    n_train = max(int(round(config.split * x.shape[0])), 1)
    if n_train == x.shape[0]:
        n_train -= 1
    tr, te = perm[:n_train], perm[n_train:]

    in_min, in_max = x.min(axis=0), x.max(axis=0)
    out_min, out_max = y.min(axis=0), y.max(axis=0)
    # degenerate (constant) axes normalize to zero with unit span
    in_max = np.where(in_max > in_min, in_max, in_min + 1.0)
    out_max = np.where(out_max > out_min, out_max, out_min + 1.0)

    model = _init_model(x.shape[1], y.shape[1], tuple(config.hidden), rng,
                        in_min, in_max, out_min, out_max)
    xn_tr = model.normalize_in(x[tr])
    yn_tr = (y[tr] - out_min) / (out_max - out_min)

    m_w = [np.zeros_like(w) for w in model.weights]
    v_w = [np.zeros_like(w) for w in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    b1, b2, eps, lr = config.beta1, config.beta2, config.eps, config.learning_rate

    loss = np.inf
    for t in range(1, config.epochs + 1):
        loss, grad_w, grad_b = loss_and_gradients(model, xn_tr, yn_tr)
        if not np.isfinite(loss):
            raise DivergedTraining(f"loss became non-finite at epoch {t}")
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for i in range(len(model.weights)):
            m_w[i] = b1 * m_w[i] + (1 - b1) * grad_w[i]
            v_w[i] = b2 * v_w[i] + (1 - b2) * grad_w[i] ** 2
            model.weights[i] -= lr * (m_w[i] / c1) / (np.sqrt(v_w[i] / c2) + eps)
            m_b[i] = b1 * m_b[i] + (1 - b1) * grad_b[i]
            v_b[i] = b2 * v_b[i] + (1 - b2) * grad_b[i] ** 2
            model.biases[i] -= lr * (m_b[i] / c1) / (np.sqrt(v_b[i] / c2) + eps)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        report = TrainReport(
            train_mpe=mpe(model.predict(x[tr]), y[tr]),
            test_mpe=mpe(model.predict(x[te]), y[te]),
            final_loss=loss,
            epochs=config.epochs,
            n_train=len(tr),
            n_test=len(te),
        )
    model.metadata = {
        "seed": config.seed,
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "split": config.split,
        "test_mpe_pct": report.test_mpe.tolist(),
    }
    return model, report


class LinearInterpolator:
    """Piecewise-linear interpolation on the Delaunay triangulation of the
    training decisions, with nearest-neighbor fallback outside the hull.

    A drop-in alternative to the MLP for near-linear problems.
    """

    kind = "linear"

    def __init__(self, decisions, kpis):
        from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

        x = np.atleast_2d(np.asarray(decisions, dtype=float))
        y = np.atleast_2d(np.asarray(kpis, dtype=float))
        if x.shape[0] == 0:
            raise EmptyInput("interpolator needs at least one row")
        self._linear = LinearNDInterpolator(x, y)
        self._nearest = NearestNDInterpolator(x, y)

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self._linear(x)
        holes = ~np.all(np.isfinite(out), axis=1)
        if np.any(holes):
            out[holes] = self._nearest(x[holes])
        return out
