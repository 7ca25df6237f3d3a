"""Slicing functions: classifiers that score membership in a discovered slice."""

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit

from slicescope.coherence import SliceMask
from slicescope.dataset_io import EmbeddingSet
from slicescope.errors import ConfigError, InputError, TrainingError
from slicescope.logging_config import log_training
from slicescope.monitoring import slicer_trainings
from slicescope.solver.problem import whole_budget

Architecture = Literal["logistic", "mlp_1hidden"]
Params = Dict[str, np.ndarray]

MAX_HALVINGS = 40


class TrainConfig(BaseModel):
    """Full-batch gradient descent settings."""

    architecture: Architecture = "logistic"
    hidden_dim: int = Field(64, ge=1)
    epochs: int = Field(200, ge=1)
    learning_rate: float = Field(0.05, gt=0)
    l2: float = Field(1e-4, ge=0)
    class_weighting: Literal["balanced"] = "balanced"
    seed: int = 0


@dataclass(frozen=True, eq=False)
class SlicerModel:
    """Trained classifier with the standardization it was trained under."""

    architecture: Architecture
    input_dim: int
    hidden_dim: int
    mean: np.ndarray
    scale: np.ndarray
    parameters: Params
    training_meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = _shapes(self.architecture, self.input_dim, self.hidden_dim)
        for name, shape in expected.items():
            value = self.parameters.get(name)
            if value is None or value.shape != shape:
                raise InputError(f"parameter '{name}' must have shape {shape}")
            if not np.all(np.isfinite(value)):
                raise InputError(f"parameter '{name}' has non-finite entries")
        if self.mean.shape != (self.input_dim,) or self.scale.shape != (self.input_dim,):
            raise InputError("standardization constants do not match input_dim")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "architecture": self.architecture,
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "parameters": {k: v.tolist() for k, v in self.parameters.items()},
            "training_meta": self.training_meta,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "SlicerModel":
        return cls(
            architecture=payload["architecture"],
            input_dim=int(payload["input_dim"]),
            hidden_dim=int(payload["hidden_dim"]),
            mean=np.asarray(payload["mean"], dtype=np.float64),
            scale=np.asarray(payload["scale"], dtype=np.float64),
            parameters={k: np.asarray(v, dtype=np.float64) for k, v in payload["parameters"].items()},
            training_meta=dict(payload.get("training_meta", {})),
        )


def _shapes(architecture: str, d: int, h: int) -> Dict[str, Tuple[int, ...]]:
    if architecture == "logistic":
        return {"W": (d, 1), "b": (1,)}
    return {"W1": (d, h), "b1": (h,), "W2": (h, 1), "b2": (1,)}


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _init_params(config: TrainConfig, d: int) -> Params:
    rng = np.random.default_rng(config.seed)
    if config.architecture == "logistic":
        return {"W": _glorot(rng, d, 1), "b": np.zeros(1)}
    h = config.hidden_dim
    return {
        "W1": _glorot(rng, d, h),
        "b1": np.zeros(h),
        "W2": _glorot(rng, h, 1),
        "b2": np.zeros(1),
    }


def _logits(architecture: str, params: Params, x: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    if architecture == "logistic":
        return (x @ params["W"]).ravel() + params["b"][0], {}
    hidden = np.tanh(x @ params["W1"] + params["b1"])
    return (hidden @ params["W2"]).ravel() + params["b2"][0], {"hidden": hidden}


def _loss_fn(
    architecture: str, x: np.ndarray, y: np.ndarray, c: np.ndarray, l2: float
) -> Callable[[Params], Tuple[float, Params]]:
    """Class-weighted binary cross-entropy with L2 on weight matrices, and its gradient."""
    total_weight = c.sum()

    def evaluate(params: Params) -> Tuple[float, Params]:
        z, cache = _logits(architecture, params, x)
        bce = np.logaddexp(0.0, z) - y * z
        penalty = sum(float(np.sum(v**2)) for k, v in params.items() if k.startswith("W"))
        loss = float(c @ bce) / total_weight + 0.5 * l2 * penalty

        dz = (c * (expit(z) - y) / total_weight)[:, None]
        if architecture == "logistic":
            grads = {"W": x.T @ dz + l2 * params["W"], "b": dz.sum(axis=0)}
        else:
            hidden = cache["hidden"]
            dhidden = (dz @ params["W2"].T) * (1.0 - hidden**2)
            grads = {
                "W2": hidden.T @ dz + l2 * params["W2"],
                "b2": dz.sum(axis=0),
                "W1": x.T @ dhidden + l2 * params["W1"],
                "b1": dhidden.sum(axis=0),
            }
        return loss, grads

    return evaluate


def train_slicer(embeddings: EmbeddingSet, mask: SliceMask, config: TrainConfig) -> SlicerModel:
    """Fit a classifier with slice members as positives.

    Full-batch descent on standardized inputs; an epoch whose step would raise the
    loss retries with the step halved, so the training loss never increases.
    """
    if mask.n != embeddings.n:
        raise InputError(f"mask has length {mask.n}, embeddings have {embeddings.n} rows")
    y = mask.member.astype(np.float64)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigError("single-class mask: training needs positive and negative samples")

    mean = embeddings.data.mean(axis=0)
    scale = embeddings.data.std(axis=0)
    scale[scale == 0] = 1.0
    x = (embeddings.data - mean) / scale
    c = np.where(y > 0, n_neg / n_pos, 1.0)

    evaluate = _loss_fn(config.architecture, x, y, c, config.l2)
    params = _init_params(config, embeddings.d)
    loss, grads = evaluate(params)
    history = [loss]
    for epoch in range(1, config.epochs + 1):
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingError("divergence: non-finite loss", epoch=epoch)
        step = config.learning_rate
        for _ in range(MAX_HALVINGS):
            candidate = {k: v - step * grads[k] for k, v in params.items()}
            new_loss, new_grads = evaluate(candidate)
            if np.isfinite(new_loss) and new_loss <= loss:
                params, loss, grads = candidate, new_loss, new_grads
                break
            step /= 2.0
        history.append(loss)

    model = SlicerModel(
        architecture=config.architecture,
        input_dim=embeddings.d,
        hidden_dim=config.hidden_dim,
        mean=mean,
        scale=scale,
        parameters=params,
        training_meta={
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "l2": config.l2,
            "seed": config.seed,
            "class_weighting": config.class_weighting,
            "final_loss": loss,
            "loss_history": history,
        },
    )
    slicer_trainings.labels(architecture=config.architecture).inc()
    log_training(config.architecture, config.epochs, loss)
    return model


def predict_proba(model: SlicerModel, embeddings: EmbeddingSet) -> np.ndarray:
    """Slice-membership probabilities in [0, 1]."""
    if embeddings.d != model.input_dim:
        raise InputError(f"embedding dimension {embeddings.d} != model input_dim {model.input_dim}")
    x = (embeddings.data - model.mean) / model.scale
    z, _ = _logits(model.architecture, model.parameters, x)
    return expit(z)


def select_test_slice(probabilities: np.ndarray, alpha: float) -> SliceMask:
    """Top ⌊α·n⌋ samples by probability; ties by smaller index."""
    p = np.asarray(probabilities, dtype=np.float64)
    size = whole_budget(alpha * p.shape[0])
    if size < 1:
        raise ConfigError(f"alpha={alpha} selects no samples out of {p.shape[0]}")
    order = np.lexsort((np.arange(p.shape[0]), -p))
    return SliceMask.from_indices(order[:size], p.shape[0])


def save_model(model: SlicerModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f, indent=2)


def load_model(path: str) -> SlicerModel:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return SlicerModel.from_dict(json.load(f))
    except FileNotFoundError:
        raise InputError(f"missing file: {path}")
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"malformed model file {path}: {e}")
