import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.models.errors import ArtifactFormatError, DimensionMismatch
from src.models.learner_config import DQNConfig
from src.services.engine import GameEnv
from src.services.pipeline import episode_seed

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"DQNLITE 1"
LUMA = np.array([0.299, 0.587, 0.114])


def relu(x):
    return np.maximum(x, 0.0)


def drelu(x):
    return np.where(x > 0, 1.0, 0.0)


class DenseNet:
    """Fully connected rectifier network; identity on the output layer."""

    def __init__(self, sizes: Sequence[int], seed: int = 0, zero: bool = False):
        if len(sizes) < 2:
            raise DimensionMismatch("a network needs an input and an output layer")
        self.sizes = tuple(int(s) for s in sizes)
        rng = np.random.default_rng(seed)
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = np.zeros((n_out, n_in)) if zero else rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))
            self.weights.append(w)
            self.biases.append(np.zeros(n_out))

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    def params(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, values: np.ndarray):
        expected = sum(p.size for p in self.params())
        if expected != values.size:
            raise DimensionMismatch(f"expected {expected} parameters, got {values.size}")
        offset = 0
        for p in self.params():
            p[...] = values[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def copy(self) -> "DenseNet":
        clone = DenseNet(self.sizes, zero=True)
        clone.set_flat(self.flat())
        return clone

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())


def _forward(net: DenseNet, x: np.ndarray):
    """Batch forward pass keeping pre-activations for backprop."""
    activations, pre = [x], []
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else relu(z)
        activations.append(a)
    return a, activations, pre


def forward(net: DenseNet, frame: np.ndarray) -> np.ndarray:
    x = np.asarray(frame, dtype=np.float64)
    if x.shape[-1] != net.n_inputs:
        raise DimensionMismatch(f"network expects {net.n_inputs} inputs, got {x.shape[-1]}")
    out, _, _ = _forward(net, x.reshape(-1, net.n_inputs))
    return out[0] if x.ndim == 1 else out


@dataclass
class Batch:
    frames: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_frames: np.ndarray
    terminals: np.ndarray

    def __len__(self):
        return len(self.actions)


def td_targets(target: DenseNet, batch: Batch, gamma: float) -> np.ndarray:
    next_q = forward(target, batch.next_frames)
    return batch.rewards + gamma * (1.0 - batch.terminals.astype(np.float64)) * next_q.max(axis=1)


def loss_and_gradients(net: DenseNet, batch: Batch, targets: np.ndarray) -> Tuple[float, List[np.ndarray]]:
    """Mean over the batch of half the squared TD error, and its gradient per parameter array."""
    n = len(batch)
    out, activations, pre = _forward(net, batch.frames)
    rows = np.arange(n)
    error = out[rows, batch.actions] - targets
    loss = float(0.5 * np.mean(error ** 2))
    delta = np.zeros_like(out)
    delta[rows, batch.actions] = error / n
    grads_w, grads_b = [], []
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w.append(delta.T @ activations[i])
        grads_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ net.weights[i]) * drelu(pre[i - 1])
    grads = []
    for gw, gb in zip(reversed(grads_w), reversed(grads_b)):
        grads.extend((gw, gb))
    return loss, grads


def backward(net: DenseNet, batch: Batch, gamma: float, target: DenseNet) -> Tuple[float, List[np.ndarray]]:
    return loss_and_gradients(net, batch, td_targets(target, batch, gamma))


def numerical_gradients(net: DenseNet, batch: Batch, targets: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of the batch loss, flattened in parameter order."""
    base = net.flat()
    grads = np.zeros_like(base)
    shifted_net = net.copy()
    for i in range(base.size):
        shifted = base.copy()
        shifted[i] += eps
        shifted_net.set_flat(shifted)
        plus, _ = loss_and_gradients(shifted_net, batch, targets)
        shifted[i] -= 2 * eps
        shifted_net.set_flat(shifted)
        minus, _ = loss_and_gradients(shifted_net, batch, targets)
        grads[i] = (plus - minus) / (2 * eps)
    return grads


class ReplayBuffer:
    """Ring buffer of transitions; frames are stored as per-cell luma bytes."""

    def __init__(self, capacity: int, n_inputs: int):
        self.capacity = capacity
        self.frames = np.zeros((capacity, n_inputs), dtype=np.uint8)
        self.next_frames = np.zeros((capacity, n_inputs), dtype=np.uint8)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.cursor = 0

    def add(self, frame, action: int, reward: float, next_frame, terminal: bool):
        i = self.cursor
        self.frames[i], self.next_frames[i] = frame, next_frame
        self.actions[i], self.rewards[i], self.terminals[i] = action, reward, terminal
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return Batch(
            frames=self.frames[idx] / 255.0,
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_frames=self.next_frames[idx] / 255.0,
            terminals=self.terminals[idx],
        )

    def __len__(self):
        return self.size


def preprocess(image: np.ndarray, cell_px: int) -> np.ndarray:
    """Grayscale, one value per grid cell, as bytes."""
    gray = image.astype(np.float64) @ LUMA
    h, w = gray.shape[0] // cell_px, gray.shape[1] // cell_px
    cells = gray.reshape(h, cell_px, w, cell_px).mean(axis=(1, 3))
    return np.clip(np.rint(cells), 0, 255).astype(np.uint8).ravel()


class DQNLearner:
    def __init__(self, env: GameEnv, cfg: DQNConfig):
        self.env = env
        self.cfg = cfg
        width, height = env.grid_size
        self.net = DenseNet((width * height, *cfg.hidden, len(env.keys)), seed=cfg.seed)
        self.target = self.net.copy()
        self.buffer = ReplayBuffer(cfg.capacity, width * height)
        self.rng = np.random.default_rng(cfg.seed)
        self.updates = 0
        self.samples_consumed = 0
        self.losses: List[float] = []

    def observe_frame(self) -> np.ndarray:
        return preprocess(self.env.frame(self.cfg.cell_px), self.cfg.cell_px)

    def act(self, frame: np.ndarray, epsilon: float) -> int:
        if self.rng.random() < epsilon:
            return int(self.rng.integers(len(self.env.keys)))
        return int(np.argmax(forward(self.net, frame / 255.0)))

    def learn(self) -> Optional[float]:
        if len(self.buffer) < self.cfg.warmup:
            return None
        batch = self.buffer.sample(self.cfg.batch_size, self.rng)
        loss, grads = backward(self.net, batch, self.cfg.gamma, self.target)
        for p, g in zip(self.net.params(), grads):
            p -= self.cfg.lr * g
        self.updates += 1
        self.samples_consumed += len(batch)
        if self.updates % self.cfg.target_sync == 0:
            self.target = self.net.copy()
        return loss

    def train(self, epochs: int, eval_interval: int = 0,
              on_interval: Optional[Callable[[int, DenseNet], None]] = None,
              progress: bool = False) -> List[Tuple[int, float]]:
        curve: List[Tuple[int, float]] = []
        if epochs <= 0:
            return curve
        episode = 0
        self.env.reset(seed=episode_seed(self.cfg.seed, episode))
        frame = self.observe_frame()
        for t in tqdm(range(epochs), desc=f"dqn {self.env.spec.name}", disable=not progress, mininterval=1.0):
            action = self.act(frame, self.cfg.epsilon(t))
            step = self.env.step(self.env.keys[action])
            next_frame = self.observe_frame()
            reward = float(np.clip(step.reward, -1.0, 1.0))
            self.buffer.add(frame, action, reward, next_frame, step.done)
            loss = self.learn()
            if loss is not None and self.updates % 1000 == 0:
                self.losses.append(loss)
            if step.done:
                curve.append((t + 1, float(self.env.score)))
                episode += 1
                self.env.reset(seed=episode_seed(self.cfg.seed, episode))
                next_frame = self.observe_frame()
            frame = next_frame
            if on_interval is not None and eval_interval and (t + 1) % eval_interval == 0:
                on_interval(t + 1, self.net)
        if on_interval is not None and eval_interval and epochs % eval_interval:
            on_interval(epochs, self.net)
        if not self.net.is_finite():
            logger.warning("%s: non-finite parameters after %d updates", self.env.spec.name, self.updates)
        logger.info("%s: %d steps, %d updates, %d samples", self.env.spec.name, epochs, self.updates,
                    self.samples_consumed)
        return curve


def dqn_train(env: GameEnv, epochs: int, cfg: DQNConfig = DQNConfig(), **kwargs) -> Tuple[DenseNet, List[Tuple[int, float]]]:
    learner = DQNLearner(env, cfg)
    curve = learner.train(epochs, **kwargs)
    return learner.net, curve


def evaluate_dqn(env: GameEnv, net: DenseNet, seeds: Iterable[int], cell_px: int = 1) -> List[float]:
    scores = []
    for seed in seeds:
        env.reset(seed=seed)
        while True:
            frame = preprocess(env.frame(cell_px), cell_px) / 255.0
            step = env.step(env.keys[int(np.argmax(forward(net, frame)))])
            if step.done:
                scores.append(float(env.score))
                break
    return scores


def save_checkpoint(net: DenseNet, path: str):
    header = CHECKPOINT_MAGIC + b"\nlayers " + " ".join(map(str, net.sizes)).encode("ascii") + b"\n"
    with open(path, "wb") as f:
        f.write(header)
        f.write(net.flat().astype("<f8").tobytes())


def load_checkpoint(path: str) -> DenseNet:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 2)
    if len(parts) != 3 or parts[0] != CHECKPOINT_MAGIC or not parts[1].startswith(b"layers "):
        raise ArtifactFormatError(f"{path} is not a DQN-lite checkpoint")
    sizes = [int(v) for v in parts[1][len(b"layers "):].split()]
    net = DenseNet(sizes, zero=True)
    values = np.frombuffer(parts[2], dtype="<f8")
    if values.size != net.flat().size:
        raise ArtifactFormatError(f"{path}: expected {net.flat().size} parameters, found {values.size}")
    net.set_flat(values.astype(np.float64))
    return net
