"""SGD with momentum and the warmup-plus-cosine learning-rate rule."""

from __future__ import annotations

import numpy as np


class SGD:
    """Momentum SGD over a ModelParams. Weight decay hits conv/head weights
    only; BN affine parameters and biases are left undecayed. ``active``
    restricts which tensors a step may touch (the freeze mechanism)."""

    def __init__(self, params, momentum: float = 0.937, weight_decay: float = 5e-4):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._decayed = {n for n in params.arrays
                         if params.tags[n] == "conv_or_head" and n.endswith(".w")}
        self.velocities: dict[str, np.ndarray] = {}

    def reset(self):
        self.velocities.clear()

    def step(self, params, grads: dict, lr: float, active: set[str]) -> None:
        for name in sorted(active):
            if not params.trainable[name] or name not in grads:
                continue
            p = params.arrays[name]
            g = grads[name].astype(p.dtype, copy=False)
            if name in self._decayed and self.weight_decay:
                g = g + self.weight_decay * p
            v = self.velocities.get(name)
            if v is None:
                v = np.zeros_like(p)
                self.velocities[name] = v
            v *= self.momentum
            v += g
            p -= lr * v


def lr_at(step: int, total_steps: int, base_lr: float,
          warmup_frac: float = 0.1, final_scale: float = 0.05) -> float:
    """Linear warmup to base_lr, then cosine decay to final_scale * base_lr."""
    total_steps = max(total_steps, 1)
    warmup = max(1, int(round(warmup_frac * total_steps)))
    if step < warmup:
        return base_lr * (step + 1) / warmup
    span = max(total_steps - warmup, 1)
    progress = (step - warmup) / span
    return base_lr * (final_scale
                      + (1.0 - final_scale) * 0.5 * (1.0 + np.cos(np.pi * progress)))
