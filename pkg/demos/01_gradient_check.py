"""
Backpropagation against finite differences
==========================================

Builds a small ReLU/tanh network, computes parameter gradients by
backpropagation and compares them with central finite differences. Then
takes a few Adam steps on a toy regression and saves a binary snapshot.
"""
import tempfile
from pathlib import Path

import numpy as np

from archer.numcore import (AdamState, adam_step, finite_diff_grad, init_mlp, load_params,
                            mlp_backward, mlp_forward, save_params)

rng = np.random.default_rng(0)
net = init_mlp([3, 8, 8, 1], "tanh", rng)
x = rng.normal(size=(5, 3))

# Loss is the plain sum of outputs, so the output gradient is all ones.
out, cache = mlp_forward(net, x)
analytic = mlp_backward(net, cache, np.ones_like(out)).flat()

probe = net.copy()


def loss(flat):
    probe.set_flat(flat)
    return float(mlp_forward(probe, x)[0].sum())


numeric = finite_diff_grad(loss, net.flat())
rel = np.abs(analytic - numeric).max() / np.abs(numeric).max()
print(f"{analytic.size} parameters, max relative gradient error {rel:.2e}")

# A few Adam steps fitting y = sum(x) with a linear head.
reg = init_mlp([3, 16, 1], "linear", rng)
state = AdamState.for_params(reg)
y = x.sum(axis=1, keepdims=True)
for step in range(1, 301):
    pred, cache = mlp_forward(reg, x)
    grads = mlp_backward(reg, cache, 2.0 * (pred - y) / len(x))
    adam_step(reg, grads, state, lr=1e-2)
    if step % 100 == 0:
        print(f"step {step:3d}  mse {np.mean((pred - y) ** 2):.5f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "reg.bin"
    save_params(reg, path)
    back = load_params(path, output_activation="linear")  # hidden layers default to ReLU
    same = np.array_equal(mlp_forward(back, x)[0], mlp_forward(reg, x)[0])
    print(f"snapshot is {path.stat().st_size} bytes, reload reproduces outputs: {same}")
