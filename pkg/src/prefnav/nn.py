"""Minimal float64 network core used by every trained model in the repo.

Dense multi-layer perceptrons with hand-derived reverse-mode gradients,
bias-corrected Adam, a two-layer gated recurrent stack for the sequence
predictor, finite-difference gradient checking, and a checkpoint format.
Kept deliberately small: states are a dozen dimensions and everything
runs on one core, so exactness and determinism beat throughput.
"""

from __future__ import annotations

import json
import math

import numpy as np

_ACTIVATIONS = ("relu", "tanh", "linear", "sigmoid")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_grad(name: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "tanh":
        return 1.0 - out * out
    if name == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(z)


class Mlp:
    """Fully connected net; layer i maps sizes[i] -> sizes[i+1].

    Hidden layers share one activation, the output layer has its own.
    forward() caches the per-layer pre-activations needed by backward().
    """

    def __init__(self, sizes, hidden_act="relu", out_act="linear", rng=None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if hidden_act not in _ACTIVATIONS or out_act not in _ACTIVATIONS:
            raise ValueError("unknown activation")
        rng = rng or np.random.default_rng()
        self.sizes = tuple(int(s) for s in sizes)
        self.acts = ["relu"] * (len(sizes) - 2) + [out_act]
        for i in range(len(sizes) - 2):
            self.acts[i] = hidden_act
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))
        self._cache = None

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def parameters(self) -> list:
        """Flat list of parameter arrays (weights then bias per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x.reshape(1, -1) if squeeze else x
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"input size {h.shape[1]} != {self.sizes[0]}")
        cache = {"inputs": [h], "pre": [], "squeeze": squeeze}
        for w, b, act in zip(self.weights, self.biases, self.acts):
            z = h @ w + b
            h = _act(act, z)
            cache["pre"].append(z)
            cache["inputs"].append(h)
        self._cache = cache
        return h[0] if squeeze else h

    def backward(self, grad_out: np.ndarray):
        """Gradients of a scalar loss given dLoss/dOutput.

        Returns (param_grads, grad_input) where param_grads aligns with
        parameters(). Requires a preceding forward() call.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        cache = self._cache
        g = np.asarray(grad_out, dtype=float)
        if cache["squeeze"] and g.ndim == 1:
            g = g.reshape(1, -1)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            z = cache["pre"][i]
            out = cache["inputs"][i + 1]
            gz = g * _act_grad(self.acts[i], z, out)
            grads_w[i] = cache["inputs"][i].T @ gz
            grads_b[i] = gz.sum(axis=0)
            g = gz @ self.weights[i].T
        param_grads = []
        for gw, gb in zip(grads_w, grads_b):
            param_grads.append(gw)
            param_grads.append(gb)
        grad_input = g[0] if cache["squeeze"] else g
        return param_grads, grad_input

    def clone(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.acts = list(self.acts)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other._cache = None
        return other

    def state_arrays(self) -> dict:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out

    def load_arrays(self, arrays: dict):
        for i in range(len(self.weights)):
            w, b = arrays[f"w{i}"], arrays[f"b{i}"]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError("checkpoint shape mismatch")
            self.weights[i] = np.asarray(w, dtype=float)
            self.biases[i] = np.asarray(b, dtype=float)


def soft_update(target: Mlp, main: Mlp, tau: float):
    """target <- (1 - tau) * target + tau * main, elementwise."""
    for tp, mp in zip(target.parameters(), main.parameters()):
        tp *= 1.0 - tau
        tp += tau * mp


class AdamState:
    """Bias-corrected Adam accumulators for one parameter list."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(state: AdamState, params, grads):
    """One in-place Adam update; raises if parameters stop being finite."""
    if len(params) != len(state.m) or len(grads) != len(state.m):
        raise ValueError("parameter/gradient count mismatch")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("non-finite parameter after update")


# ---------------------------------------------------------------------------
# Gated recurrent stack


class GruCell:
    """Single gated recurrent layer (update/reset gates, tanh candidate)."""

    def __init__(self, n_in, n_hidden, rng):
        self.n_in = n_in
        self.n_hidden = n_hidden
        bi = 1.0 / math.sqrt(n_in)
        bh = 1.0 / math.sqrt(n_hidden)
        u = rng.uniform
        self.wz, self.wr, self.wh = (u(-bi, bi, (n_in, n_hidden)) for _ in range(3))
        self.uz, self.ur, self.uh = (u(-bh, bh, (n_hidden, n_hidden)) for _ in range(3))
        self.bz, self.br, self.bh = (u(-bh, bh, n_hidden) for _ in range(3))

    def parameters(self):
        return [self.wz, self.wr, self.wh, self.uz, self.ur, self.uh, self.bz, self.br, self.bh]

    def step(self, x, h):
        """One recurrence step on (B, n_in) input; returns (h_new, cache)."""
        z = _act("sigmoid", x @ self.wz + h @ self.uz + self.bz)
        r = _act("sigmoid", x @ self.wr + h @ self.ur + self.br)
        hc = np.tanh(x @ self.wh + (r * h) @ self.uh + self.bh)
        h_new = (1.0 - z) * h + z * hc
        return h_new, (x, h, z, r, hc)

    def backward_step(self, cache, dh_new, grads):
        """Accumulate parameter grads for one step; returns (dx, dh_prev)."""
        x, h, z, r, hc = cache
        dz = dh_new * (hc - h)
        dhc = dh_new * z
        dh_prev = dh_new * (1.0 - z)
        ghc = dhc * (1.0 - hc * hc)
        grads["wh"] += x.T @ ghc
        grads["uh"] += (r * h).T @ ghc
        grads["bh"] += ghc.sum(axis=0)
        drh = ghc @ self.uh.T
        dr = drh * h
        dh_prev = dh_prev + drh * r
        gz = dz * z * (1.0 - z)
        grads["wz"] += x.T @ gz
        grads["uz"] += h.T @ gz
        grads["bz"] += gz.sum(axis=0)
        dh_prev = dh_prev + gz @ self.uz.T
        gr = dr * r * (1.0 - r)
        grads["wr"] += x.T @ gr
        grads["ur"] += h.T @ gr
        grads["br"] += gr.sum(axis=0)
        dh_prev = dh_prev + gr @ self.ur.T
        dx = ghc @ self.wh.T + gz @ self.wz.T + gr @ self.wr.T
        return dx, dh_prev


class GruStack:
    """Stack of gated recurrent layers unrolled over short windows."""

    def __init__(self, n_in, n_hidden, n_layers=2, rng=None):
        rng = rng or np.random.default_rng()
        self.cells = []
        for i in range(n_layers):
            self.cells.append(GruCell(n_in if i == 0 else n_hidden, n_hidden, rng))
        self.n_in = n_in
        self.n_hidden = n_hidden
        self._caches = None
        self._batch = None

    def parameters(self):
        out = []
        for c in self.cells:
            out.extend(c.parameters())
        return out

    def init_hidden(self, batch=1):
        return [np.zeros((batch, self.n_hidden)) for _ in self.cells]

    def step(self, x, hidden):
        """Single-step inference; returns (top-layer output, new hidden)."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h_in = x.reshape(1, -1) if squeeze else x
        new_hidden = []
        for cell, h in zip(self.cells, hidden):
            h_new, _ = cell.step(h_in, h)
            new_hidden.append(h_new)
            h_in = h_new
        out = h_in[0] if squeeze else h_in
        return out, new_hidden

    def forward(self, seq: np.ndarray) -> np.ndarray:
        """Run a (T, B, n_in) window from zero hidden; returns final (B, H)."""
        seq = np.asarray(seq, dtype=float)
        if seq.ndim == 2:
            seq = seq[:, None, :]
        T, B, _ = seq.shape
        hidden = self.init_hidden(B)
        caches = [[] for _ in self.cells]
        for t in range(T):
            h_in = seq[t]
            for li, cell in enumerate(self.cells):
                h_new, cache = cell.step(h_in, hidden[li])
                caches[li].append(cache)
                hidden[li] = h_new
                h_in = h_new
        self._caches = caches
        self._batch = B
        return hidden[-1]

    def backward(self, d_final: np.ndarray):
        """BPTT from the gradient at the final top-layer hidden state.

        Returns parameter gradients aligned with parameters().
        """
        if self._caches is None:
            raise RuntimeError("backward called before forward")
        T = len(self._caches[0])
        B = self._batch
        names = ("wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh")
        grad_maps = [{n: np.zeros_like(getattr(c, n)) for n in names} for c in self.cells]
        # dh injections per layer per time step, from the layer above
        inject = [[np.zeros((B, self.n_hidden)) for _ in range(T)] for _ in self.cells]
        inject[-1][T - 1] = np.asarray(d_final, dtype=float).reshape(B, -1)
        for li in range(len(self.cells) - 1, -1, -1):
            cell = self.cells[li]
            dh = np.zeros((B, self.n_hidden))
            for t in range(T - 1, -1, -1):
                dh = dh + inject[li][t]
                dx, dh = cell.backward_step(self._caches[li][t], dh, grad_maps[li])
                if li > 0:
                    inject[li - 1][t] += dx
        grads = []
        for gm in grad_maps:
            grads.extend(gm[n] for n in names)
        return grads

    def state_arrays(self) -> dict:
        out = {}
        for i, c in enumerate(self.cells):
            for n in ("wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh"):
                out[f"cell{i}_{n}"] = getattr(c, n)
        return out

    def load_arrays(self, arrays: dict):
        for i, c in enumerate(self.cells):
            for n in ("wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh"):
                a = np.asarray(arrays[f"cell{i}_{n}"], dtype=float)
                if a.shape != getattr(c, n).shape:
                    raise ValueError("checkpoint shape mismatch")
                setattr(c, n, a)


def seq_step(stack: GruStack, x, hidden):
    """Single recurrent update: (output, new hidden). Hidden starts at
    init_hidden() at the beginning of a window."""
    return stack.step(x, hidden)


# ---------------------------------------------------------------------------
# Gradient checking


def finite_difference_check(loss_fn, params, rng, n_probes=16, h=1e-5):
    """Max relative error between analytic and central-difference grads.

    loss_fn() -> (scalar loss, grads aligned with params); it must be
    deterministic (fix batches and noise draws before calling). Probes
    n_probes random parameter entries.
    """
    _, grads = loss_fn()
    worst = 0.0
    flat_sizes = [p.size for p in params]
    total = sum(flat_sizes)
    for _ in range(n_probes):
        k = int(rng.integers(total))
        pi = 0
        while k >= flat_sizes[pi]:
            k -= flat_sizes[pi]
            pi += 1
        p = params[pi].reshape(-1)
        orig = p[k]
        p[k] = orig + h
        lp, _ = loss_fn()
        p[k] = orig - h
        lm, _ = loss_fn()
        p[k] = orig
        numeric = (lp - lm) / (2.0 * h)
        analytic = grads[pi].reshape(-1)[k]
        denom = max(abs(numeric), abs(analytic), 1e-6)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(path, model_kind: str, arrays: dict, seed=None, train_steps=0, extra=None):
    """Single-file .npz with a JSON manifest describing the shapes."""
    manifest = {
        "model_kind": model_kind,
        "layer_shapes": {k: list(v.shape) for k, v in arrays.items()},
        "seed": seed,
        "train_steps": int(train_steps),
        "extra": extra or {},
    }
    np.savez(path, __manifest__=np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path):
    """Returns (manifest dict, arrays dict); validates shapes."""
    with np.load(path) as data:
        manifest = json.loads(bytes(data["__manifest__"]).decode())
        arrays = {k: data[k] for k in data.files if k != "__manifest__"}
    for k, shape in manifest["layer_shapes"].items():
        if k not in arrays or list(arrays[k].shape) != shape:
            raise ValueError(f"checkpoint shape mismatch for {k}")
    return manifest, arrays
