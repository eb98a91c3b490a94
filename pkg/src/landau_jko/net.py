"""Vector-field network u(v): fixed d -> 32 -> 32 -> 32 -> d MLP with swish.

Parameters live in a single flat float64 vector with layout

    [W1 (32 x d, row-major), b1 (32),
     W2 (32 x 32), b2 (32),
     W3 (32 x 32), b3 (32),
     W4 (d x 32),  b4 (d)]

so optimizers and checkpoints are independent of the layer structure.  The
input Jacobian is assembled analytically layer by layer (a product of weight
matrices and activation-derivative diagonals), built from differentiable ops
so that parameter gradients of anything containing it — including the mixed
d^2 u / (d theta d v) terms of the implicit objective — come out of the
reverse-mode pass exactly.

All randomness is drawn from numpy PCG64 generators; torch is used as a
deterministic compute engine only.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import torch

__all__ = ["VectorFieldNet", "AffineField", "param_gradient", "swish"]

HIDDEN = (32, 32, 32)

_t64 = dict(dtype=torch.float64)


def swish(x: torch.Tensor) -> torch.Tensor:
    """swish(x) = x * sigmoid(x)."""
    return x * torch.sigmoid(x)


def swish_prime(x: torch.Tensor) -> torch.Tensor:
    s = torch.sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def _layer_sizes(dim: int) -> list[tuple[int, int]]:
    widths = [dim, *HIDDEN, dim]
    return [(widths[k + 1], widths[k]) for k in range(len(widths) - 1)]


class VectorFieldNet:
    """Fully connected field u: R^d -> R^d, 3 hidden layers of width 32, swish.

    ``params`` is the flat torch tensor; set ``requires_grad`` before building
    loss expressions that need parameter gradients.
    """

    activation: Callable[[torch.Tensor], torch.Tensor] = staticmethod(swish)
    activation_prime: Callable[[torch.Tensor], torch.Tensor] = staticmethod(swish_prime)

    def __init__(self, dim: int, params: torch.Tensor):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.dim = dim
        self.shapes = _layer_sizes(dim)
        n = sum(o * i + o for o, i in self.shapes)
        if params.numel() != n:
            raise ValueError(f"expected {n} parameters for dim {dim}, got {params.numel()}")
        self.params = params

    # -- construction -----------------------------------------------------

    @classmethod
    def n_params(cls, dim: int) -> int:
        return sum(o * i + o for o, i in _layer_sizes(dim))

    @classmethod
    def zeros(cls, dim: int) -> "VectorFieldNet":
        return cls(dim, torch.zeros(cls.n_params(dim), **_t64))

    @classmethod
    def init(
        cls,
        dim: int,
        mode: str = "truncated_normal",
        seed: int | np.random.Generator = 0,
        previous: "VectorFieldNet | None" = None,
    ) -> "VectorFieldNet":
        """Fresh network.

        ``truncated_normal``: biases zero, weights ~ N(0, 1/fan_in) truncated
        at +-2 standard deviations.  ``warm_start``: copy of ``previous``.
        """
        if mode == "warm_start":
            if previous is None:
                raise ValueError("warm_start requires a previous network")
            if previous.dim != dim:
                raise ValueError(
                    f"dimension mismatch on warm start: previous dim {previous.dim}, requested {dim}"
                )
            return cls(dim, previous.params.detach().clone())
        if mode != "truncated_normal":
            raise ValueError(f"unknown init mode {mode!r}")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        chunks = []
        for out_f, in_f in _layer_sizes(dim):
            std = 1.0 / np.sqrt(in_f)
            w = _truncated_normal(rng, (out_f, in_f), std, 2.0)
            chunks.append(w.reshape(-1))
            chunks.append(np.zeros(out_f))
        flat = torch.from_numpy(np.concatenate(chunks))
        return cls(dim, flat)

    def clone(self) -> "VectorFieldNet":
        other = VectorFieldNet(self.dim, self.params.detach().clone())
        other.activation = self.activation
        other.activation_prime = self.activation_prime
        return other

    # -- parameter views ---------------------------------------------------

    def layers(self) -> list[tuple[torch.Tensor, torch.Tensor]]:
        """(weight, bias) views into the flat parameter vector."""
        out = []
        off = 0
        for out_f, in_f in self.shapes:
            w = self.params[off : off + out_f * in_f].view(out_f, in_f)
            off += out_f * in_f
            b = self.params[off : off + out_f]
            off += out_f
            out.append((w, b))
        return out

    def param_block_names(self) -> list[str]:
        names = []
        for k in range(len(self.shapes)):
            names += [f"W{k + 1}", f"b{k + 1}"]
        return names

    def param_block_slices(self) -> list[slice]:
        slices = []
        off = 0
        for out_f, in_f in self.shapes:
            slices.append(slice(off, off + out_f * in_f))
            off += out_f * in_f
            slices.append(slice(off, off + out_f))
            off += out_f
        return slices

    # -- evaluation ---------------------------------------------------------

    def forward_t(self, v: torch.Tensor) -> torch.Tensor:
        """u(v) for a batch of inputs, shape (M, d) -> (M, d)."""
        act = self.activation
        x = v
        layers = self.layers()
        for w, b in layers[:-1]:
            x = act(x @ w.T + b)
        w, b = layers[-1]
        return x @ w.T + b

    def jacobian_t(self, v: torch.Tensor) -> torch.Tensor:
        """Input Jacobian [du_a/dv_b](v), shape (M, d, d), analytic chain rule."""
        act, actp = self.activation, self.activation_prime
        layers = self.layers()
        x = v
        jac = None  # running product D_k W_k ... D_1 W_1, shape (M, width, d)
        for w, b in layers[:-1]:
            z = x @ w.T + b
            dp = actp(z)
            if jac is None:
                jac = dp.unsqueeze(-1) * w.unsqueeze(0)
            else:
                jac = dp.unsqueeze(-1) * torch.matmul(w, jac)
            x = act(z)
        w, _ = layers[-1]
        return torch.matmul(w, jac)

    def forward(self, v: np.ndarray) -> np.ndarray:
        """Numpy convenience wrapper around :meth:`forward_t`."""
        vt = torch.from_numpy(np.atleast_2d(np.asarray(v, dtype=np.float64)))
        with torch.no_grad():
            out = self.forward_t(vt).numpy()
        return out[0] if np.asarray(v).ndim == 1 else out

    def input_jacobian(self, v: np.ndarray) -> np.ndarray:
        vt = torch.from_numpy(np.atleast_2d(np.asarray(v, dtype=np.float64)))
        with torch.no_grad():
            out = self.jacobian_t(vt).numpy()
        return out[0] if np.asarray(v).ndim == 1 else out

    # -- checkpoint ----------------------------------------------------------

    def flat_parameters(self) -> np.ndarray:
        return self.params.detach().numpy().copy()

    def set_flat_parameters(self, flat: np.ndarray) -> None:
        if flat.size != self.params.numel():
            raise ValueError("parameter vector size mismatch")
        with torch.no_grad():
            self.params.copy_(torch.from_numpy(np.asarray(flat, dtype=np.float64)))


class AffineField:
    """Field wrapper u(v) + a + b * v; used for null-space probes and tests."""

    def __init__(self, base, a: np.ndarray | float = 0.0, b: float = 0.0):
        self.base = base
        self.dim = base.dim
        a_arr = np.broadcast_to(np.asarray(a, dtype=np.float64), (self.dim,)).copy()
        self._a = torch.from_numpy(a_arr)
        self._b = float(b)

    def forward_t(self, v: torch.Tensor) -> torch.Tensor:
        return self.base.forward_t(v) + self._a + self._b * v

    def jacobian_t(self, v: torch.Tensor) -> torch.Tensor:
        eye = torch.eye(self.dim, **_t64)
        return self.base.jacobian_t(v) + self._b * eye


def param_gradient(loss_fn: Callable[[VectorFieldNet], torch.Tensor], net: VectorFieldNet) -> np.ndarray:
    """Exact reverse-mode gradient of a scalar loss with respect to net.params.

    ``loss_fn`` may compose forward/Jacobian evaluations, kernel terms, and
    smooth arithmetic; any dependence of intermediate positions on the
    parameters is differentiated through.  Raises on non-finite values, naming
    the offending parameter block.
    """
    params = net.params.detach().clone().requires_grad_(True)
    live = VectorFieldNet(net.dim, params)
    live.activation = net.activation
    live.activation_prime = net.activation_prime
    loss = loss_fn(live)
    if not torch.isfinite(loss):
        raise FloatingPointError(f"non-finite loss value {loss.item()!r}")
    (grad,) = torch.autograd.grad(loss, params)
    g = grad.numpy()
    if not np.all(np.isfinite(g)):
        for name, sl in zip(net.param_block_names(), net.param_block_slices()):
            if not np.all(np.isfinite(g[sl])):
                raise FloatingPointError(f"non-finite gradient in block {name}")
    return g


def _truncated_normal(rng: np.random.Generator, shape: Sequence[int], std: float, clip: float) -> np.ndarray:
    """N(0, std^2) truncated at +-clip standard deviations, by resampling."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > clip
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > clip
    return out * std
