# -*- coding: utf-8 -*-
"""State-space math: ZOH discretization, LTI recurrence and kernel,
and the input-dependent (selective) scan.

Shapes follow the usual selective-scan convention:
    u: (B, L, D) input, delta: (B, L, 1) or (B, L, D) step sizes,
    A: (D, N) diagonal state matrix, B, C: (B, L, N), D: (D,)
"""

import math
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from .errors import InvalidArgumentError
from .utils import check_finite
from .const import (
    TAYLOR_THRESHOLD,
    DT_MIN,
    DT_MAX,
    DEFAULT_CHUNK
)


class DiscreteParams(NamedTuple):
    A_bar: torch.Tensor
    B_bar: torch.Tensor


def _as_real(value, dtype=None):
    if torch.is_tensor(value):
        return value if dtype is None else value.to(dtype)
    return torch.as_tensor(value, dtype=dtype or torch.get_default_dtype())


def zoh_gain(dA):
    """(exp(x) - 1) / x, first-order Taylor 1 + x/2 near zero"""
    small = dA.abs() < TAYLOR_THRESHOLD
    safe = torch.where(small, torch.ones_like(dA), dA)
    return torch.where(small, 1 + dA / 2, torch.expm1(safe) / safe)


def discretize_zoh(A, B, delta):
    """Zero-order hold: A_bar = exp(delta A), B_bar = (delta A)^-1 (A_bar - 1) delta B"""
    A = _as_real(A)
    B = _as_real(B, A.dtype)
    delta = _as_real(delta, A.dtype)
    if not (delta > 0).all():
        raise InvalidArgumentError(
            "delta must be positive, got {}".format(delta.min().item()))
    dA = delta * A
    return DiscreteParams(torch.exp(dA), zoh_gain(dA) * delta * B)


def lti_scan_recurrent(disc, C, x):
    """y_t = C . h_t with h_t = A_bar h_{t-1} + B_bar x_t, h_0 = 0.

    disc.A_bar, disc.B_bar, C: (N,); x: (..., L)
    """
    A_bar, B_bar = disc
    C = torch.as_tensor(C, dtype=A_bar.dtype)
    x = torch.as_tensor(x, dtype=A_bar.dtype)
    if A_bar.shape != B_bar.shape or C.shape != A_bar.shape:
        raise InvalidArgumentError("A_bar, B_bar and C must share shape (N,)")
    h = x.new_zeros(*x.shape[:-1], A_bar.shape[-1])
    ys = []
    for t in range(x.shape[-1]):
        h = A_bar * h + B_bar * x[..., t, None]
        ys.append((h * C).sum(-1))
    return torch.stack(ys, dim=-1)


def lti_kernel(disc, C, length):
    """K_bar[k] = C . A_bar^k . B_bar for k < length"""
    if length <= 0:
        raise InvalidArgumentError(
            "Kernel length must be positive, got {}".format(length))
    A_bar, B_bar = disc
    C = torch.as_tensor(C, dtype=A_bar.dtype)
    k = torch.arange(length, dtype=A_bar.dtype, device=A_bar.device)
    powers = A_bar.unsqueeze(0) ** k.unsqueeze(1)
    return (C * powers * B_bar).sum(-1)


def causal_convolve(kernel, x):
    """y_t = sum_{k <= t} kernel[k] x[t - k], evaluated by FFT"""
    length = x.shape[-1]
    n = 2 * length
    y = torch.fft.irfft(torch.fft.rfft(x, n=n) * torch.fft.rfft(kernel, n=n),
                        n=n)
    return y[..., :length]


def selective_scan_ref(u, delta, A, B, C, D=None):
    """Sequential reference evaluation, one step at a time"""
    batch, length, dim = u.shape
    dA = delta.unsqueeze(-1) * A
    A_bar = torch.exp(dA)
    B_bar = zoh_gain(dA) * delta.unsqueeze(-1) * B.unsqueeze(2)
    h = u.new_zeros(batch, dim, A.shape[-1])
    ys = []
    for t in range(length):
        h = A_bar[:, t] * h + B_bar[:, t] * u[:, t, :, None]
        ys.append((h * C[:, t, None, :]).sum(-1))
    y = torch.stack(ys, dim=1)
    if D is not None:
        y = y + u * D
    return y


def selective_scan_chunked(u, delta, A, B, C, D=None, chunk_size=DEFAULT_CHUNK):
    """Chunked evaluation of selective_scan_ref.

    Inside a chunk h_t = sum_{s<=t} exp(cum_t - cum_s) B_bar_s u_s plus the
    carried state decayed by exp(cum_t), where cum is the running sum of
    delta*A within the chunk. Only the chunk carry is sequential.
    """
    batch, length, dim = u.shape
    dA = delta.unsqueeze(-1) * A
    Bu = zoh_gain(dA) * delta.unsqueeze(-1) * B.unsqueeze(2) \
        * u.unsqueeze(-1)
    pad = (-length) % chunk_size
    if pad:
        dA = F.pad(dA, (0, 0, 0, 0, 0, pad))
        Bu = F.pad(Bu, (0, 0, 0, 0, 0, pad))
    dA = rearrange(dA, 'b (c t) d n -> b c t d n', t=chunk_size)
    Bu = rearrange(Bu, 'b (c t) d n -> b c t d n', t=chunk_size)
    cum = dA.cumsum(dim=2)
    # decay[t, s] = exp(cum_t - cum_s) for s <= t
    diff = cum.unsqueeze(3) - cum.unsqueeze(2)
    mask = torch.ones(chunk_size, chunk_size, dtype=torch.bool,
                      device=u.device).tril()
    decay = diff.masked_fill(~mask[:, :, None, None], float('-inf')).exp()
    local = torch.einsum('bctsdn,bcsdn->bctdn', decay, Bu)
    carry = cum.exp()
    h = u.new_zeros(batch, dim, A.shape[-1])
    states = []
    for c in range(local.shape[1]):
        chunk = local[:, c] + carry[:, c] * h.unsqueeze(1)
        states.append(chunk)
        h = chunk[:, -1]
    states = rearrange(torch.stack(states, dim=1), 'b c t d n -> b (c t) d n')
    y = torch.einsum('bldn,bln->bld', states[:, :length], C)
    if D is not None:
        y = y + u * D
    return y


def selective_scan(params, x, chunk_size=None):
    """Run one SelectiveSSM over x: (B, L, D) -> (B, L, D)"""
    if x.dim() != 3 or x.shape[1] < 1:
        raise InvalidArgumentError(
            "Expected a (batch, L>=1, channels) sequence, got {}".format(
                tuple(x.shape)))
    check_finite(x, "selective scan input")
    delta, A, B, C, D = params.discretization_inputs(x)
    if chunk_size is None:
        chunk_size = params.chunk_size
    if chunk_size:
        return selective_scan_chunked(x, delta, A, B, C, D, chunk_size)
    return selective_scan_ref(x, delta, A, B, C, D)


def bidirectional_scan(params_fwd, params_bwd, seq, chunk_size=None):
    """Forward scan plus the re-reversed scan of the reversed sequence"""
    forward = selective_scan(params_fwd, seq, chunk_size)
    backward = selective_scan(params_bwd, seq.flip(1), chunk_size).flip(1)
    return forward + backward


class SelectiveSSM(nn.Module):
    """Parameters of one selective scan: A = -exp(A_log), D skip,
    and the input projections for the step size, B and C.
    """

    def __init__(self, d_model, d_state, use_skip=True,
                 chunk_size=DEFAULT_CHUNK, dt_min=DT_MIN, dt_max=DT_MAX):
        super(SelectiveSSM, self).__init__()
        self.d_model = d_model
        self.d_state = d_state
        self.chunk_size = chunk_size
        self.delta_proj = nn.Linear(d_model, 1)
        self.B_proj = nn.Linear(d_model, d_state, bias=False)
        self.C_proj = nn.Linear(d_model, d_state, bias=False)
        # A_n = -(n + 1)
        A_log = torch.log(torch.arange(1, d_state + 1, dtype=torch.float32))
        self.A_log = nn.Parameter(A_log.repeat(d_model, 1))
        if use_skip:
            self.D_skip = nn.Parameter(torch.ones(d_model))
        else:
            self.register_parameter('D_skip', None)
        self._init_delta(dt_min, dt_max)

    def _init_delta(self, dt_min, dt_max):
        """Bias such that softplus(bias) is log-uniform in [dt_min, dt_max]"""
        dt = math.exp(torch.rand(1).item() *
                      (math.log(dt_max) - math.log(dt_min)) + math.log(dt_min))
        with torch.no_grad():
            self.delta_proj.bias.fill_(dt + math.log(-math.expm1(-dt)))
            self.delta_proj.weight.uniform_(-dt, dt)

    @property
    def A(self):
        return -torch.exp(self.A_log)

    def discretization_inputs(self, x):
        delta = F.softplus(self.delta_proj(x))
        return delta, self.A, self.B_proj(x), self.C_proj(x), self.D_skip

    def forward(self, x):
        return selective_scan(self, x)

    def extra_repr(self):
        return "d_model={}, d_state={}, chunk_size={}".format(
            self.d_model, self.d_state, self.chunk_size)

