"""Offline forward pass of the causal separator, plain numpy (float32).

Every strided convolution is left-padded by kernel - stride zeros so a
frame only ever sees past samples, giving an algorithmic latency of one
deep frame (stride**layers samples) with no dependence on future input
beyond it; the streaming engine reproduces this computation exactly.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .config import algorithmic_latency  # noqa: F401  (re-exported for users)
from .weights import WeightStore

__all__ = ["CausalDemucs", "NORM_EPS"]

NORM_EPS = 1e-3


def _conv_strided(x, w2, bias, kernel, stride):
    """Causal strided conv: x (Cin, T) -> (Cout, T // stride)."""
    cin, t = x.shape
    nf = t // stride
    cout = w2.shape[0]
    if nf == 0:
        return np.zeros((cout, 0), dtype=np.float32)
    xp = np.pad(x, ((0, 0), (kernel - stride, 0)))
    win = sliding_window_view(xp, kernel, axis=1)[:, ::stride][:, :nf]  # (Cin, nf, K)
    cols = np.ascontiguousarray(win.transpose(0, 2, 1)).reshape(cin * kernel, nf)
    return w2 @ cols + bias[:, None]


def _conv1x1(x, w, bias):
    return w @ x + bias[:, None]


def _glu(x):
    half = x.shape[0] // 2
    return x[:half] * expit(x[half:])


def _lstm_step_block(pre, w_hh, b_hh, h, c, out):
    """Sequential LSTM over pre-projected inputs; mutates h, c, fills out."""
    width = h.shape[0]
    for t in range(pre.shape[1]):
        g = pre[:, t] + w_hh @ h + b_hh
        i = expit(g[:width])
        f = expit(g[width:2 * width])
        gg = np.tanh(g[2 * width:3 * width])
        o = expit(g[3 * width:])
        c[:] = f * c + i * gg
        h[:] = o * np.tanh(c)
        out[:, t] = h
    return out


def _conv_transpose(x, w, bias, stride, out_len):
    """Valid transposed conv trimmed/zero-extended to out_len samples.

    x (Cin, T); w (Cin, Cout, K). The bias applies to every output
    position, including those no input frame reaches.
    """
    cin, t = x.shape
    cout = w.shape[1]
    kernel = w.shape[2]
    out = np.zeros((cout, out_len), dtype=np.float32)
    out += bias[:, None]
    if t == 0 or out_len == 0:
        return out
    contrib = np.tensordot(w, x, axes=([0], [0]))  # (Cout, K, T)
    acc_len = (t - 1) * stride + kernel
    acc = np.zeros((cout, acc_len), dtype=np.float32)
    for k in range(kernel):
        acc[:, k:k + t * stride:stride] += contrib[:, k, :]
    n = min(acc_len, out_len)
    out[:, :n] += acc[:, :n]
    return out


def running_block_scales(x, block):
    """Causal per-block normalization scalars.

    Block b (samples [b*block, (b+1)*block)) is scaled by the standard
    deviation over everything up to and including that block, plus
    NORM_EPS. Returns one scalar per block.
    """
    c, t = x.shape
    n_blocks = int(np.ceil(t / block))
    scales = np.empty(n_blocks)
    s1 = 0.0
    s2 = 0.0
    count = 0
    xd = x.astype(np.float64)
    for b in range(n_blocks):
        seg = xd[:, b * block:(b + 1) * block]
        s1 += float(seg.sum())
        s2 += float((seg * seg).sum())
        count += seg.size
        var = max(s2 / count - (s1 / count) ** 2, 0.0)
        scales[b] = np.sqrt(var) + NORM_EPS
    return scales


class CausalDemucs:
    """Inference model over a validated WeightStore."""

    def __init__(self, store):
        if not isinstance(store, WeightStore):
            raise TypeError("CausalDemucs expects a WeightStore")
        store.validate()
        self.config = store.config
        cfg = self.config
        k = cfg.kernel
        self.enc = []
        for i, cout in enumerate(cfg.widths):
            cin = cfg.channels if i == 0 else cfg.widths[i - 1]
            self.enc.append(
                {
                    "w2": store[f"encoder.{i}.conv.weight"].reshape(cout, cin * k),
                    "b": store[f"encoder.{i}.conv.bias"],
                    "we": store[f"encoder.{i}.expand.weight"].reshape(2 * cout, cout),
                    "be": store[f"encoder.{i}.expand.bias"],
                }
            )
        self.lstm = [
            {
                "w_ih": store[f"lstm.{j}.weight_ih"],
                "w_hh": store[f"lstm.{j}.weight_hh"],
                "b_ih": store[f"lstm.{j}.bias_ih"],
                "b_hh": store[f"lstm.{j}.bias_hh"],
            }
            for j in range(cfg.lstm_layers)
        ]
        self.dec = []
        for i in range(cfg.layers):
            cw = cfg.widths[i]
            self.dec.append(
                {
                    "we": store[f"decoder.{i}.expand.weight"].reshape(2 * cw, cw),
                    "be": store[f"decoder.{i}.expand.bias"],
                    "wt": store[f"decoder.{i}.convt.weight"],
                    "bt": store[f"decoder.{i}.convt.bias"],
                }
            )

    @property
    def latency(self):
        return algorithmic_latency(self.config)

    def _norm_mode(self, normalize):
        if normalize is None:
            return "global" if self.config.normalize_input else "off"
        if normalize is True:
            return "global"
        if normalize is False:
            return "off"
        if normalize in ("global", "running", "off"):
            return normalize
        raise ValueError(f"unknown normalize mode {normalize!r}")

    def _encode(self, h, lstm_state=None):
        """Shared encoder + LSTM; returns (deep frames, skip list)."""
        cfg = self.config
        skips = []
        for enc in self.enc:
            h = _conv_strided(h, enc["w2"], enc["b"], cfg.kernel, cfg.stride)
            np.maximum(h, 0.0, out=h)
            h = _glu(_conv1x1(h, enc["we"], enc["be"]))
            skips.append(h)
        h = self.run_lstm(h, lstm_state)
        return h, skips

    def run_lstm(self, x, state=None):
        """Two-layer unidirectional LSTM over (width, frames); `state`
        optionally carries (h, c) arrays of shape (lstm_layers, width)
        which are updated in place."""
        width = self.config.lstm_width
        for j, layer in enumerate(self.lstm):
            if x.shape[1] == 0:
                continue
            pre = layer["w_ih"] @ x + layer["b_ih"][:, None]
            if state is None:
                h = np.zeros(width, dtype=np.float32)
                c = np.zeros(width, dtype=np.float32)
            else:
                h, c = state[0][j], state[1][j]
            out = np.empty((width, x.shape[1]), dtype=np.float32)
            _lstm_step_block(pre, layer["w_hh"], layer["b_hh"], h, c, out)
            x = out
        return x

    def forward(self, audio, normalize=None):
        """Separate a (channels, samples) waveform; output has the same
        shape. `normalize` overrides the config: "global" (whole-signal
        std), "running" (causal block-wise std, what streaming uses), or
        "off"/False.
        """
        cfg = self.config
        x = np.asarray(audio)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] != cfg.channels:
            raise ValueError(
                f"expected ({cfg.channels}, samples) input, got {x.shape}"
            )
        t = x.shape[1]
        if t == 0:
            return np.zeros((cfg.channels, 0), dtype=np.float32)
        x = np.ascontiguousarray(x, dtype=np.float32)
        mode = self._norm_mode(normalize)
        if mode == "global":
            scale = float(np.asarray(x, dtype=np.float64).std()) + NORM_EPS
            x = x / np.float32(scale)
            out_scale = np.float32(scale)
        elif mode == "running":
            block = cfg.stride_total
            scales = running_block_scales(x, block)
            per_sample = np.repeat(scales, block)[:t].astype(np.float32)
            x = x / per_sample[None, :]
            out_scale = per_sample[None, :]
        else:
            out_scale = None

        counts = [t]
        for _ in range(cfg.layers):
            counts.append(counts[-1] // cfg.stride)

        h, skips = self._encode(x)
        for i in range(cfg.layers - 1, -1, -1):
            h = h + skips[i]
            h = _glu(_conv1x1(h, self.dec[i]["we"], self.dec[i]["be"]))
            h = _conv_transpose(
                h, self.dec[i]["wt"], self.dec[i]["bt"], cfg.stride, counts[i]
            )
            if i > 0:
                np.maximum(h, 0.0, out=h)
        if out_scale is not None:
            h = h * out_scale
        return h
