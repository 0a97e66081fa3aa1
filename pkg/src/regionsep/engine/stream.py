"""Incremental (streaming) execution of the causal separator.

Input is consumed in blocks of stride**layers samples (one deep frame);
each complete block yields exactly one block of output, so the first
emission happens once algorithmic_latency samples have been pushed.
flush() drains the tail so that the concatenated output matches the
offline forward sample for sample.

State per stream: encoder input tails (kernel - stride samples each),
LSTM hidden/cell, decoder overlap-add carries, and the running
normalization accumulators.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .model import NORM_EPS, CausalDemucs, _conv1x1, _glu

__all__ = ["DemucsStreamer"]


def _conv_frames(buf, w2, bias, kernel, stride):
    """All complete frames of an unpadded buffer; returns (out, leftover)."""
    cin, t = buf.shape
    if t < kernel:
        return np.zeros((w2.shape[0], 0), dtype=np.float32), buf
    nf = (t - kernel) // stride + 1
    win = sliding_window_view(buf, kernel, axis=1)[:, ::stride][:, :nf]
    cols = np.ascontiguousarray(win.transpose(0, 2, 1)).reshape(cin * kernel, nf)
    out = w2 @ cols + bias[:, None]
    return out, buf[:, nf * stride:]


class _ConvTransposeState:
    """Overlap-add tail of one transposed conv (contributions only; the
    bias is added when samples are finalized)."""

    def __init__(self, w, bias, stride):
        self.w = w  # (Cin, Cout, K)
        self.bias = bias
        self.stride = stride
        self.kernel = w.shape[2]
        self.carry = np.zeros((w.shape[1], self.kernel - stride), dtype=np.float32)
        self.frames_in = 0
        self.emitted = 0

    def push(self, x):
        """Feed (Cin, u) frames; returns (Cout, u*stride) finalized samples."""
        u = x.shape[1]
        if u == 0:
            return np.zeros((self.w.shape[1], 0), dtype=np.float32)
        s, k = self.stride, self.kernel
        acc = np.zeros((self.w.shape[1], u * s + k - s), dtype=np.float32)
        acc[:, :k - s] += self.carry
        contrib = np.tensordot(self.w, x, axes=([0], [0]))  # (Cout, K, u)
        for j in range(k):
            acc[:, j:j + u * s:s] += contrib[:, j, :]
        self.carry = acc[:, u * s:]
        self.frames_in += u
        self.emitted += u * s
        return acc[:, :u * s] + self.bias[:, None]

    def pull_tail(self, count):
        """Finalize `count` pending samples from the carry (zero-extended),
        matching the offline trim of the valid transposed-conv output."""
        out = np.zeros((self.w.shape[1], count), dtype=np.float32)
        n = min(count, self.carry.shape[1])
        out[:, :n] = self.carry[:, :n]
        out += self.bias[:, None]
        self.emitted += count
        return out


class DemucsStreamer:
    """Single-owner streaming state over a shared CausalDemucs model.

    normalize: None picks "running" when the model config normalizes
    input, else "off"; "global" is not causal and is rejected.
    """

    def __init__(self, model, normalize=None):
        if not isinstance(model, CausalDemucs):
            raise TypeError("DemucsStreamer expects a CausalDemucs model")
        self.model = model
        cfg = model.config
        self.config = cfg
        if normalize is None:
            mode = "running" if cfg.normalize_input else "off"
        elif normalize is True:
            mode = "running"
        elif normalize is False:
            mode = "off"
        elif normalize in ("running", "off"):
            mode = normalize
        else:
            raise ValueError(
                f"streaming supports normalize in (None, 'running', 'off'), "
                f"got {normalize!r}"
            )
        self.norm_mode = mode
        self.block = cfg.stride_total
        k, s = cfg.kernel, cfg.stride
        self._raw = np.zeros((cfg.channels, 0), dtype=np.float32)
        self._enc_buf = []
        for i in range(cfg.layers):
            cin = cfg.channels if i == 0 else cfg.widths[i - 1]
            self._enc_buf.append(np.zeros((cin, k - s), dtype=np.float32))
        w = cfg.lstm_width
        self._lstm_h = np.zeros((cfg.lstm_layers, w), dtype=np.float32)
        self._lstm_c = np.zeros((cfg.lstm_layers, w), dtype=np.float32)
        self._convt = [
            _ConvTransposeState(model.dec[i]["wt"], model.dec[i]["bt"], s)
            for i in range(cfg.layers)
        ]
        self._s1 = 0.0
        self._s2 = 0.0
        self._count = 0
        self.samples_consumed = 0
        self.samples_emitted = 0
        self._flushed = False

    @property
    def latency(self):
        return self.model.latency

    def _update_sigma(self, xb):
        seg = xb.astype(np.float64)
        self._s1 += float(seg.sum())
        self._s2 += float((seg * seg).sum())
        self._count += seg.size
        var = max(self._s2 / self._count - (self._s1 / self._count) ** 2, 0.0)
        return np.sqrt(var) + NORM_EPS

    def _run_segment(self, xb):
        """Encoder cascade + LSTM over new samples; returns per-layer new
        encoder outputs and the new deep (LSTM) frames."""
        cfg = self.config
        model = self.model
        h = xb
        skips = []
        for i, enc in enumerate(model.enc):
            buf = np.concatenate([self._enc_buf[i], h], axis=1)
            z, self._enc_buf[i] = _conv_frames(
                buf, enc["w2"], enc["b"], cfg.kernel, cfg.stride
            )
            np.maximum(z, 0.0, out=z)
            h = _glu(_conv1x1(z, enc["we"], enc["be"]))
            skips.append(h)
        deep = model.run_lstm(h, state=(self._lstm_h, self._lstm_c))
        return deep, skips

    def _decode(self, x, skips, counts=None):
        """Run new frames down the decoder. counts, when given (flush),
        are the total per-scale frame targets used to drain the carries."""
        cfg = self.config
        model = self.model
        for i in range(cfg.layers - 1, -1, -1):
            if x.shape[1] != skips[i].shape[1]:
                raise AssertionError(
                    f"internal frame misalignment at decoder {i}: "
                    f"{x.shape[1]} vs {skips[i].shape[1]}"
                )
            x = x + skips[i]
            x = _glu(_conv1x1(x, model.dec[i]["we"], model.dec[i]["be"]))
            emitted = self._convt[i].push(x)
            if counts is not None:
                extra = counts[i] - self._convt[i].emitted
                if extra > 0:
                    emitted = np.concatenate(
                        [emitted, self._convt[i].pull_tail(extra)], axis=1
                    )
            if i > 0:
                np.maximum(emitted, 0.0, out=emitted)
            x = emitted
        return x

    def push(self, chunk):
        """Feed (channels, n) samples; returns whatever output became
        final (possibly empty). Chunk sizes do not affect the result."""
        if self._flushed:
            raise RuntimeError("push after flush on a closed stream")
        chunk = np.asarray(chunk)
        if chunk.ndim == 1:
            chunk = chunk[None, :]
        if chunk.ndim != 2 or chunk.shape[0] != self.config.channels:
            raise ValueError(
                f"expected ({self.config.channels}, n) chunk, got {chunk.shape}"
            )
        self.samples_consumed += chunk.shape[1]
        self._raw = np.concatenate(
            [self._raw, np.ascontiguousarray(chunk, dtype=np.float32)], axis=1
        )
        outs = []
        while self._raw.shape[1] >= self.block:
            xb = self._raw[:, :self.block]
            self._raw = self._raw[:, self.block:]
            if self.norm_mode == "running":
                sigma = self._update_sigma(xb)
                deep, skips = self._run_segment(xb / np.float32(sigma))
                out = self._decode(deep, skips) * np.float32(sigma)
            else:
                deep, skips = self._run_segment(xb)
                out = self._decode(deep, skips)
            outs.append(out)
        if outs:
            out = np.concatenate(outs, axis=1)
        else:
            out = np.zeros((self.config.channels, 0), dtype=np.float32)
        self.samples_emitted += out.shape[1]
        return out

    def flush(self):
        """Drain the remainder; afterwards emitted == consumed and the
        stream no longer accepts input."""
        if self._flushed:
            raise RuntimeError("stream already flushed")
        self._flushed = True
        cfg = self.config
        rem = self._raw
        self._raw = np.zeros((cfg.channels, 0), dtype=np.float32)
        if self.norm_mode == "running" and rem.shape[1] > 0:
            sigma = self._update_sigma(rem)
        elif self.norm_mode == "running":
            sigma = (
                np.sqrt(
                    max(
                        self._s2 / self._count - (self._s1 / self._count) ** 2, 0.0
                    )
                )
                + NORM_EPS
                if self._count
                else NORM_EPS
            )
        else:
            sigma = None
        counts = [self.samples_consumed]
        for _ in range(cfg.layers):
            counts.append(counts[-1] // cfg.stride)
        if sigma is not None and rem.shape[1] > 0:
            rem = rem / np.float32(sigma)
        deep, skips = self._run_segment(rem)
        out = self._decode(deep, skips, counts=counts)
        if sigma is not None:
            out = out * np.float32(sigma)
        self.samples_emitted += out.shape[1]
        return out
