"""Architecture configuration and latency analysis for the causal
multichannel waveform separator (Demucs-style encoder/decoder with an
LSTM bottleneck; strided convolutions made causal by left zero-padding).
"""

from dataclasses import dataclass, asdict

__all__ = ["DemucsConfig", "algorithmic_latency", "expected_tensors"]


@dataclass(frozen=True)
class DemucsConfig:
    """Hyperparameters of the separator.

    channels: audio channels in and out (the model predicts the target at
    every microphone). Encoder layer i (0-based) outputs hidden * 2**i
    channels; the LSTM width equals the deepest encoder width, so with
    the defaults (5 layers, hidden 64) the bottleneck runs at 1024.
    """

    channels: int
    layers: int = 5
    hidden: int = 64
    kernel: int = 8
    stride: int = 4
    lstm_layers: int = 2
    sample_rate: int = 48000
    normalize_input: bool = True

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if not (self.kernel > self.stride >= 1):
            raise ValueError(
                f"require kernel > stride >= 1, got K={self.kernel} S={self.stride}"
            )
        if self.lstm_layers < 1:
            raise ValueError("lstm_layers must be >= 1")

    @property
    def widths(self):
        """Encoder output channels per layer, shallow to deep."""
        return [self.hidden * (2 ** i) for i in range(self.layers)]

    @property
    def lstm_width(self):
        return self.widths[-1]

    @property
    def stride_total(self):
        return self.stride ** self.layers

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def algorithmic_latency(config):
    """Samples of input needed before the first output sample can be
    emitted by the streaming engine.

    With left zero-padding of kernel - stride per strided convolution,
    frame t at a layer whose input frame u requires raw samples up to
    a*u + b needs raw samples up to (a*S)*t + a*(S-1) + b; transposed
    convolutions on the decoder side only ever reach back to already
    complete frames, so the deepest scale determines the latency:
    one sample more than the raw index the first deepest frame waits for.
    """
    a, b = 1, 0
    for _ in range(config.layers):
        b = a * (config.stride - 1) + b
        a = a * config.stride
    return b + 1


def expected_tensors(config):
    """Canonical tensor table: name -> shape, in serialization order.

    Naming: encoder.{i}.conv (strided K/S conv), encoder.{i}.expand
    (1x1 conv to twice the width, consumed by a GLU), lstm.{j}.* with
    gate order (input, forget, cell, output), decoder.{i}.expand (1x1 +
    GLU), decoder.{i}.convt (transposed conv back up). Decoder indices
    mirror encoder indices: decoder.0 emits the waveform.
    """
    c = config.channels
    k = config.kernel
    widths = config.widths
    w = config.lstm_width
    table = {}
    for i, cout in enumerate(widths):
        cin = c if i == 0 else widths[i - 1]
        table[f"encoder.{i}.conv.weight"] = (cout, cin, k)
        table[f"encoder.{i}.conv.bias"] = (cout,)
        table[f"encoder.{i}.expand.weight"] = (2 * cout, cout, 1)
        table[f"encoder.{i}.expand.bias"] = (2 * cout,)
    for j in range(config.lstm_layers):
        table[f"lstm.{j}.weight_ih"] = (4 * w, w)
        table[f"lstm.{j}.weight_hh"] = (4 * w, w)
        table[f"lstm.{j}.bias_ih"] = (4 * w,)
        table[f"lstm.{j}.bias_hh"] = (4 * w,)
    for i in range(config.layers - 1, -1, -1):
        cw = widths[i]
        cout = c if i == 0 else widths[i - 1]
        table[f"decoder.{i}.expand.weight"] = (2 * cw, cw, 1)
        table[f"decoder.{i}.expand.bias"] = (2 * cw,)
        table[f"decoder.{i}.convt.weight"] = (cw, cout, k)
        table[f"decoder.{i}.convt.bias"] = (cout,)
    return table
