"""
Parameterized building blocks: 1-D convolution layers and the shared
encoder / upsampler / gated dilated-causal decoder stack.
"""

from typing import Dict, Iterator, List, Tuple, Union

import numpy as np

from ..exceptions import ShapeMismatchError
from ..numerics import ops
from ..numerics.tensor import Parameter, Tensor
from .config import CnnaeConfig


class Module:
    """Anything that owns Parameters or child modules."""

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{index}.")
            elif isinstance(value, dict):
                for key, item in value.items():
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{key}.")

    def parameters(self) -> Dict[str, Parameter]:
        return dict(self.named_parameters())

    def load_arrays(self, arrays: Dict[str, np.ndarray], strict: bool = True) -> None:
        params = self.parameters()
        if strict:
            missing = sorted(set(params) - set(arrays))
            unexpected = sorted(set(arrays) - set(params))
            if missing or unexpected:
                raise ShapeMismatchError(f"Parameter mismatch: missing {missing}, unexpected {unexpected}")
        for name, values in arrays.items():
            if name in params:
                params[name].assign(values)

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {name: param.data.astype(np.float32) for name, param in self.named_parameters()}


class Conv1d(Module):
    """Convolution layer with uniform +-sqrt(1/fan_in) initialization."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        dilation: int = 1,
        causal: bool = False,
        padding: Union[int, Tuple[int, int]] = 0,
    ):
        bound = np.sqrt(1.0 / (in_channels * kernel_size))
        self.weight = Parameter(rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel_size)))
        self.bias = Parameter(rng.uniform(-bound, bound, size=(out_channels,)))
        self.stride = stride
        self.dilation = dilation
        self.causal = causal
        self.padding = padding

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d(
            x, self.weight, self.bias,
            stride=self.stride, dilation=self.dilation, causal=self.causal, padding=self.padding,
        )


class GatedResidualLayer(Module):
    """tanh(filter) * sigmoid(gate) with residual and skip 1x1 projections."""

    def __init__(self, width: int, kernel_size: int, dilation: int, rng: np.random.Generator):
        self.filter = Conv1d(width, width, kernel_size, rng, dilation=dilation, causal=True)
        self.gate = Conv1d(width, width, kernel_size, rng, dilation=dilation, causal=True)
        self.residual = Conv1d(width, width, 1, rng)
        self.skip = Conv1d(width, width, 1, rng)

    def __call__(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        gated = ops.mul(ops.tanh(self.filter(x)), ops.sigmoid(self.gate(x)))
        return ops.add(x, self.residual(gated)), self.skip(gated)


class Backbone(Module):
    """
    Encoder, x8 upsampler and dilated-causal decoder.

    The encoder is a stack of strided convolutions with one sample of padding
    on each side, so each stride-2 / kernel-4 layer halves an even length
    exactly. The upsampled latent is concatenated with a 1x1 projection of
    the masked input before the decoder blocks.
    """

    def __init__(self, in_channels: int, config: CnnaeConfig, rng: np.random.Generator):
        self.config = config
        widths = [in_channels] + [config.units] * (len(config.kernels) - 1) + [config.z_dim]
        self.encoder: List[Conv1d] = [
            Conv1d(widths[i], widths[i + 1], kernel, rng, stride=stride, padding=self._pad(kernel, stride))
            for i, (kernel, stride) in enumerate(zip(config.kernels, config.strides))
        ]
        self.input_projection = Conv1d(in_channels, config.units, 1, rng)
        self.merge = Conv1d(config.z_dim + config.units, config.units, 1, rng)
        self.layers: List[GatedResidualLayer] = [
            GatedResidualLayer(config.units, config.decoder_kernel, dilation, rng)
            for _ in range(config.decoder_blocks)
            for dilation in config.dilations
        ]
        self.output = Conv1d(config.units, config.units, 1, rng)

    @staticmethod
    def _pad(kernel: int, stride: int) -> Tuple[int, int]:
        total = max(kernel - stride, 0)
        return total // 2, total - total // 2

    @property
    def in_channels(self) -> int:
        return self.input_projection.in_channels

    def encode(self, x: Tensor) -> Tensor:
        h = x
        for index, layer in enumerate(self.encoder):
            h = layer(h)
            if index < len(self.encoder) - 1:
                h = ops.relu(h)
        return h

    def __call__(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        """Returns (decoder features of width `units` x T, latent z_dim x T/8)."""
        z = self.encode(x)
        upsampled = ops.upsample_repeat(z, self.config.upsample)
        h = self.merge(ops.concat([upsampled, self.input_projection(x)], axis=-2))
        skips = None
        for layer in self.layers:
            h, skip = layer(h)
            skips = skip if skips is None else ops.add(skips, skip)
        features = ops.relu(self.output(ops.relu(skips)))
        return features, z


class OutputHeads(Module):
    """Four 1x1 maps from decoder features to K electrode rows each."""

    NAMES = ('signal_mean', 'signal_raw_var', 'derivative_mean', 'derivative_raw_var')

    def __init__(self, width: int, n_electrodes: int, rng: np.random.Generator):
        self.signal_mean = Conv1d(width, n_electrodes, 1, rng)
        self.signal_raw_var = Conv1d(width, n_electrodes, 1, rng)
        self.derivative_mean = Conv1d(width, n_electrodes, 1, rng)
        self.derivative_raw_var = Conv1d(width, n_electrodes, 1, rng)

    def __call__(self, features: Tensor) -> Dict[str, Tensor]:
        return {name: getattr(self, name)(features) for name in self.NAMES}
