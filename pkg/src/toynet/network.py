"""
A small fully convolutional network with hand-written backpropagation.

The network maps an h x w x 3 image to a feature map with the same spatial size and
C + 1 channels:

    conv1  3x3, 3 -> widths[0], stride 1, ReLU
    conv2  3x3, widths[0] -> widths[1], stride 2, ReLU
    conv3+ 3x3, widths[k-1] -> widths[k], stride 1, ReLU (one per remaining width)
    nearest-neighbour 2x upsampling
    head   3x3, widths[-1] -> C + 1, stride 1, no activation

Every convolution zero-pads by one pixel ("same"). Odd heights and widths are padded by
one row or column at the bottom or right before the first layer and cropped from the
output, so the stride-2 / 2x-upsampling pair lines up exactly.

Tensors are laid out as (height, width, channels). Kernels follow the usual
(out_ch, in_ch, 3, 3) layout. The convolution uses sliding-window views and tensor
contractions. Backward scatters the column gradient back with nine strided adds,
which keeps results bitwise reproducible.

Classes:
    Architecture: Channel widths, class count and dtype, plus the derived layer plan.
    LayerSpec: One convolution of the plan.
    NetParams: Weights and biases of every layer.
    ForwardCache: Activations kept by `forward` for `backward`.

Functions:
    init_params: He-initialised parameters, deterministic per seed.
    forward: Image to feature map.
    backward: Feature-map gradient to parameter gradients.
    predict: Per-pixel argmax labels.
    to_network_input: Scales 8-bit RGB to [-0.5, 0.5].

Example Usage:
    arch = Architecture(num_classes=4)
    params = init_params(arch, seed=0)
    f, cache = forward(params, to_network_input(image))
    grads = backward(params, cache, loss.grad)
"""

from dataclasses import dataclass, field
import logging
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from src.lib.core import Dims, FeatureMap
from src.losses.labels import PixelLabelMap
from src.lib.exceptions import (
    InvalidArchitectureError,
    ImageTooSmallError,
    CacheMismatchError,
)

MIN_IMAGE_SIZE = 8
KERNEL = 3
DEFAULT_WIDTHS = (16, 32, 32)
SUPPORTED_DTYPES = ("float32", "float64")

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerSpec:
    """
    One 3x3 convolution of the layer plan.
    """
    name: str
    in_ch: int
    out_ch: int
    stride: int
    relu: bool
    upsample_before: bool = False

    @property
    def weight_shape(self):
        return (self.out_ch, self.in_ch, KERNEL, KERNEL)

    @property
    def fan_in(self):
        return self.in_ch * KERNEL * KERNEL


@dataclass(frozen=True)
class Architecture:
    """
    Architecture descriptor of the toy network.

    Attributes:
        num_classes (int): Object class count C; the head emits C + 1 channels.
        widths (tuple[int, ...]): Hidden channel widths, at least two. The second
            layer downsamples by 2.
        dtype (str): "float32" for training, "float64" for gradient checks.
    """
    num_classes: int
    widths: tuple = DEFAULT_WIDTHS
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if int(self.num_classes) < 1:
            raise InvalidArchitectureError(f"num_classes must be >= 1, got {self.num_classes}")
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise InvalidArchitectureError(
                f"Need at least two positive hidden widths, got {self.widths}")
        if self.dtype not in SUPPORTED_DTYPES:
            raise InvalidArchitectureError(f"Unsupported dtype '{self.dtype}'")

    @property
    def channels(self):
        return self.num_classes + 1

    def layers(self):
        """
        The ordered convolution plan.

        Returns:
            list[LayerSpec]: Hidden layers followed by the head.
        """
        plan = []
        in_ch = 3
        for k, width in enumerate(self.widths):
            plan.append(LayerSpec(f"conv{k + 1}", in_ch, width, 2 if k == 1 else 1, True))
            in_ch = width
        plan.append(LayerSpec(f"conv{len(self.widths) + 1}", in_ch, self.channels, 1, False,
                              upsample_before=True))
        return plan

    def tensor_shapes(self):
        """Name to shape of every parameter tensor, in layer order."""
        shapes = {}
        for layer in self.layers():
            shapes[f"{layer.name}.weight"] = layer.weight_shape
            shapes[f"{layer.name}.bias"] = (layer.out_ch,)
        return shapes

    def to_dict(self):
        """
        JSON-ready descriptor. The downsample and upsample positions are derived
        from the widths and recorded for readers of the checkpoint.
        """
        plan = self.layers()
        return {
            "num_classes": self.num_classes,
            "widths": list(self.widths),
            "dtype": self.dtype,
            "downsample": [layer.name for layer in plan if layer.stride == 2],
            "upsample_before": [layer.name for layer in plan if layer.upsample_before],
        }

    @classmethod
    def from_dict(cls, data):
        """
        Rebuilds an architecture from `to_dict` output.

        Raises:
            InvalidArchitectureError: If fields are missing or the recorded
                down/upsample positions disagree with the widths.
        """
        try:
            arch = cls(int(data["num_classes"]), tuple(data["widths"]), str(data.get("dtype", "float32")))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArchitectureError(f"Malformed architecture descriptor: {data!r}") from e
        expected = arch.to_dict()
        for key in ("downsample", "upsample_before"):
            if key in data and list(data[key]) != expected[key]:
                raise InvalidArchitectureError(
                    f"Descriptor field '{key}'={data[key]} does not match widths {arch.widths}")
        return arch


@dataclass
class NetParams:
    """
    Weights and biases of the network, keyed "conv1.weight", "conv1.bias", ...

    Attributes:
        arch (Architecture): The descriptor the tensors were built for.
        tensors (dict[str, np.ndarray]): Parameter arrays in layer order.
    """
    arch: Architecture
    tensors: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        """
        Raises:
            InvalidArchitectureError: If a tensor is missing, misshapen or non-finite.
        """
        shapes = self.arch.tensor_shapes()
        if set(shapes) != set(self.tensors):
            raise InvalidArchitectureError(
                f"Tensor names {sorted(self.tensors)} do not match {sorted(shapes)}")
        ordered = {}
        for name, shape in shapes.items():
            tensor = np.asarray(self.tensors[name], dtype=self.arch.dtype)
            if tensor.shape != shape:
                raise InvalidArchitectureError(
                    f"Tensor '{name}' has shape {tensor.shape}, expected {shape}")
            if not np.all(np.isfinite(tensor)):
                raise InvalidArchitectureError(f"Tensor '{name}' holds non-finite values")
            ordered[name] = tensor
        self.tensors = ordered

    def names(self):
        return list(self.tensors)

    def copy(self):
        return NetParams(self.arch, {name: t.copy() for name, t in self.tensors.items()})

    def weight(self, layer):
        return self.tensors[f"{layer}.weight"]

    def bias(self, layer):
        return self.tensors[f"{layer}.bias"]

    def astype(self, dtype):
        """The same parameters under an architecture with another dtype."""
        arch = Architecture(self.arch.num_classes, self.arch.widths, dtype)
        return NetParams(arch, {name: t.astype(dtype) for name, t in self.tensors.items()})


@dataclass
class ForwardCache:
    """
    Activations recorded by `forward`.

    Attributes:
        arch (Architecture): Architecture of the parameters that produced the cache.
        dims (Dims): Input (and output) size before padding.
        padded (tuple[int, int]): Even-sized working shape.
        inputs (dict[str, np.ndarray]): Input of every convolution.
        active (dict[str, np.ndarray]): ReLU masks of the hidden layers.
    """
    arch: Architecture
    dims: Dims
    padded: tuple
    inputs: dict
    active: dict


def init_params(arch, seed):
    """
    He initialisation: weights ~ N(0, 2 / fan_in), biases zero.

    Args:
        arch (Architecture): Architecture descriptor.
        seed (int | np.random.SeedSequence): Seed; equal seeds give identical tensors.

    Returns:
        NetParams: Fresh parameters.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for layer in arch.layers():
        std = np.sqrt(2.0 / layer.fan_in)
        tensors[f"{layer.name}.weight"] = rng.normal(0.0, std, size=layer.weight_shape).astype(arch.dtype)
        tensors[f"{layer.name}.bias"] = np.zeros(layer.out_ch, dtype=arch.dtype)
    log.debug("Initialised %d tensors for %s", len(tensors), arch)
    return NetParams(arch, tensors)


def to_network_input(image):
    """
    Scales an 8-bit RGB grid to [-0.5, 0.5].
    """
    return np.asarray(image, dtype=np.float64) / 255.0 - 0.5


def _windows(x, stride):
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    return sliding_window_view(xp, (KERNEL, KERNEL), axis=(0, 1))[::stride, ::stride]


def _conv_forward(x, weight, bias, stride):
    return np.tensordot(_windows(x, stride), weight, axes=([2, 3, 4], [1, 2, 3])) + bias


def _conv_backward(x, weight, stride, dout, need_dx=True):
    windows = _windows(x, stride)
    d_weight = np.tensordot(dout, windows, axes=([0, 1], [0, 1]))
    d_bias = dout.sum(axis=(0, 1))
    if not need_dx:
        return d_weight, d_bias, None
    dcols = np.tensordot(dout, weight, axes=([2], [0]))
    out_h, out_w = dout.shape[:2]
    dxp = np.zeros((x.shape[0] + 2, x.shape[1] + 2, x.shape[2]), dtype=dout.dtype)
    for ky in range(KERNEL):
        for kx in range(KERNEL):
            dxp[ky:ky + stride * (out_h - 1) + 1:stride,
                kx:kx + stride * (out_w - 1) + 1:stride] += dcols[:, :, :, ky, kx]
    return d_weight, d_bias, dxp[1:-1, 1:-1]


def _upsample(x):
    return x.repeat(2, axis=0).repeat(2, axis=1)


def _upsample_backward(dout):
    h, w, channels = dout.shape
    return dout.reshape(h // 2, 2, w // 2, 2, channels).sum(axis=(1, 3))


def forward(params, image):
    """
    Runs the network on one image.

    Args:
        params (NetParams): Network parameters.
        image (np.ndarray): Real (h, w, 3) grid, usually from `to_network_input`.

    Returns:
        tuple[FeatureMap, ForwardCache]: Scores of shape (h * w, C + 1) and the cache
        `backward` needs.

    Raises:
        ImageTooSmallError: If h or w is below 8 or the grid is not (h, w, 3).
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ImageTooSmallError(f"Expected an (h, w, 3) image, got shape {image.shape}")
    h, w = image.shape[:2]
    if h < MIN_IMAGE_SIZE or w < MIN_IMAGE_SIZE:
        raise ImageTooSmallError(
            f"Image is {h}x{w}, the network needs at least {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}")
    padded = (h + h % 2, w + w % 2)
    x = np.zeros(padded + (3,), dtype=params.arch.dtype)
    x[:h, :w] = image

    inputs, active = {}, {}
    for layer in params.arch.layers():
        if layer.upsample_before:
            x = _upsample(x)
        inputs[layer.name] = x
        x = _conv_forward(x, params.weight(layer.name), params.bias(layer.name), layer.stride)
        if layer.relu:
            active[layer.name] = x > 0
            x = np.where(active[layer.name], x, 0).astype(x.dtype)
    scores = x[:h, :w].astype(np.float64)
    cache = ForwardCache(params.arch, Dims(h, w), padded, inputs, active)
    return FeatureMap.from_grid(scores), cache


def backward(params, cache, grad_f):
    """
    Back-propagates dL/df to every weight and bias.

    Args:
        params (NetParams): The parameters `forward` ran with.
        cache (ForwardCache): The cache `forward` returned.
        grad_f (FeatureMap): Gradient of the loss with respect to the output scores.

    Returns:
        dict[str, np.ndarray]: Gradient per tensor name, shaped like the tensor.

    Raises:
        CacheMismatchError: If the cache came from another architecture or the
            gradient has other dims or channels.
    """
    if cache.arch != params.arch:
        raise CacheMismatchError(f"Cache built for {cache.arch}, parameters are {params.arch}")
    if grad_f.dims != cache.dims or grad_f.channels != params.arch.channels:
        raise CacheMismatchError(
            f"Gradient of {grad_f.dims.h}x{grad_f.dims.w}x{grad_f.channels} does not match "
            f"cached {cache.dims.h}x{cache.dims.w}x{params.arch.channels}")

    dtype = params.arch.dtype
    dout = np.zeros(cache.padded + (params.arch.channels,), dtype=dtype)
    dout[:cache.dims.h, :cache.dims.w] = grad_f.as_grid()

    grads = {}
    plan = params.arch.layers()
    for position in range(len(plan) - 1, -1, -1):
        layer = plan[position]
        if layer.relu:
            dout = np.where(cache.active[layer.name], dout, 0).astype(dtype)
        d_weight, d_bias, dout = _conv_backward(
            cache.inputs[layer.name], params.weight(layer.name), layer.stride, dout,
            need_dx=position > 0)
        grads[f"{layer.name}.weight"] = d_weight
        grads[f"{layer.name}.bias"] = d_bias
        if layer.upsample_before:
            dout = _upsample_backward(dout)
    return {name: grads[name] for name in params.names()}


def argmax_labels(f):
    """
    Per-pixel argmax of a feature map; exact ties go to the lowest channel.
    """
    return PixelLabelMap(f.dims, np.argmax(f.values, axis=1))


def predict(params, image):
    """
    Labels every pixel with its highest-scoring class.

    Returns:
        PixelLabelMap: Labels in 0..C, never the ignore value.
    """
    f, _ = forward(params, image)
    return argmax_labels(f)
