"""The dense average network, its plain feed-forward twin and their parameter layout."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Mapping

import numpy as np

from danet.autodiff import (
    ParameterStore,
    Tensor,
    affine,
    concat,
    conv2d_relu_mean,
    reshape,
    truncated_normal_init,
)
from danet.errors import ContractError
from danet.layers.blocks import (
    CombineRule,
    dense_average_block_forward,
    dense_layer,
    plain_chain_forward,
    se_pooled_forward,
    se_hidden_width,
)

WEEKDAYS = 7
MONTHS = 12
ARCHITECTURES = ("danet", "ann")


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a network.

    ``architecture="ann"`` keeps every parameter of the dense average network
    but runs the block layers as a plain chain.
    """

    architecture: str = "danet"
    combine_rule: str = "average"
    block_count: int = 5
    block_layers: int = 4
    width: int = 128
    se_ratio: int = 16
    kernel_heights: tuple = (1, 2, 3, 4)
    kernel_width: int = 2
    window: int = 48
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kernel_heights", tuple(int(h) for h in self.kernel_heights))
        problems = self.problems()
        if problems:
            raise ContractError("invalid ModelSpec: " + "; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.architecture not in ARCHITECTURES:
            out.append(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.combine_rule not in {r.value for r in CombineRule}:
            out.append(f"combine_rule {self.combine_rule!r} is not a known rule")
        for name in ("block_count", "block_layers", "width", "se_ratio", "kernel_width", "window"):
            if int(getattr(self, name)) < 1:
                out.append(f"{name} must be >= 1")
        if not self.kernel_heights or min(self.kernel_heights) < 1 or max(self.kernel_heights) > self.window:
            out.append(f"kernel_heights must lie in [1, window], got {self.kernel_heights}")
        if self.kernel_width > 2:
            out.append("kernel_width cannot exceed the 2 interleaved slope/load channels")
        return out

    @property
    def calendar_width(self) -> int:
        return WEEKDAYS + MONTHS

    def hidden_depth(self) -> int:
        """Hidden layers excluding input and output.

        The convolution, temperature and calendar branches run side by side and
        count as one stage; the merge layer adds one, each block ``block_layers``.
        """
        return 2 + self.block_count * self.block_layers

    def to_document(self) -> dict:
        doc = asdict(self)
        doc["kernel_heights"] = list(self.kernel_heights)
        return doc

    @classmethod
    def from_document(cls, doc: Mapping) -> "ModelSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ContractError(f"unknown ModelSpec keys: {sorted(unknown)}")
        return cls(**dict(doc))


def parameter_shapes(spec: ModelSpec) -> dict[str, tuple]:
    """Name -> shape for every trainable tensor, in canonical order."""
    w = spec.width
    hidden = se_hidden_width(w, spec.se_ratio)
    shapes: dict[str, tuple] = {}
    for h in spec.kernel_heights:
        shapes[f"conv/k{h}/kernel"] = (h, spec.kernel_width, 1, w)
        shapes[f"conv/k{h}/bias"] = (w,)
        shapes[f"se/k{h}/squeeze/weight"] = (w, hidden)
        shapes[f"se/k{h}/squeeze/bias"] = (hidden,)
        shapes[f"se/k{h}/excite/weight"] = (hidden, w)
        shapes[f"se/k{h}/excite/bias"] = (w,)
    shapes["temperature/weight"] = (spec.window, w)
    shapes["temperature/bias"] = (w,)
    shapes["calendar/weight"] = (spec.calendar_width, w)
    shapes["calendar/bias"] = (w,)
    shapes["merge/weight"] = ((len(spec.kernel_heights) + 2) * w, w)
    shapes["merge/bias"] = (w,)
    concat_rule = spec.architecture == "danet" and spec.combine_rule == CombineRule.CONCAT.value
    for b in range(spec.block_count):
        for layer in range(1, spec.block_layers + 1):
            fan_in = layer * w if concat_rule else w
            shapes[f"block{b}/layer{layer}/weight"] = (fan_in, w)
            shapes[f"block{b}/layer{layer}/bias"] = (w,)
    shapes["output/weight"] = (w, 1)
    shapes["output/bias"] = (1,)
    return shapes


def parameter_count(spec: ModelSpec) -> int:
    return int(sum(np.prod(s) for s in parameter_shapes(spec).values()))


def init_params(spec: ModelSpec, sd: float = 1.0, seed=None, bound: float = 2.0) -> ParameterStore:
    """Fresh truncated-normal parameters; ``seed`` defaults to ``spec.seed``."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    store = ParameterStore()
    for name, shape in parameter_shapes(spec).items():
        store.add(name, truncated_normal_init(shape, sd=sd, seed=rng, bound=bound))
    return store


def _field(bundle, name):
    return getattr(bundle, name, None)


def _prepare_inputs(bundle, spec: ModelSpec):
    """Validate bundle fields; returns batched arrays and whether input was a single bundle."""
    ls = _field(bundle, "LS")
    single = ls is not None and np.ndim(ls) == 2
    expected = {
        "LS": (spec.window, 2),
        "T": (spec.window,),
        "W": (WEEKDAYS,),
        "M": (MONTHS,),
    }
    arrays, bad = {}, []
    batch = None
    for name, tail in expected.items():
        value = _field(bundle, name)
        if value is None:
            bad.append(f"{name}: missing")
            continue
        arr = np.asarray(value, dtype=np.float64)
        if single:
            arr = arr[None]
        if arr.shape[1:] != tail:
            bad.append(f"{name}: shape {arr.shape[1:]} != {tail}")
            continue
        if batch is not None and arr.shape[0] != batch:
            bad.append(f"{name}: batch size {arr.shape[0]} != {batch}")
            continue
        batch = arr.shape[0]
        arrays[name] = arr
    if bad:
        raise ContractError("malformed bundle: " + "; ".join(bad))
    return arrays, single


def _params(params) -> Mapping[str, Tensor]:
    if isinstance(params, ParameterStore):
        return {name: params[name] for name in params}
    return {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in params.items()}


def _block_layers(p, spec, b):
    return [(p[f"block{b}/layer{l}/weight"], p[f"block{b}/layer{l}/bias"])
            for l in range(1, spec.block_layers + 1)]


def _trunk(arrays, p, spec: ModelSpec) -> Tensor:
    """Input branches and merge layer, shared by both architectures."""
    n = arrays["LS"].shape[0]
    ls = Tensor(arrays["LS"].reshape(n, spec.window, 2, 1))
    branches = []
    for h in spec.kernel_heights:
        pooled = conv2d_relu_mean(ls, p[f"conv/k{h}/kernel"], p[f"conv/k{h}/bias"])
        branches.append(se_pooled_forward(pooled, p[f"se/k{h}/squeeze/weight"], p[f"se/k{h}/squeeze/bias"],
                                          p[f"se/k{h}/excite/weight"], p[f"se/k{h}/excite/bias"]))
    branches.append(dense_layer(Tensor(arrays["T"]), p["temperature/weight"], p["temperature/bias"]))
    calendar = np.concatenate([arrays["W"], arrays["M"]], axis=1)
    branches.append(dense_layer(Tensor(calendar), p["calendar/weight"], p["calendar/bias"]))
    return dense_layer(concat(branches, axis=1), p["merge/weight"], p["merge/bias"])


def _head(x: Tensor, p, single: bool) -> Tensor:
    out = affine(x, p["output/weight"], p["output/bias"])
    return reshape(out, () if single else (out.shape[0],))


def danet_forward(bundle, params, spec: ModelSpec) -> Tensor:
    """Forecast in normalised units: scalar for one bundle, ``(N,)`` for a batch.

    ``bundle`` is anything exposing ``LS``, ``T``, ``W`` and ``M`` arrays,
    with or without a leading batch axis.
    """
    arrays, single = _prepare_inputs(bundle, spec)
    p = _params(params)
    x = _trunk(arrays, p, spec)
    for b in range(spec.block_count):
        x = dense_average_block_forward(x, _block_layers(p, spec, b), spec.combine_rule)
    return _head(x, p, single)


def ann_forward(bundle, params, spec: ModelSpec) -> Tensor:
    """Same parameters as :func:`danet_forward`, block layers chained plainly."""
    arrays, single = _prepare_inputs(bundle, spec)
    p = _params(params)
    x = _trunk(arrays, p, spec)
    for b in range(spec.block_count):
        x = plain_chain_forward(x, _block_layers(p, spec, b))
    return _head(x, p, single)


def network_forward(bundle, params, spec: ModelSpec) -> Tensor:
    """Dispatch on ``spec.architecture``."""
    if spec.architecture == "ann":
        return ann_forward(bundle, params, spec)
    return danet_forward(bundle, params, spec)
