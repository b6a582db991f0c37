"""Multiscale graph-convolutional motion predictor.

The network maps a K x D coefficient matrix (K pose dimensions, D temporal
coefficients) to a predicted coefficient matrix of the same shape:

  1. pose rows are regrouped joint-major into one node per joint and
     embedded to a shared feature width;
  2. per-component MLPs aggregate joint nodes into the two coarser scales;
  3. a stack of interaction units runs a residual graph-conv block per
     scale and injects coarse features into the next finer scale through
     attention (rows of the attention matrix are softmax-normalized over
     the coarse nodes);
  4. per-component MLPs expand the coarse features back to joint rows;
  5. a coarse-to-fine chain of graph-conv layers decodes the three scales
     with additive skips, projects back to coefficient width, and adds the
     input coefficients as a global residual.

The final projection is zero-initialized, so an untrained model returns
its input coefficients exactly: decoded output equals the last observed
frame held constant.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .autodiff import (Tensor, concat_rows, matmul, reshape, softmax_rows,
                       take_rows, tanh, transpose)
from .errors import ValidationError
from .skeleton import SkeletonConfig


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; defaults follow the reference setup."""

    n_coeffs: int
    feature_width: int = 256
    stm_hidden: int = 16
    csb_hidden: int = 512
    csb_proj: int = 64
    sim_stack: int = 3
    gcn_blocks: int = 3
    share_csb: bool = False
    no_stm_mean_pool: bool = False
    no_csb: bool = False
    parallel_decoder: bool = False
    init_seed: int = 0

    def __post_init__(self):
        for field_name in ("n_coeffs", "feature_width", "stm_hidden", "csb_hidden",
                           "csb_proj", "sim_stack", "gcn_blocks"):
            if getattr(self, field_name) < 1:
                raise ValidationError(f"{field_name} must be >= 1, got {getattr(self, field_name)}")


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _param(arr) -> Tensor:
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=True)


class GraphConvLayer:
    """One graph convolution: activation(A @ F @ W + b) with learnable A."""

    def __init__(self, rng, n_nodes: int, d_in: int, d_out: int,
                 activation: str = "tanh", zero_init: bool = False,
                 adjacency_noise: float = 1e-3):
        self.activation = activation
        self.adjacency = _param(np.eye(n_nodes) + rng.uniform(-adjacency_noise,
                                                              adjacency_noise,
                                                              size=(n_nodes, n_nodes)))
        if zero_init:
            self.weight = _param(np.zeros((d_in, d_out)))
        else:
            self.weight = _param(_uniform(rng, d_in, (d_in, d_out)))
        self.bias = _param(np.zeros(d_out))

    def __call__(self, f: Tensor) -> Tensor:
        y = matmul(matmul(self.adjacency, f), self.weight) + self.bias
        return tanh(y) if self.activation == "tanh" else y

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.adjacency", self.adjacency
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


class GraphConvBlock:
    """Residual stack: n_blocks pairs of graph-conv layers, skip around each pair."""

    def __init__(self, rng, n_nodes: int, width: int, n_blocks: int):
        self.pairs = [(GraphConvLayer(rng, n_nodes, width, width),
                       GraphConvLayer(rng, n_nodes, width, width))
                      for _ in range(n_blocks)]

    def __call__(self, f: Tensor) -> Tensor:
        for first, second in self.pairs:
            f = second(first(f)) + f
        return f

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for i, (first, second) in enumerate(self.pairs):
            yield from first.named_parameters(f"{prefix}.block{i}.conv0")
            yield from second.named_parameters(f"{prefix}.block{i}.conv1")


class TwoLayerMlp:
    def __init__(self, rng, d_in: int, hidden: int, d_out: int):
        self.w1 = _param(_uniform(rng, d_in, (d_in, hidden)))
        self.b1 = _param(np.zeros(hidden))
        self.w2 = _param(_uniform(rng, hidden, (hidden, d_out)))
        self.b2 = _param(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return tanh(x @ self.w1 + self.b1) @ self.w2 + self.b2

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for n in ("w1", "b1", "w2", "b2"):
            yield f"{prefix}.{n}", getattr(self, n)


class ThreeLayerMlp:
    def __init__(self, rng, d_in: int, hidden: int, d_out: int):
        self.w1 = _param(_uniform(rng, d_in, (d_in, hidden)))
        self.b1 = _param(np.zeros(hidden))
        self.w2 = _param(_uniform(rng, hidden, (hidden, hidden)))
        self.b2 = _param(np.zeros(hidden))
        self.w3 = _param(_uniform(rng, hidden, (hidden, d_out)))
        self.b3 = _param(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        h = tanh(x @ self.w1 + self.b1)
        h = tanh(h @ self.w2 + self.b2)
        return h @ self.w3 + self.b3

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for n in ("w1", "b1", "w2", "b2", "w3", "b3"):
            yield f"{prefix}.{n}", getattr(self, n)


class AggregateTransform:
    """One two-layer MLP per component, eating its members' concatenated rows."""

    def __init__(self, rng, groups: tuple[tuple[int, ...], ...], width: int, hidden: int):
        self.groups = groups
        self.group_index = [np.asarray(g, dtype=np.intp) for g in groups]
        self.mlps = [TwoLayerMlp(rng, len(g) * width, hidden, width) for g in groups]
        self.width = width

    def __call__(self, f: Tensor) -> Tensor:
        rows = []
        for idx, mlp in zip(self.group_index, self.mlps):
            flat = reshape(take_rows(f, idx), (1, idx.size * self.width))
            rows.append(mlp(flat))
        return concat_rows(*rows)

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for i, mlp in enumerate(self.mlps):
            yield from mlp.named_parameters(f"{prefix}.c{i}")


class ExpandTransform:
    """Width-mirrored MLPs mapping each component row back to its member rows."""

    def __init__(self, rng, groups: tuple[tuple[int, ...], ...], n_targets: int,
                 width: int, hidden: int):
        self.groups = groups
        self.width = width
        self.mlps = [TwoLayerMlp(rng, width, hidden, len(g) * width) for g in groups]
        self.permutation = _scatter_permutation(groups, n_targets)
        self.row_index = [np.asarray([i], dtype=np.intp) for i in range(len(groups))]

    def __call__(self, f: Tensor) -> Tensor:
        chunks = []
        for i, (group, mlp) in enumerate(zip(self.groups, self.mlps)):
            flat = mlp(take_rows(f, self.row_index[i]))
            chunks.append(reshape(flat, (len(group), self.width)))
        stacked = concat_rows(*chunks)
        return take_rows(stacked, self.permutation)

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for i, mlp in enumerate(self.mlps):
            yield from mlp.named_parameters(f"{prefix}.c{i}")


def _scatter_permutation(groups, n_targets: int) -> np.ndarray:
    """Row order that maps [group0 rows, group1 rows, ...] back to target order."""
    position = np.empty(n_targets, dtype=np.intp)
    flat = [m for g in groups for m in g]
    for stacked_row, member in enumerate(flat):
        position[member] = stacked_row
    return position


class MeanPoolAggregate:
    """Parameter-free aggregation: each component is the mean of its members."""

    def __init__(self, groups, n_source: int):
        pool = np.zeros((len(groups), n_source))
        for k, g in enumerate(groups):
            pool[k, list(g)] = 1.0 / len(g)
        self.pool = Tensor(pool)

    def __call__(self, f: Tensor) -> Tensor:
        return matmul(self.pool, f)

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        return iter(())


class MeanPoolExpand:
    """Parameter-free expansion: each member row copies its component's row."""

    def __init__(self, groups, n_targets: int):
        spread = np.zeros((n_targets, len(groups)))
        for k, g in enumerate(groups):
            spread[list(g), k] = 1.0
        self.spread = Tensor(spread)

    def __call__(self, f: Tensor) -> Tensor:
        return matmul(self.spread, f)

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        return iter(())


class CrossScaleBlock:
    """Coarse-to-fine attention injection between two adjacent scales.

    Both projections are three-layer MLPs to a shared width; the attention
    matrix is softmax over coarse nodes per fine row, so the update is
    A @ f_coarse + f_fine.
    """

    def __init__(self, rng, width: int, hidden: int, proj: int):
        self.fine_mlp = ThreeLayerMlp(rng, width, hidden, proj)
        self.coarse_mlp = ThreeLayerMlp(rng, width, hidden, proj)

    def __call__(self, f_coarse: Tensor, f_fine: Tensor) -> tuple[Tensor, Tensor]:
        h_fine = self.fine_mlp(f_fine)
        h_coarse = self.coarse_mlp(f_coarse)
        attention = softmax_rows(matmul(h_fine, transpose(h_coarse)))
        return matmul(attention, f_coarse) + f_fine, attention

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield from self.fine_mlp.named_parameters(f"{prefix}.fine")
        yield from self.coarse_mlp.named_parameters(f"{prefix}.coarse")


class ScaleInteractionUnit:
    """Per-scale residual GCN stacks plus the two cross-scale injections."""

    def __init__(self, rng, node_counts: tuple[int, int, int], width: int,
                 n_blocks: int, csb_pair: tuple[CrossScaleBlock, CrossScaleBlock] | None):
        n1, n2, n3 = node_counts
        self.gcn_s1 = GraphConvBlock(rng, n1, width, n_blocks)
        self.gcn_s2 = GraphConvBlock(rng, n2, width, n_blocks)
        self.gcn_s3 = GraphConvBlock(rng, n3, width, n_blocks)
        self.csb_pair = csb_pair

    def __call__(self, f1: Tensor, f2: Tensor, f3: Tensor,
                 attention_sink: list | None = None) -> tuple[Tensor, Tensor, Tensor]:
        g1 = self.gcn_s1(f1)
        g2 = self.gcn_s2(f2)
        g3 = self.gcn_s3(f3)
        if self.csb_pair is None:
            return g1, g2, g3
        csb_21, csb_32 = self.csb_pair
        out1, att21 = csb_21(g2, g1)
        out2, att32 = csb_32(g3, g2)
        if attention_sink is not None:
            attention_sink.append(("s2_to_s1", att21.data))
            attention_sink.append(("s3_to_s2", att32.data))
        return out1, out2, g3

    def named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield from self.gcn_s1.named_parameters(f"{prefix}.gcn_s1")
        yield from self.gcn_s2.named_parameters(f"{prefix}.gcn_s2")
        yield from self.gcn_s3.named_parameters(f"{prefix}.gcn_s3")


class MGCN:
    """The full predictor over a fixed skeleton and coefficient width."""

    def __init__(self, skeleton: SkeletonConfig, config: ModelConfig):
        self.skeleton = skeleton
        self.config = config
        rng = np.random.default_rng(config.init_seed)
        w = config.feature_width
        n1, n2, n3 = skeleton.n_joints, skeleton.n_s2, skeleton.n_s3
        self.node_input_width = skeleton.dims_per_joint * config.n_coeffs

        self.embed_weight = _param(_uniform(rng, self.node_input_width,
                                            (self.node_input_width, w)))
        self.embed_bias = _param(np.zeros(w))

        groups12 = skeleton.partitions_s1_to_s2
        groups23 = skeleton.partitions_s2_to_s3
        joint_groups3 = skeleton.joint_groups_s3()
        if config.no_stm_mean_pool:
            self.aggregate_12 = MeanPoolAggregate(groups12, n1)
            self.aggregate_23 = MeanPoolAggregate(groups23, n2)
            self.expand_2 = MeanPoolExpand(groups12, n1)
            self.expand_3 = MeanPoolExpand(joint_groups3, n1)
        else:
            self.aggregate_12 = AggregateTransform(rng, groups12, w, config.stm_hidden)
            self.aggregate_23 = AggregateTransform(rng, groups23, w, config.stm_hidden)
            self.expand_2 = ExpandTransform(rng, groups12, n1, w, config.stm_hidden)
            self.expand_3 = ExpandTransform(rng, joint_groups3, n1, w, config.stm_hidden)

        self.shared_csb: tuple[CrossScaleBlock, CrossScaleBlock] | None = None
        if config.no_csb:
            make_pair = lambda: None
        elif config.share_csb:
            self.shared_csb = (CrossScaleBlock(rng, w, config.csb_hidden, config.csb_proj),
                               CrossScaleBlock(rng, w, config.csb_hidden, config.csb_proj))
            make_pair = lambda: self.shared_csb
        else:
            make_pair = lambda: (CrossScaleBlock(rng, w, config.csb_hidden, config.csb_proj),
                                 CrossScaleBlock(rng, w, config.csb_hidden, config.csb_proj))
        self.sim_units = [
            ScaleInteractionUnit(rng, (n1, n2, n3), w, config.gcn_blocks, make_pair())
            for _ in range(config.sim_stack)
        ]

        # All output projections start at zero so an untrained model is the
        # hold-last-frame predictor.
        if config.parallel_decoder:
            self.decoder_parallel = [
                GraphConvLayer(rng, n1, w, self.node_input_width,
                               activation="identity", zero_init=True)
                for _ in range(3)
            ]
        else:
            self.decoder_bottom = GraphConvLayer(rng, n1, w, w)
            self.decoder_middle = GraphConvLayer(rng, n1, w, w)
            self.decoder_top = GraphConvLayer(rng, n1, w, self.node_input_width,
                                              activation="identity", zero_init=True)

        self.attention_maps: list[tuple[str, np.ndarray]] = []

    # -- forward ----------------------------------------------------------

    def forward(self, coeffs) -> Tensor:
        """Predict a K x D coefficient matrix from a K x D input."""
        c = coeffs if isinstance(coeffs, Tensor) else Tensor(coeffs)
        expected = (self.skeleton.k, self.config.n_coeffs)
        if c.shape != expected:
            raise ValidationError(f"expected coefficients of shape {expected}, got {c.shape}")
        nodes = reshape(c, (self.skeleton.n_joints, self.node_input_width))
        f1 = nodes @ self.embed_weight + self.embed_bias
        f2 = self.aggregate_12(f1)
        f3 = self.aggregate_23(f2)

        self.attention_maps = []
        for unit in self.sim_units:
            f1, f2, f3 = unit(f1, f2, f3, self.attention_maps)

        x2 = self.expand_2(f2)
        x3 = self.expand_3(f3)
        if self.config.parallel_decoder:
            p1, p2, p3 = self.decoder_parallel
            out_nodes = p1(f1) + p2(x2) + p3(x3)
        else:
            u = self.decoder_bottom(x3)
            u = self.decoder_middle(u + x2)
            out_nodes = self.decoder_top(u + f1)
        return reshape(out_nodes, expected) + c

    __call__ = forward

    # -- parameter bookkeeping ---------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name, p in self._iter_parameters():
            params[name] = p
        return params

    def _iter_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield "embed.weight", self.embed_weight
        yield "embed.bias", self.embed_bias
        yield from self.aggregate_12.named_parameters("stm.aggregate_12")
        yield from self.aggregate_23.named_parameters("stm.aggregate_23")
        for u, unit in enumerate(self.sim_units):
            yield from unit.named_parameters(f"sim.{u}")
            if unit.csb_pair is not None and self.shared_csb is None:
                yield from unit.csb_pair[0].named_parameters(f"sim.{u}.csb_s2_s1")
                yield from unit.csb_pair[1].named_parameters(f"sim.{u}.csb_s3_s2")
        if self.shared_csb is not None:
            yield from self.shared_csb[0].named_parameters("csb_shared.s2_s1")
            yield from self.shared_csb[1].named_parameters("csb_shared.s3_s2")
        yield from self.expand_2.named_parameters("stm.expand_2")
        yield from self.expand_3.named_parameters("stm.expand_3")
        if self.config.parallel_decoder:
            for i, layer in enumerate(self.decoder_parallel):
                yield from layer.named_parameters(f"decoder.parallel_s{i + 1}")
        else:
            yield from self.decoder_bottom.named_parameters("decoder.bottom")
            yield from self.decoder_middle.named_parameters("decoder.middle")
            yield from self.decoder_top.named_parameters("decoder.top")

    def parameter_count(self) -> int:
        return sum(p.size for p in self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.grad = None

    def hyper_dict(self) -> dict:
        return {"skeleton": self.skeleton.to_dict(), "model": asdict(self.config)}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(arrays) != set(params):
            missing = sorted(set(params) - set(arrays))
            extra = sorted(set(arrays) - set(params))
            raise ValidationError(f"parameter name mismatch: missing {missing}, extra {extra}")
        for name, p in params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValidationError(
                    f"parameter {name} has shape {arr.shape}, expected {p.data.shape}")
            p.data = arr


def expected_parameter_count(skeleton: SkeletonConfig, config: ModelConfig) -> int:
    """Closed-form parameter count; must agree with MGCN.parameter_count()."""
    w = config.feature_width
    h = config.stm_hidden
    win = skeleton.dims_per_joint * config.n_coeffs
    n1, n2, n3 = skeleton.n_joints, skeleton.n_s2, skeleton.n_s3

    def mlp2(d_in, d_out):
        return d_in * h + h + h * d_out + d_out

    def mlp3(d_in, d_out):
        hc = config.csb_hidden
        return d_in * hc + hc + hc * hc + hc + hc * d_out + d_out

    def gc_layer(nodes, d_in, d_out):
        return nodes * nodes + d_in * d_out + d_out

    total = win * w + w  # embedding
    if not config.no_stm_mean_pool:
        for g in skeleton.partitions_s1_to_s2:
            total += mlp2(len(g) * w, w) + mlp2(w, len(g) * w)
        for g in skeleton.partitions_s2_to_s3:
            total += mlp2(len(g) * w, w)
        for g in skeleton.joint_groups_s3():
            total += mlp2(w, len(g) * w)
    per_scale_gcn = sum(gc_layer(n, w, w) for n in (n1, n2, n3)) * 2 * config.gcn_blocks
    total += per_scale_gcn * config.sim_stack
    if not config.no_csb:
        csb_pair = 2 * 2 * mlp3(w, config.csb_proj)
        total += csb_pair if config.share_csb else csb_pair * config.sim_stack
    if config.parallel_decoder:
        total += 3 * gc_layer(n1, w, win)
    else:
        total += 2 * gc_layer(n1, w, w) + gc_layer(n1, w, win)
    return total
