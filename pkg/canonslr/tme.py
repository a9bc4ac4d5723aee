"""
Temporal motion relational enhancement.

Spatial tokens of adjacent frames are linked through a sparse graph: every
token of frame t points at the K tokens of frame t + 1 it correlates with
most in a shared query/key space. One graph convolution over that graph
aggregates motion-consistent context, and the result is added back to the
stage features through a learnable gate that starts at zero.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from canonslr.errors import InvalidArgumentError

DEFAULT_TOP_K = 4
MAX_PROJECTION_DIM = 64


@dataclass
class TemporalGraph:
    """
    Token graph of one stage.

    `nodes` holds all tokens frame after frame, node (t, i) at row
    t * tokens_per_frame + i. `edges` is a [E, 2] long tensor of directed
    (source, target) node pairs. `weights` are per-edge strengths; None
    means every edge has weight 1.
    """

    nodes: torch.Tensor
    edges: torch.Tensor
    num_frames: int
    tokens_per_frame: int
    weights: torch.Tensor | None = None

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])


def tokenize(features: torch.Tensor) -> torch.Tensor:
    """Reshape stage features [C, T, H, W] into per-frame tokens [T, H*W, C]."""
    channels, num_frames, height, width = features.shape
    return features.permute(1, 2, 3, 0).reshape(num_frames, height * width, channels)


def untokenize(tokens: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Inverse of `tokenize`: tokens [T, H*W, C] back to [C, T, H, W]."""
    num_frames, num_tokens, channels = tokens.shape
    if num_tokens != height * width:
        raise InvalidArgumentError(f"{num_tokens} tokens cannot fill a {height}x{width} map")
    return tokens.reshape(num_frames, height, width, channels).permute(3, 0, 1, 2)


def correlate(tokens: torch.Tensor, w_q: torch.Tensor, w_k: torch.Tensor) -> torch.Tensor:
    """
    Scaled query/key correlation between each frame and the next.

    Returns S of shape [T - 1, B, B] with S[t, i, j] = <q_{t,i}, k_{t+1,j}> / sqrt(d);
    an empty [0, B, B] tensor when T < 2.
    """
    d = w_q.shape[1]
    queries = tokens @ w_q
    keys = tokens @ w_k
    return queries[:-1] @ keys[1:].transpose(1, 2) / math.sqrt(d)


def build_graph(similarity: torch.Tensor, k: int, nodes: torch.Tensor | None = None) -> TemporalGraph:
    """
    Keep, for every token of frame t, edges to its K best matches in frame t + 1.

    K is clamped to the number of tokens per frame; equal scores are ranked
    by the lower column index. The selection itself is discrete and carries
    no gradient; each edge is weighted by a softmax over the scores of the
    K edges leaving the same token, so gradients reach the selected entries
    only. With K = 1 every weight is exactly 1.
    """
    if k < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {k}")
    num_pairs, num_tokens, _ = similarity.shape
    k = min(k, num_tokens)
    with torch.no_grad():
        order = torch.sort(similarity, dim=-1, descending=True, stable=True).indices[..., :k]
        frame = torch.arange(num_pairs).view(-1, 1, 1).expand(-1, num_tokens, k)
        row = torch.arange(num_tokens).view(1, -1, 1).expand(num_pairs, -1, k)
        source = frame * num_tokens + row
        target = (frame + 1) * num_tokens + order
        edges = torch.stack([source.reshape(-1), target.reshape(-1)], dim=1)
    weights = torch.softmax(torch.gather(similarity, -1, order), dim=-1).reshape(-1)
    if nodes is None:
        nodes = similarity.new_zeros(((num_pairs + 1) * num_tokens, 0))
    return TemporalGraph(
        nodes=nodes, edges=edges, num_frames=num_pairs + 1, tokens_per_frame=num_tokens, weights=weights
    )


def graph_convolve(graph: TemporalGraph, weight: torch.Tensor, bias: torch.Tensor | None = None) -> torch.Tensor:
    """
    One graph convolution: ReLU(D^-1/2 (A + I) D^-1/2 X W + b).

    `weight` is [C_in, C_out] (applied as X @ weight). A is the symmetrised
    edge set (A[i, j] = A[j, i] = edge weight), every node keeps a self-loop
    of weight 1, and D holds the resulting row sums.
    """
    nodes = graph.nodes
    num_nodes = nodes.shape[0]
    support = nodes @ weight

    edges = graph.edges
    strength = graph.weights if graph.weights is not None else nodes.new_ones(edges.shape[0])
    strength = strength.to(nodes.dtype)
    src = torch.cat([edges[:, 0], edges[:, 1]])
    dst = torch.cat([edges[:, 1], edges[:, 0]])
    strength = torch.cat([strength, strength])

    degree = torch.ones(num_nodes, dtype=nodes.dtype).index_add(0, src, strength)
    inv_sqrt = degree.rsqrt()
    norm = strength * inv_sqrt[src] * inv_sqrt[dst]

    messages = torch.zeros_like(support).index_add(0, src, norm.unsqueeze(1) * support[dst])
    out = support / degree.unsqueeze(1) + messages
    if bias is not None:
        out = out + bias
    return F.relu(out)


def fuse(features: torch.Tensor, enhanced: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
    """Residual fusion F + alpha * enhanced."""
    if features.shape != enhanced.shape:
        raise InvalidArgumentError(
            f"Enhanced features {tuple(enhanced.shape)} do not match stage features {tuple(features.shape)}"
        )
    return features + alpha * enhanced


class TemporalMotionEnhancement(nn.Module):
    """TME block for one residual stage with `channels` feature channels."""

    def __init__(self, channels: int, top_k: int = DEFAULT_TOP_K):
        super().__init__()
        self.top_k = top_k
        dim = min(MAX_PROJECTION_DIM, channels)
        self.w_q = nn.Parameter(torch.empty(channels, dim))
        self.w_k = nn.Parameter(torch.empty(channels, dim))
        self.gcn = nn.Linear(channels, channels)
        self.alpha = nn.Parameter(torch.zeros(()))
        nn.init.xavier_uniform_(self.w_q)
        nn.init.xavier_uniform_(self.w_k)
        nn.init.xavier_uniform_(self.gcn.weight)
        nn.init.zeros_(self.gcn.bias)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """Enhance stage features [C, T, H, W]; identity for single-frame input."""
        channels, num_frames, height, width = features.shape
        if num_frames < 2:
            return features
        tokens = tokenize(features)
        similarity = correlate(tokens, self.w_q, self.w_k)
        graph = build_graph(similarity, self.top_k, nodes=tokens.reshape(-1, channels))
        enhanced = graph_convolve(graph, self.gcn.weight.t(), self.gcn.bias)
        enhanced = untokenize(enhanced.reshape(num_frames, height * width, channels), height, width)
        return fuse(features, enhanced, self.alpha)
