"""Set-level and staged testing: combining statistics, cluster tests,
hierarchical gating, and two-stage screening.

The common thread is spending the testing budget on fewer, better
units: pool hypotheses that live or die together into one combined
test, or let a cheap first look decide which hypotheses deserve a
multiplicity-corrected second look.

Stage-2 p-values in two_stage_screen must come from data independent
of the stage-1 screen; nothing here can check that, so it is the
caller's obligation.  Dependent stage statistics would need
conditional p-values, which this module does not compute.
"""

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2, norm

from .errors import DegenerateCombinationWarning, TreeStructureError, ValidationError
from .procedures import (
    PValueSet,
    RejectionResult,
    bh_step_up,
    weighted_bh,
)

__all__ = [
    "ClusterPartition",
    "TreeNode",
    "HypothesisTree",
    "HierarchicalResult",
    "combine_pvalues",
    "cluster_test",
    "hierarchical_test",
    "two_stage_screen",
]

_COMBINERS = ("fisher", "stouffer", "simes")


def _values(p):
    if isinstance(p, PValueSet):
        return p.values
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"p-values must be one-dimensional, got shape {arr.shape}")
    if arr.size and (np.any(~np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError("p-values must be finite and in [0, 1]")
    return arr


def combine_pvalues(p, method="fisher"):
    """Collapse a group of p-values into one.

    fisher   : chi-squared survival of -2 sum(log p) on 2k dof
    stouffer : normal survival of the mean-scaled sum of z-scores
    simes    : min over ranks of k p_(i) / i

    A single-element group returns its value unchanged under every
    method.  An exact zero makes the fisher and stouffer statistics
    infinite; the combined value is then exactly 0 and a
    DegenerateCombinationWarning is emitted as the flag.
    """
    p = _values(p)
    if p.size == 0:
        raise ValidationError("cannot combine an empty group")
    if method not in _COMBINERS:
        raise ValidationError(
            f"unknown combining method {method!r}; expected one of {_COMBINERS}"
        )
    if p.size == 1:
        return float(p[0])
    k = p.size
    if method == "simes":
        ranked = np.sort(p) * k / np.arange(1, k + 1)
        return float(ranked.min())
    if np.any(p == 0.0):
        warnings.warn(
            f"exact zero p-value makes the {method} statistic infinite; "
            "returning 0",
            DegenerateCombinationWarning,
            stacklevel=2,
        )
        return 0.0
    if method == "fisher":
        stat = -2.0 * math.fsum(math.log(v) for v in p)
        return float(chi2.sf(stat, 2 * k))
    z_sum = math.fsum(norm.isf(v) for v in p)
    return float(norm.sf(z_sum / math.sqrt(k)))


@dataclass(frozen=True, eq=False)
class ClusterPartition:
    """Partition of hypotheses 0..n-1 into labeled clusters.

    Built from a per-hypothesis label sequence; clusters and sizes are
    derived, with labels ordered by first appearance.
    """

    assignments: tuple
    labels: tuple = field(init=False)
    clusters: dict = field(init=False)
    sizes: dict = field(init=False)

    def __post_init__(self):
        assignments = tuple(self.assignments)
        if not assignments:
            raise ValidationError("partition needs at least one hypothesis")
        object.__setattr__(self, "assignments", assignments)
        clusters = {}
        for idx, label in enumerate(assignments):
            clusters.setdefault(label, []).append(idx)
        clusters = {lab: np.asarray(idx, dtype=np.int64) for lab, idx in clusters.items()}
        object.__setattr__(self, "labels", tuple(clusters))
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(
            self, "sizes", {lab: int(idx.size) for lab, idx in clusters.items()}
        )

    @property
    def n(self):
        return len(self.assignments)


def cluster_test(p, partition, q, method="fisher", size_weighting=False):
    """Combine within clusters, then run a step-up scan across clusters.

    Returns a RejectionResult whose indices refer to positions in
    partition.labels.  With size_weighting the across-cluster scan is
    weighted BH with weights proportional to cluster sizes, so big
    clusters get looser bounds; otherwise plain BH.
    """
    p = _values(p)
    if not isinstance(partition, ClusterPartition):
        partition = ClusterPartition(tuple(partition))
    if partition.n != p.size:
        raise ValidationError(
            f"partition covers {partition.n} hypotheses, got {p.size} p-values"
        )
    combined = np.array(
        [combine_pvalues(p[partition.clusters[lab]], method) for lab in partition.labels]
    )
    if size_weighting:
        sizes = np.array([partition.sizes[lab] for lab in partition.labels], dtype=float)
        inner = weighted_bh(combined, sizes, q)
        method_name = "cluster_weighted_bh"
    else:
        inner = bh_step_up(combined, q)
        method_name = "cluster_bh"
    return RejectionResult(
        method=method_name,
        n=inner.n,
        q=inner.q,
        rejected=inner.rejected,
        order=inner.order,
        thresholds=inner.thresholds,
    )


@dataclass(frozen=True)
class TreeNode:
    """One node of a hypothesis tree.

    members are 0-based indices into the flat p-value vector; p_value,
    when given, overrides combining.  parent_id None marks a root.
    """

    node_id: str
    parent_id: str | None = None
    members: tuple = ()
    p_value: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(int(i) for i in self.members))
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ValidationError(
                f"node {self.node_id!r}: p-value {self.p_value} outside [0, 1]"
            )


@dataclass(frozen=True, eq=False)
class HypothesisTree:
    """Validated forest of hypothesis families.

    Checks: unique ids, parents exist, no cycles, child members nested
    inside parent members, and every non-root node able to produce a
    p-value (explicitly or through its members).  levels maps each node
    to its depth, roots at zero.
    """

    nodes: tuple
    roots: tuple = field(init=False)
    children: dict = field(init=False)
    levels: dict = field(init=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        by_id = {}
        for node in nodes:
            if node.node_id in by_id:
                raise TreeStructureError(f"duplicate node id {node.node_id!r}")
            by_id[node.node_id] = node
        children = {node.node_id: [] for node in nodes}
        roots = []
        for node in nodes:
            if node.parent_id is None:
                roots.append(node.node_id)
                continue
            if node.parent_id not in by_id:
                raise TreeStructureError(
                    f"node {node.node_id!r} references missing parent {node.parent_id!r}"
                )
            children[node.parent_id].append(node.node_id)
        if not roots:
            raise TreeStructureError("tree has no root node")
        levels = {}
        queue = deque((root, 0) for root in roots)
        while queue:
            node_id, depth = queue.popleft()
            levels[node_id] = depth
            for child in children[node_id]:
                queue.append((child, depth + 1))
        if len(levels) != len(nodes):
            stranded = sorted(set(by_id) - set(levels))
            raise TreeStructureError(
                f"cycle detected; unreachable nodes: {', '.join(map(repr, stranded))}"
            )
        for node in nodes:
            if node.parent_id is None:
                continue
            parent = by_id[node.parent_id]
            if parent.members and node.members:
                if not set(node.members) <= set(parent.members):
                    raise TreeStructureError(
                        f"node {node.node_id!r} members are not nested in "
                        f"parent {parent.node_id!r}"
                    )
            if node.p_value is None and not node.members:
                raise TreeStructureError(
                    f"node {node.node_id!r} has neither a p-value nor members"
                )
        object.__setattr__(self, "roots", tuple(roots))
        object.__setattr__(
            self, "children", {k: tuple(v) for k, v in children.items()}
        )
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "_by_id", by_id)

    def node(self, node_id):
        return self._by_id[node_id]


@dataclass(frozen=True, eq=False)
class HierarchicalResult:
    """Outcome of gated testing down a hypothesis tree.

    rejected_nodes includes the roots, which act as always-open gates;
    per_family_traces maps a parent node id to the RejectionResult of
    the scan over its children, family_children records the child ids
    in definition order, and family_pvalues the node p-values that were
    scanned.  visited counts families actually tested.
    """

    rejected_nodes: frozenset
    per_family_traces: dict
    family_children: dict
    family_pvalues: dict
    visited: int


def hierarchical_test(tree, p, q, node_method="fisher"):
    """Test a hypothesis tree top-down with gated BH scans.

    Children of every root form the first families; each rejected node
    opens its own children as a new family, tested by BH at the same q.
    Children of unrejected nodes are never looked at.  Node p-values
    come from combining their members' p-values with node_method unless
    the node carries an explicit one.
    """
    p = _values(p)
    if not isinstance(tree, HypothesisTree):
        tree = HypothesisTree(tuple(tree))

    def node_p(node_id):
        node = tree.node(node_id)
        if node.p_value is not None:
            return node.p_value
        if not node.members:
            raise ValidationError(f"node {node_id!r} has no way to produce a p-value")
        members = np.asarray(node.members, dtype=np.int64)
        if members.min() < 0 or members.max() >= p.size:
            raise ValidationError(
                f"node {node_id!r} references hypothesis indices outside 0..{p.size - 1}"
            )
        return combine_pvalues(p[members], node_method)

    rejected = set(tree.roots)
    traces = {}
    family_children = {}
    family_pvalues = {}
    visited = 0
    queue = deque(tree.roots)
    while queue:
        parent = queue.popleft()
        kids = tree.children[parent]
        if not kids:
            continue
        family_p = np.array([node_p(k) for k in kids])
        result = bh_step_up(family_p, q)
        traces[parent] = result
        family_children[parent] = kids
        family_pvalues[parent] = family_p
        visited += 1
        for idx in result.rejected:
            rejected.add(kids[idx])
            queue.append(kids[idx])
    return HierarchicalResult(
        rejected_nodes=frozenset(rejected),
        per_family_traces=traces,
        family_children=family_children,
        family_pvalues=family_pvalues,
        visited=visited,
    )


def two_stage_screen(stage1_p, stage2_p, alpha1, q):
    """Screen at alpha1 on stage-1 data, then BH the survivors on stage 2.

    Survivors are hypotheses with stage1_p <= alpha1.  BH runs on their
    stage-2 p-values with n equal to the survivor count; the returned
    indices refer to the original hypotheses.  Stage-2 entries for
    non-survivors are never read and may be NaN.  The result keeps the
    original n for masking but stores one threshold per survivor.
    """
    s1 = _values(stage1_p)
    s2 = stage2_p.values if isinstance(stage2_p, PValueSet) else np.asarray(
        stage2_p, dtype=np.float64
    )
    if s2.shape != s1.shape:
        raise ValidationError(
            f"stage-1 and stage-2 must index the same hypotheses, "
            f"got lengths {s1.size} and {s2.size}"
        )
    alpha1 = float(alpha1)
    if not 0.0 < alpha1 <= 1.0:
        raise ValidationError(f"alpha1 must lie in (0, 1], got {alpha1}")
    survivors = np.nonzero(s1 <= alpha1)[0]
    surviving = s2[survivors]
    if np.any(~np.isfinite(surviving)) or (
        surviving.size and (surviving.min() < 0.0 or surviving.max() > 1.0)
    ):
        raise ValidationError("stage-2 p-values of survivors must be finite in [0, 1]")
    inner = bh_step_up(surviving, q)
    return RejectionResult(
        method="two_stage_screen",
        n=int(s1.size),
        q=inner.q,
        rejected=survivors[inner.rejected],
        order=survivors[inner.order],
        thresholds=inner.thresholds,
    )
