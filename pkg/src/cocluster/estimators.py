"""Estimator facades following scikit-learn's fit/attribute conventions.

These wrap the functional pipeline for callers that want ``get_params`` /
``set_params`` plumbing (grid searches, config sweeps).  ``X`` is a sequence
of images; leave partitions ride along as a fit argument because they are
per-sample structures, not parameters.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .descriptors import DescriptorConfig
from .pipeline import default_schedule, cocluster, multiresolution, video_segment
from .solver import DEFAULT_ITERATION_LIMIT, DEFAULT_NODE_LIMIT
from .validation import coerce_sequence


class _JointClusteringBase(BaseEstimator):
    def _descriptor_config(self) -> DescriptorConfig:
        return DescriptorConfig(
            bins=self.bins,
            cell=self.cell,
            half_disk=self.half_disk,
            window=self.window,
            mu=self.mu,
            color_var=self.color_var,
            shape_var=self.shape_var,
            pos_var=self.pos_var,
        )


class HierarchyCoClustering(_JointClusteringBase):
    """Joint co-clustering of a set of images at one resolution level.

    After ``fit``, ``labels_[i][r]`` holds the global cluster id of leaf
    ``r`` of image ``i``, ``label_maps_[i]`` the painted id array, and
    ``solution_`` the full solve record.
    """

    def __init__(self, t_r=0.25, beta=0.1, *, bins=8, cell=16, half_disk=4, window=20.0,
                 mu=0.2, color_var=0.05, shape_var=0.05, pos_var=25.0, weighted=True,
                 mode="auto", node_limit=DEFAULT_NODE_LIMIT,
                 iteration_limit=DEFAULT_ITERATION_LIMIT):
        self.t_r = t_r
        self.beta = beta
        self.bins = bins
        self.cell = cell
        self.half_disk = half_disk
        self.window = window
        self.mu = mu
        self.color_var = color_var
        self.shape_var = shape_var
        self.pos_var = pos_var
        self.weighted = weighted
        self.mode = mode
        self.node_limit = node_limit
        self.iteration_limit = iteration_limit

    def fit(self, X, y=None, *, leaves=None, hierarchies=None):
        images, maps, trees = coerce_sequence(X, leaves, hierarchies)
        solution = cocluster(
            images, maps, trees, self.t_r, self.beta, self._descriptor_config(),
            weighted=self.weighted, mode=self.mode, node_limit=self.node_limit,
            iteration_limit=self.iteration_limit,
        )
        self.solution_ = solution
        self.labels_ = solution.leaf_labels
        self.label_maps_ = solution.label_maps
        self.n_clusters_ = solution.n_clusters
        return self

    def fit_predict(self, X, y=None, *, leaves=None, hierarchies=None):
        return self.fit(X, leaves=leaves, hierarchies=hierarchies).label_maps_


class MultiresolutionCoClustering(_JointClusteringBase):
    """Independent joint solves over a decreasing resolution schedule.

    ``levels_`` holds one outcome per level (solution or recorded failure);
    ``label_maps_[r]`` is the per-image id array tuple of level ``r`` or
    ``None`` where that level was infeasible.
    """

    def __init__(self, levels=30, t_max=0.4, t_min=0.1, beta=0.1, *, bins=8, cell=16,
                 half_disk=4, window=20.0, mu=0.2, color_var=0.05, shape_var=0.05,
                 pos_var=25.0, weighted=True, mode="auto", node_limit=DEFAULT_NODE_LIMIT,
                 iteration_limit=DEFAULT_ITERATION_LIMIT):
        self.levels = levels
        self.t_max = t_max
        self.t_min = t_min
        self.beta = beta
        self.bins = bins
        self.cell = cell
        self.half_disk = half_disk
        self.window = window
        self.mu = mu
        self.color_var = color_var
        self.shape_var = shape_var
        self.pos_var = pos_var
        self.weighted = weighted
        self.mode = mode
        self.node_limit = node_limit
        self.iteration_limit = iteration_limit

    def fit(self, X, y=None, *, leaves=None, hierarchies=None):
        images, maps, trees = coerce_sequence(X, leaves, hierarchies)
        schedule = default_schedule(self.levels, self.t_max, self.t_min)
        self.levels_ = multiresolution(
            images, maps, trees, schedule, self.beta, self._descriptor_config(),
            weighted=self.weighted, mode=self.mode, node_limit=self.node_limit,
            iteration_limit=self.iteration_limit,
        )
        self.schedule_ = tuple(schedule)
        self.label_maps_ = tuple(
            lv.solution.label_maps if lv.ok else None for lv in self.levels_
        )
        return self


class VideoCoClustering(_JointClusteringBase):
    """Forward-only sequence segmentation with persistent global labels.

    ``result_`` is the full per-level, per-frame record; ``label_maps_``
    its painted id arrays, indexed ``[level][frame]``.
    """

    def __init__(self, levels=30, t_max=0.4, t_min=0.1, beta=0.1, *, bins=8, cell=16,
                 half_disk=4, window=20.0, mu=0.2, color_var=0.05, shape_var=0.05,
                 pos_var=25.0, weighted=True, mode="auto", node_limit=DEFAULT_NODE_LIMIT,
                 iteration_limit=DEFAULT_ITERATION_LIMIT):
        self.levels = levels
        self.t_max = t_max
        self.t_min = t_min
        self.beta = beta
        self.bins = bins
        self.cell = cell
        self.half_disk = half_disk
        self.window = window
        self.mu = mu
        self.color_var = color_var
        self.shape_var = shape_var
        self.pos_var = pos_var
        self.weighted = weighted
        self.mode = mode
        self.node_limit = node_limit
        self.iteration_limit = iteration_limit

    def fit(self, X, y=None, *, leaves=None, hierarchies=None):
        images, maps, trees = coerce_sequence(X, leaves, hierarchies)
        schedule = default_schedule(self.levels, self.t_max, self.t_min)
        self.result_ = video_segment(
            images, maps, trees, schedule, self.beta, self._descriptor_config(),
            weighted=self.weighted, mode=self.mode, node_limit=self.node_limit,
            iteration_limit=self.iteration_limit,
        )
        self.schedule_ = self.result_.schedule
        self.labels_ = self.result_.leaf_labels
        self.label_maps_ = self.result_.label_maps
        return self
