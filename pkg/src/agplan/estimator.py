"""Scikit-learn style wrapper around :func:`agplan.planner.plan`.

``fit`` binds the planner to a terrain; ``predict`` plans a batch of
``(start, goal)`` pairs.  Hyperparameters are flat ``section.key`` overrides
so ``get_params``/``set_params`` and cloning work as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .config import RunConfig
from .planner import plan
from .validation import check_pairs, check_terrain


class AirGroundPlanner(BaseEstimator):
    def __init__(self, optimize=True, overrides=None, config=None):
        self.optimize = optimize
        self.overrides = overrides
        self.config = config

    def fit(self, X, y=None):
        """X: TerrainGrid, TerrainSpec or DEM path."""
        self.grid_ = check_terrain(X)
        cfg = self.config if self.config is not None else RunConfig()
        if self.overrides:
            cfg = cfg.with_overrides(self.overrides)
        self.config_ = cfg.resolve(self.grid_)
        return self

    def predict(self, X):
        """Plan every ``(start, goal)`` pair in X; returns a list of PlannedPath."""
        check_is_fitted(self, "grid_")
        pairs = check_pairs(self.grid_, X, self.config_.limits)
        return [plan(self.grid_, s, g, self.config_, optimize=self.optimize) for s, g in pairs]

    def score(self, X, y=None):
        """Negative mean path energy in joules (higher is better)."""
        return -float(np.mean([p.total_energy for p in self.predict(X)]))
