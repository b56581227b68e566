"""scikit-learn style estimator wrapping the PDE-residual trainer.

``PinnRegressor`` follows the usual conventions -- constructor stores
hyper-parameters verbatim (so ``get_params``/``set_params``/``clone`` work),
``fit`` trains and exposes fitted state through trailing-underscore
attributes, ``predict`` maps points to network outputs -- which lets the
solver drop into pipelines and searches.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .config import PROBLEM_ALIASES, PROBLEM_DEFAULTS, default_dims
from .harness import load_reference_grid
from .metrics import relative_l2_error
from .model import forward_values
from .parallel import train_distributed
from .problems import ReferenceGrid, make_problem
from .sampling import build_test_set, build_training_set
from .training import train_single

__all__ = ["PinnRegressor"]


class PinnRegressor(RegressorMixin, BaseEstimator):
    """Collocation-trained PDE solver with a fit/predict surface.

    Parameters default to the per-problem hyper-parameter table (see
    ``config.PROBLEM_DEFAULTS``).  ``fit`` is usually called without data --
    the training set is sampled from the problem definition and ``seed`` --
    but the inverse variant accepts ``(X, y)`` observation points, which
    replace the synthetic observation cloud.

    Attributes after fit:  ``params_`` (network parameters), ``record_``
    (full run record: histories, timings), ``error_`` (relative L2 error on
    the held-out points), ``loss_`` (final training loss), ``n_iter_``, and
    ``lambda_`` when the problem trains a material scalar.
    """

    def __init__(
        self,
        problem: str = "laplace1d",
        n_f: int | None = None,
        n_g: int | None = None,
        n_h: int | None = None,
        m_obs: int | None = None,
        width: int | None = None,
        depth: int | None = None,
        iterations: int | None = None,
        lr: float | None = None,
        activation: str = "tanh",
        seed: int = 1234,
        ranks: int = 1,
        mode: str = "weak",
        record_every: int = 100,
        loss_weights: dict | None = None,
        reference: str | ReferenceGrid | None = None,
    ):
        self.problem = problem
        self.n_f = n_f
        self.n_g = n_g
        self.n_h = n_h
        self.m_obs = m_obs
        self.width = width
        self.depth = depth
        self.iterations = iterations
        self.lr = lr
        self.activation = activation
        self.seed = seed
        self.ranks = ranks
        self.mode = mode
        self.record_every = record_every
        self.loss_weights = loss_weights
        self.reference = reference

    def _resolved(self) -> dict:
        kind = PROBLEM_ALIASES.get(self.problem)
        if kind is None:
            raise ValueError(f"unknown problem {self.problem!r}")
        defaults = PROBLEM_DEFAULTS[kind]
        out = {"problem": kind}
        for key in ("n_f", "n_g", "n_h", "m_obs", "iterations", "lr"):
            value = getattr(self, key)
            out[key] = defaults[key] if value is None else value
        out["dims"] = default_dims(kind, self.width, self.depth)
        return out

    def _reference_grid(self) -> ReferenceGrid | None:
        if self.reference is None:
            return None
        if isinstance(self.reference, ReferenceGrid):
            return self.reference
        return load_reference_grid(self.reference)

    def fit(self, X=None, y=None) -> "PinnRegressor":
        """Train the network; returns self.

        ``X``/``y``, when given, are observation points and values for the
        data component (shape (M, d_in) and (M, m) or (M,)).
        """
        cfg = self._resolved()
        kind = cfg["problem"]
        problem = make_problem(kind, reference=self._reference_grid())
        if self.ranks < 1:
            raise ValueError(f"ranks must be >= 1, got {self.ranks}")

        tset = test_set = None
        if X is not None:
            if kind == "schrodinger1d":
                raise ValueError("observation data is only supported for the laplace problems")
            X = check_array(X, dtype=np.float64, ensure_2d=True)
            if X.shape[1] != problem.d_in:
                raise ValueError(f"X has {X.shape[1]} columns, problem expects {problem.d_in}")
            if y is None:
                raise ValueError("observations X were given without values y")
            y = np.asarray(y, dtype=np.float64)
            if y.ndim == 1:
                y = y.reshape(-1, 1)
            if y.shape != (X.shape[0], problem.m):
                raise ValueError(f"y must have shape ({X.shape[0]}, {problem.m}), got {y.shape}")
            if not (np.isfinite(X).all() and np.isfinite(y).all()):
                raise ValueError("observations must be finite")
            tset = build_training_set(
                problem, cfg["n_f"], cfg["n_g"] or None, cfg["n_h"] or None,
                X.shape[0] if problem.inverse else 0, self.seed,
            )
            # held-out set mirrors the synthetic structure; user observations
            # themselves cannot be resampled
            test_set = build_test_set(problem, tset, self.seed)
            tset.points["u"] = X.copy()
            tset.observations = y.copy()
            tset.weights["u"] = np.full((X.shape[0], 1), 1.0 / X.shape[0])

        if self.ranks == 1:
            record = train_single(
                problem,
                cfg["n_f"],
                cfg["dims"],
                seed=self.seed,
                iterations=cfg["iterations"],
                lr=cfg["lr"],
                n_g=cfg["n_g"] or None,
                n_h=cfg["n_h"] or None,
                m_obs=cfg["m_obs"] or None,
                omega=self.loss_weights,
                activation=self.activation,
                record_every=self.record_every,
                tset=tset,
                test_set=test_set,
            )
        else:
            if tset is not None:
                raise ValueError("user-supplied observations are not supported with ranks > 1")
            record = train_distributed(
                problem,
                self.mode,
                self.ranks,
                cfg["n_f"],
                cfg["dims"],
                seed=self.seed,
                iterations=cfg["iterations"],
                lr=cfg["lr"],
                n_g=cfg["n_g"] or None,
                n_h=cfg["n_h"] or None,
                m_obs=cfg["m_obs"] or None,
                omega=self.loss_weights,
                activation=self.activation,
                record_every=self.record_every,
            )[0]

        self.problem_ = problem
        self.record_ = record
        self.params_ = record.final_params
        self.error_ = record.error
        self.loss_ = record.history_train[-1]
        self.n_iter_ = cfg["iterations"]
        self.n_features_in_ = problem.d_in
        for name, value in record.extras.items():
            setattr(self, f"{name}_", value)
        return self

    def predict(self, X) -> np.ndarray:
        """Network output at the given points: (n,) for scalar problems, else (n, m)."""
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        out = forward_values(self.params_, X, activation=self.activation)
        return out[:, 0] if self.problem_.m == 1 else out

    def relative_error(self, X, y) -> float:
        """Relative L2 distance between predictions and reference values."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=np.float64)
        return relative_l2_error(pred.reshape(y.shape), y)
