#!/usr/bin/env python3
"""
hyper_core_modules/trace.py

Posterior samples and chain traces.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from hyper_core_modules.structures import (
    Hypergraph,
    HypergraphProbs,
    RateParams,
    Structure,
    StructureProbs,
    model_of,
)
from stat_modules.errors import EmptyTraceError


@dataclass(frozen=True)
class PosteriorSample:
    """One (S, μ, φ) draw with its unnormalized log joint and full log-likelihood."""
    structure: Structure
    mu: RateParams
    probs: StructureProbs
    log_joint: float
    log_likelihood: float = float("nan")

    def __post_init__(self):
        if not np.isfinite(self.log_joint):
            raise ValueError(f"log_joint must be finite (got {self.log_joint})")
        if isinstance(self.structure, Hypergraph) != isinstance(self.probs, HypergraphProbs):
            raise ValueError("structure and probability variants disagree")

    @property
    def model(self) -> str:
        return model_of(self.structure)


@dataclass
class ChainTrace:
    """
    Output of one chain: the burn-in log-likelihood history (one entry per
    convergence unit) followed by one entry per retained sample, the retained
    samples, convergence point and per-move acceptance counts.
    """
    model: str
    seed: Optional[int] = None
    loglik_history: List[float] = field(default_factory=list)
    samples: List[PosteriorSample] = field(default_factory=list)
    converged_at: Optional[int] = None
    converged: bool = False
    iterations: int = 0
    acceptance: Dict[str, List[int]] = field(default_factory=dict)

    def require_samples(self) -> List[PosteriorSample]:
        if not self.samples:
            raise EmptyTraceError("trace holds no retained samples")
        return self.samples

    def mean_sample_log_likelihood(self) -> float:
        return float(np.mean([s.log_likelihood for s in self.require_samples()]))

    def acceptance_rates(self) -> Dict[str, float]:
        return {k: (a / p if p else 0.0) for k, (p, a) in self.acceptance.items()}

    def downsampled_history(self, max_points: int = 2000) -> List[float]:
        """Evenly thinned log-likelihood history for result files."""
        hist = self.loglik_history
        if len(hist) <= max_points:
            return [float(v) for v in hist]
        idx = np.linspace(0, len(hist) - 1, max_points).astype(int)
        return [float(hist[i]) for i in idx]
