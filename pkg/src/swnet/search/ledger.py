"""Accumulators for the gradient evidence the search reads.

The ledger sums, over the batches of one observation window, the gradient of
the loss with respect to each generated weight block (keyed by layer and slot)
and each layer's contribution to its coefficient gradients on that slot.
Similarity scores are computed on the sums, never on single batches.
"""

from typing import Dict, Mapping, Tuple

import numpy as np

from ..weightgen.types import SharingPlan

Key = Tuple[int, int]


class GradientLedger:
    def __init__(self, plan: SharingPlan):
        if not plan.bank_sizes:
            raise ValueError("ledger needs a plan with allocated bank sizes")
        self.plan = plan
        self.theta_sums: Dict[Key, np.ndarray] = {}
        self.alpha_sums: Dict[Key, np.ndarray] = {}
        for lid, placements in plan.placements.items():
            for p in placements:
                slot = plan.slots[p.slot_id]
                n = plan.bank_sizes[slot.bank_id]
                self.theta_sums[(lid, p.slot_id)] = np.zeros(slot.shape, dtype=np.float64)
                self.alpha_sums[(lid, p.slot_id)] = np.zeros(n, dtype=np.float64)
        self.batches = 0

    def reset(self) -> None:
        for buf in self.theta_sums.values():
            buf.fill(0.0)
        for buf in self.alpha_sums.values():
            buf.fill(0.0)
        self.batches = 0

    def accumulate(
        self,
        dl_dtheta: Mapping[Key, np.ndarray],
        alpha_contribs: Mapping[Key, np.ndarray],
    ) -> None:
        for key, block in dl_dtheta.items():
            if key not in self.theta_sums:
                raise KeyError(f"unregistered layer/slot pair {key}")
            self.theta_sums[key] += block
        for key, vec in alpha_contribs.items():
            if key not in self.alpha_sums:
                raise KeyError(f"unregistered layer/slot pair {key}")
            self.alpha_sums[key] += vec
        self.batches += 1
