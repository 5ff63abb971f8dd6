"""Ensembles of members drawing weights from one shared store."""

from .model import MemberSpec, SharedEnsemble
from .predict import FrozenMember, ensemble_predict, interpolate_members, np_softmax
from .anytime import (
    AnytimeEntry,
    enumerate_anytime_schedule,
    member_cost,
    select_under_budget,
)

__all__ = [
    "AnytimeEntry",
    "FrozenMember",
    "MemberSpec",
    "SharedEnsemble",
    "ensemble_predict",
    "enumerate_anytime_schedule",
    "interpolate_members",
    "member_cost",
    "np_softmax",
    "select_under_budget",
]
