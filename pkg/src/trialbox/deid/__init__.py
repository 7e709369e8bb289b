from .policy import (
    ANON_PLACEHOLDER,
    ActionKind,
    DeidAction,
    PolicyIndex,
    PolicyStage,
    Stage,
    TagPolicy,
    builtin_policy,
    compose_policy,
    load_overlay,
)
from .engine import (
    DeidError,
    DeidReport,
    PolicyGap,
    UnregisteredClient,
    VrMismatch,
    apply,
    apply_action,
)
from .burnin import GeometryMismatch, Rect, mask_burn_in

__all__ = [
    "ANON_PLACEHOLDER",
    "ActionKind",
    "DeidAction",
    "DeidError",
    "DeidReport",
    "GeometryMismatch",
    "PolicyGap",
    "PolicyIndex",
    "PolicyStage",
    "Rect",
    "Stage",
    "TagPolicy",
    "UnregisteredClient",
    "VrMismatch",
    "apply",
    "apply_action",
    "builtin_policy",
    "compose_policy",
    "load_overlay",
    "mask_burn_in",
]
