from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.measures import as_points, directed_distance

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)


@dataclass(frozen=True)
class SupportDistances:
    dist_to_levelset: float
    dist_from_ref_support: float
    flagged: bool = False


def support_convergence(supports: Sequence, reference_support, level_set) -> List[SupportDistances]:
    """
    Per-level distances between supports, the reference support and the level set.

    Args:
        supports: Active atom locations of every level, each (n, 3).
        reference_support: Active atom locations of the reference solution.
        level_set: Band level-set sample of the reference dual field at lambda/2.

    Returns:
        list: One SupportDistances per level. dist_to_levelset is the largest distance
            of a level atom to the level set, dist_from_ref_support the largest distance
            of a reference atom to the level's support. An empty reference support gives
            zeros; other empty sets give +inf, flagged.
    """
    reference_support = as_points(reference_support)
    level_set = as_points(level_set)
    out = []
    for level, support in enumerate(supports):
        support = as_points(support)
        if len(reference_support) == 0:
            out.append(SupportDistances(0.0, 0.0))
            continue
        to_level_set = directed_distance(support, level_set)
        from_reference = directed_distance(reference_support, support)
        flagged = not (np.isfinite(to_level_set) and np.isfinite(from_reference))
        if flagged:
            LOGGER.warning(
                "Support distance against an empty set",
                extra={"level": level, "support": len(support), "level_set": len(level_set)},
            )
        out.append(SupportDistances(to_level_set, from_reference, flagged))
    return out
