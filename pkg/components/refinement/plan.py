from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class RefinementPlan(BaseModel):
    """
    Nested grid sequence V_1 ⊂ V_2 ⊂ ... over the source region.

    Attributes:
        base_resolution: Voxel counts (nx, ny, nz) of the coarsest level.
        levels: Number of levels.
        factor: Per-axis refinement factor between consecutive levels.
        lam: Absolute regularization weight, or
        lambda_ratio: lambda as a fraction of lambda_max on the finest level.
        data: Path of the field file the plan was written for, informational.
        warm_start: Start each level from the previous level's solution.
        project_data: Replace the data by its projection onto the range of A on each level.
        level_noise_std: Std of per-level Gaussian perturbations f_n = f + noise.
        noise_seed: Seed of the per-level perturbations.
        dual_factor: Dual-field sampling resolution relative to the finest node grid.
        band: Level-set band, relative to lambda/2.
        test_functions: Size of the test-function family of the R-distance proxy.
        audit_tol: Slack allowed in the inequality audits, relative to the data energy.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    base_resolution: Tuple[int, int, int] = (4, 4, 2)
    levels: int = Field(default=3, ge=1)
    factor: int = Field(default=2, ge=2)
    lam: Optional[float] = Field(default=None, gt=0)
    lambda_ratio: Optional[float] = Field(default=0.1, gt=0)
    data: Optional[str] = None
    warm_start: bool = True
    project_data: bool = False
    level_noise_std: float = Field(default=0.0, ge=0)
    noise_seed: int = 0
    dual_factor: int = Field(default=2, ge=2)
    band: float = Field(default=1e-3, gt=0)
    test_functions: int = Field(default=64, ge=1)
    audit_tol: float = Field(default=1e-6, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if min(self.base_resolution) < 1:
            raise ValueError("base_resolution entries must be positive")
        if self.lam is None and self.lambda_ratio is None:
            raise ValueError("Either lam or lambda_ratio is required")
        return self

    def resolution(self, level: int) -> Tuple[int, int, int]:
        """Resolution of level `level` (0-based)."""
        return tuple(n * self.factor ** level for n in self.base_resolution)
