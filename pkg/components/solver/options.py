from pydantic import BaseModel, ConfigDict, Field, field_validator


class SolveOptions(BaseModel):
    """
    Options for the accelerated proximal gradient solver.

    Attributes:
        max_iters: Iteration cap.
        certificate_tol: Certificate gap tolerance, relative to lambda/2.
        objective_tol: Relative objective decrease over `stall_window` iterations
            below which the run counts as stalled.
        backtrack_shrink: Step shrink factor of the backtracking line search.
        power_iters: Power iterations used for the initial step 1/(2||A||^2).
        restart: Gradient-based momentum restart.
        certificate_every: Evaluate the certificate every this many iterations.
        stall_window: Window of the objective-stall test.
        record_trace: Keep a per-iteration trace in the result.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iters: int = Field(default=20000, gt=0)
    certificate_tol: float = Field(default=1e-7, gt=0)
    objective_tol: float = Field(default=1e-12, gt=0)
    backtrack_shrink: float = 0.5
    power_iters: int = Field(default=30, gt=0)
    restart: bool = True
    certificate_every: int = Field(default=10, gt=0)
    stall_window: int = Field(default=200, gt=0)
    record_trace: bool = False

    @field_validator("backtrack_shrink")
    @classmethod
    def _check_shrink(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("backtrack_shrink must lie in (0, 1)")
        return value
