"""Request/response models of the analysis service.

The model-configuration schema mirrors the JSON document format accepted
by the core parser; requests embed it together with grid and verb-specific
options, responses carry the JSON forms of the core report types.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Rate1DModel(_Strict):
    family: Literal["constant", "exp_decay", "poly_exp", "saturating_ramp"]
    params: list[float]


class Rate2DModel(_Strict):
    base: Rate1DModel
    feedback: Literal["none", "linear", "saturating"] = "none"
    feedback_coeff: float = 0.0


class KernelTermModel(_Strict):
    alpha1: Rate1DModel
    alpha2: Rate1DModel


class AttackKernelModel(_Strict):
    terms: list[KernelTermModel] = Field(min_length=1)


class ModelConfigModel(_Strict):
    beta: Rate1DModel
    mu: Rate2DModel
    gamma: Rate2DModel
    alpha: AttackKernelModel
    c: Rate1DModel
    gamma0: float = Field(gt=0)
    s_max: float = Field(gt=0)


class GridOptions(_Strict):
    n_cells: int = Field(default=400, ge=2)
    s_max: Optional[float] = Field(default=None, gt=0)  # overrides the model truncation
    spacing_mode: Literal["uniform", "graded"] = "uniform"
    ratio: Optional[float] = None


class SteadyOptions(_Strict):
    n0_bracket: tuple[float, float] = (0.0, 10.0)
    fp_tol: float = Field(default=1e-8, gt=0)
    damping: float = Field(default=0.5, gt=0, le=1)
    max_iter: int = Field(default=500, ge=1)


class StateSelector(_Strict):
    """Which stationary state an analysis linearizes about."""

    kind: Literal["trivial", "solve", "values"] = "trivial"
    steady: Optional[SteadyOptions] = None
    n0: Optional[float] = None
    n: Optional[list[float]] = None
    E: Optional[list[float]] = None
    M: Optional[list[float]] = None


class InitialSelector(_Strict):
    """Initial condition of a simulation."""

    kind: Literal["steady", "bump", "values"] = "bump"
    center: float = 2.0
    width: float = 0.5
    amplitude: float = 1.0
    values: Optional[list[float]] = None


class VarySpec(_Strict):
    path: str  # dotted path into the model config, e.g. mu.base.params.0
    lo: float
    hi: float
    n: int = Field(ge=1)


# --- requests ---------------------------------------------------------------


class ValidateRequest(_Strict):
    model: ModelConfigModel
    e_range: tuple[float, float] = (0.0, 1.0)
    n_samples: int = Field(default=64, ge=2)
    tail_tol: float = 1.0


class SteadyRequest(_Strict):
    model: ModelConfigModel
    grid: GridOptions = GridOptions()
    steady: SteadyOptions = SteadyOptions()


class StabilityRequest(_Strict):
    model: ModelConfigModel
    grid: GridOptions = GridOptions()
    state: StateSelector = StateSelector()


class SpectrumRequest(_Strict):
    model: ModelConfigModel
    grid: GridOptions = GridOptions()
    state: StateSelector = StateSelector()
    lambda_range: Optional[tuple[float, float]] = None
    n_scan: int = Field(default=200, ge=2)
    root_tol: float = Field(default=1e-9, gt=0)


class SimulateRequest(_Strict):
    model: ModelConfigModel
    grid: GridOptions = GridOptions()
    state: StateSelector = StateSelector()
    mode: Literal["nonlinear", "linearized"] = "nonlinear"
    t_end: float = Field(gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
    cfl: Optional[float] = Field(default=None, gt=0, le=1)
    record_every: int = Field(default=10, ge=1)
    initial: InitialSelector = InitialSelector()
    snapshot_times: list[float] = []
    aeg_tol: Optional[float] = Field(default=None, gt=0)


class SweepRequest(_Strict):
    model: ModelConfigModel
    grid: GridOptions = GridOptions()
    state: StateSelector = StateSelector()
    vary: VarySpec
    vary2: Optional[VarySpec] = None
    lambda_range: Optional[tuple[float, float]] = None
    n_scan: int = Field(default=80, ge=2)
    root_tol: float = Field(default=1e-9, gt=0)
    sim_t_end: float = Field(default=40.0, gt=0)
    sim_record_every: int = Field(default=10, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)


# --- responses ---------------------------------------------------------------


class ViolationModel(BaseModel):
    ingredient: str
    location: list[float]
    value: float


class ValidateResponse(BaseModel):
    ok: bool
    violations: list[ViolationModel]
    min_gamma: float
    tail_mass: float


class SteadyResponse(BaseModel):
    n0: float
    residual_fp: float
    residual_R: float
    s: list[float]
    n: list[float]
    E: list[float]
    M: list[float]


class StateSummary(BaseModel):
    kind: str
    n0: float
    residual_fp: float
    residual_R: float


class TrivialCheckModel(BaseModel):
    stable: bool
    R0: float


class StabilityResponse(BaseModel):
    margin: float
    stable_by_dissipativity: bool
    positivity_pos1: bool
    positivity_pos2: bool
    aeg_hypotheses_met: bool
    mu0: float
    s: list[float]
    margin_profile: list[float]
    state: StateSummary
    trivial_check: Optional[TrivialCheckModel] = None


class RootModel(BaseModel):
    root: float
    bracket: list[float]
    value: float


class SampleModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: float = Field(alias="lambda")
    K: float
    L: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    a7: float
    a8: float
    a9: float


class SpectrumResponse(BaseModel):
    K0: float
    unstable_by_K0: bool
    Lprime0: float
    real_roots_K: list[RootModel]
    L_roots: list[RootModel]
    samples: list[SampleModel]
    note: str
    state: StateSummary


class SnapshotModel(BaseModel):
    t: float
    n: list[float]


class AegModel(BaseModel):
    applicable: bool
    aeg_detected: bool
    limit_profile: Optional[list[float]] = None


class SimulateResponse(BaseModel):
    mode: str
    dt: float
    growth_rate: float
    times: list[float]
    norms: list[float]
    boundary_values: list[float]
    profile_distance: list[float]
    mass_residuals: list[float]
    min_values: list[float]
    s: list[float]
    final_profile: list[float]
    snapshots: list[SnapshotModel]
    aeg: Optional[AegModel] = None


class SweepRowModel(BaseModel):
    index: int
    params: dict[str, float]
    R0: Optional[float] = None
    margin: Optional[float] = None
    K0: Optional[float] = None
    rightmost_root: Optional[float] = None
    sim_growth_rate: Optional[float] = None
    error: Optional[str] = None


class SweepResponse(BaseModel):
    param_paths: list[str]
    rows: list[SweepRowModel]
    n_failures: int


class HealthResponse(BaseModel):
    status: str
    version: str
