"""
Run configuration for the command-line tools.

Values come from an optional flat `key = value` file (read with python-dotenv) overlaid by the
command-line flags; flags win. Each command validates into its own pydantic model so every
problem is reported at once.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from src.config import ARTIFACTS_DIR, BOND_EDGE_BUDGET, SPIN_BUDGET
from src.exception import ConfigError


def _split(value, cast):
    if value is None or isinstance(value, (list, tuple)):
        return value
    if isinstance(value, str):
        return [cast(v) for v in value.replace(" ", "").split(",") if v]
    return [value]


def _count(value):
    """Accept `1e6` style counts."""
    if isinstance(value, str):
        value = float(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"{value} is not a whole number")
        value = int(value)
    return value


class EnumerateConfig(BaseModel):
    N: int
    K: int
    count_only: bool = False
    output: str = "-"

    @model_validator(mode="after")
    def check_positive(self):
        problems = [f"{name} must be >= 1" for name in ("N", "K") if getattr(self, name) < 1]
        if problems:
            raise ValueError("; ".join(problems))
        return self


class VerifyConfig(BaseModel):
    suite: Literal["all", "es", "euler", "duality", "bounds"] = "all"
    N_max: int = 2
    K_max: int = 2
    qs: List[int] = [2, 3]
    es_betas: List[float] = [0.2, 0.7, 1.5]
    potts_betas: List[float] = [0.3, 0.9]
    bound_betas: List[float] = [0.25, 0.5, 1.0, 2.0]
    ps: List[float] = [0.3, 0.6, 0.9]
    annealed_beta: float = 0.7
    annealed_mu: float = 2.0
    exhaustive: bool = False
    sample_configs: int = 4096
    seed: int = 0
    allow_skip: bool = False
    inject_fault: Optional[Literal["backmap"]] = None
    spin_budget: int = SPIN_BUDGET
    bond_budget: int = BOND_EDGE_BUDGET
    output: str = str(ARTIFACTS_DIR / "verify_report.json")

    @field_validator("qs", mode="before")
    @classmethod
    def split_ints(cls, v):
        return _split(v, int)

    @field_validator("es_betas", "potts_betas", "bound_betas", "ps", mode="before")
    @classmethod
    def split_floats(cls, v):
        return _split(v, float)

    @model_validator(mode="after")
    def check_ranges(self):
        problems = []
        if self.N_max < 1 or self.K_max < 1:
            problems.append("N_max and K_max must be >= 1")
        if any(q < 2 for q in self.qs):
            problems.append("every q must be >= 2")
        if any(not 0.0 < p < 1.0 for p in self.ps):
            problems.append("every p must lie in (0, 1)")
        if any(b <= 0 for b in self.es_betas + self.potts_betas + self.bound_betas):
            problems.append("every beta must be > 0")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class PhaseConfig(BaseModel):
    q: float
    side: Literal["primal", "dual"] = "primal"
    beta_grid: str = "0.01:20:200"
    points: List[Tuple[float, float]] = []
    check_asymptote: bool = False
    curve_output: str = str(ARTIFACTS_DIR / "curve_table.csv")
    verdict_output: str = str(ARTIFACTS_DIR / "region_verdicts.jsonl")

    @field_validator("points", mode="before")
    @classmethod
    def parse_points(cls, v):
        if isinstance(v, str):
            v = [v]
        out = []
        for item in v or []:
            if isinstance(item, str):
                beta, mu = item.split(",")
                item = (float(beta), float(mu))
            out.append(tuple(item))
        return out

    @model_validator(mode="after")
    def check_ranges(self):
        problems = []
        if self.q < 2:
            problems.append("q must be >= 2")
        if any(beta <= 0 for beta, _ in self.points):
            problems.append("point beta must be > 0")
        if self.beta_grid.count(":") != 2:
            problems.append("beta_grid must look like start:stop:count")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class TransferConfig(BaseModel):
    mu: List[float]
    K: int = 200
    N: List[int] = [4, 8, 16, 32]
    divergence: bool = False
    K_max: int = 48
    output: str = str(ARTIFACTS_DIR / "transfer_gap.csv")

    @field_validator("mu", mode="before")
    @classmethod
    def split_mus(cls, v):
        return _split(v, float)

    @field_validator("N", mode="before")
    @classmethod
    def split_ns(cls, v):
        return _split(v, int)

    @model_validator(mode="after")
    def check_ranges(self):
        problems = []
        if self.K < 1:
            problems.append("K must be >= 1")
        if any(n < 1 for n in self.N):
            problems.append("every N must be >= 1")
        if self.divergence and self.K_max < 8:
            problems.append("K_max must be >= 8 for the divergence diagnostic")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class McConfig(BaseModel):
    N: int
    Kmax: int
    q: int
    beta: float
    mu: float
    sweeps: int = 10_000
    seed: int = 0
    histogram: bool = False
    free_energy: bool = False
    trace_output: str = str(ARTIFACTS_DIR / "mc_trace.csv")
    checkpoint: str = str(ARTIFACTS_DIR / "mc_checkpoint.json")

    @field_validator("sweeps", mode="before")
    @classmethod
    def parse_count(cls, v):
        return _count(v)

    @model_validator(mode="after")
    def check_ranges(self):
        problems = []
        if self.N < 1 or self.Kmax < 1:
            problems.append("N and Kmax must be >= 1")
        if self.q < 2:
            problems.append("q must be >= 2")
        if self.beta < 0:
            problems.append("beta must be >= 0")
        if self.sweeps < 1:
            problems.append("sweeps must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))
        return self


COMMAND_MODELS = {
    "enumerate": EnumerateConfig,
    "verify": VerifyConfig,
    "phase": PhaseConfig,
    "transfer": TransferConfig,
    "mc": McConfig,
}


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    values = dotenv_values(path)
    # keys are matched case-sensitively against model fields after dash normalisation
    return {k.strip().replace("-", "_"): v for k, v in values.items() if v is not None}


def build_run_config(command: str, flags: Dict[str, Any], config_file: Optional[str] = None) -> BaseModel:
    model = COMMAND_MODELS[command]
    merged = read_config_file(config_file)
    merged.update({k: v for k, v in flags.items() if v is not None})
    merged = {k: v for k, v in merged.items() if k in model.model_fields}
    try:
        return model(**merged)
    except ValidationError as e:
        problems = [f"{'.'.join(str(p) for p in err['loc']) or command}: {err['msg']}" for err in e.errors()]
        raise ConfigError(problems)
