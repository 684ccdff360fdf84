"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, Field

from ..codec import CodecParams


class HealthResponse(BaseModel):
    status: str
    version: str


class CodebookSummaryEntry(BaseModel):
    q_level: int
    gamma: float
    psi: float
    distortion: float


class CodebooksResponse(BaseModel):
    levels: list[CodebookSummaryEntry]


class CodebookEntry(BaseModel):
    index: int
    level: float
    upper_threshold: Optional[float]  # None encodes +inf on the last cell


class CodebookResponse(BaseModel):
    q_level: int
    gamma: float
    psi: float
    distortion: float
    entries: list[CodebookEntry]


class CodecParamsModel(BaseModel):
    n: int
    s_level: Union[int, list[int]]
    q_level: Optional[int] = None
    l_subvectors: int = 1
    seed_key: list[int] = Field(default_factory=lambda: [0])
    value_coding: str = "lloyd_max"

    def to_core(self) -> CodecParams:
        s = self.s_level if isinstance(self.s_level, int) else tuple(self.s_level)
        return CodecParams(
            n=self.n,
            s_level=s,
            q_level=self.q_level,
            l_subvectors=self.l_subvectors,
            seed_key=tuple(self.seed_key),
            value_coding=self.value_coding,
        )

    @classmethod
    def from_core(cls, params: CodecParams) -> "CodecParamsModel":
        return cls(
            n=params.n,
            s_level=list(params.s_levels),
            q_level=params.q_level,
            l_subvectors=params.l_subvectors,
            seed_key=list(params.seed_key),
            value_coding=params.value_coding,
        )


class CompressRequest(BaseModel):
    values: list[float]
    params: CodecParamsModel


class CompressResponse(BaseModel):
    payload_hex: str
    bit_length: int
    params: CodecParamsModel


class ReconstructRequest(BaseModel):
    payload_hex: str
    bit_length: int
    params: CodecParamsModel


class ReconstructResponse(BaseModel):
    values: list[float]


class InspectSection(BaseModel):
    subvector: int
    s_level: int
    dim: int
    bits: int
    mean: Optional[float] = None
    variance: Optional[float] = None
    value_index_bits: Optional[int] = None
    value_bits: Optional[int] = None
    values_head: Optional[list[float]] = None
    position_bits: Optional[int] = None
    position_rank_bit_length: Optional[int] = None


class InspectResponse(BaseModel):
    n: int
    l_subvectors: int
    q_level: Optional[int]
    value_coding: str
    total_sparsity: int
    bit_length: int
    accounted_bits: int
    sections: list[InspectSection]


class ChooseRequest(BaseModel):
    values: list[float]
    capacity_bits: int
    q_set: Optional[list[int]] = None
    exhaustive: bool = False


class ChooseResponse(BaseModel):
    s_star: int
    q_star: Optional[int]
    s_max_per_q: dict[int, int]
    objective_per_q: dict[int, float]
    s_per_subvector: list[int]


class RunRequest(BaseModel):
    config: dict
    round_limit: Optional[int] = None


class RunResponse(BaseModel):
    summary: dict
    records_csv: str
    summary_csv: str


class AblateRequest(BaseModel):
    config: dict
    q_levels: list[int] = Field(default_factory=list)
    kappas: list[float] = Field(default_factory=list)
    round_limit: Optional[int] = None


class AblateResponse(BaseModel):
    variants: list[str]
    summaries: dict[str, dict]
    combined_csv: str


class PresetsResponse(BaseModel):
    presets: list[str]
