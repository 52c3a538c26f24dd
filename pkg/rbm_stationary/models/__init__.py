__all__ = [
    'CheckpointRecord',
    'CltSection',
    'CltSummaryModel',
    'HistogramSection',
    'HostInfo',
    'MarginalSummary',
    'NoiseSection',
    'ReplicationSummary',
    'RunConfig',
    'ScheduleSection',
    'SinksSection',
    'SkorokhodConfig',
    'SpecSection',
    'StabilityReport',
    'StrictModel',
    'SummaryModel',
    'TestFunctionSection',
]

from .base import StrictModel
from .checkpoint import CheckpointRecord
from .config import (
    CltSection,
    HistogramSection,
    NoiseSection,
    RunConfig,
    ScheduleSection,
    SinksSection,
    SkorokhodConfig,
    SpecSection,
    TestFunctionSection,
)
from .discovery import HostInfo
from .reports import CltSummaryModel, MarginalSummary, ReplicationSummary, StabilityReport, SummaryModel
