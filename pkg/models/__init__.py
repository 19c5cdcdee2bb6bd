from .models import (
    Kernel, GridSpec, SpectralReport,
    Box, Design, Prediction,
    KernelSpan, GaussianBump, MollifierBump, ContinuousNonsmooth, TestFunction,
    QuadratureSpec, SpectralNorm,
    CurveRecord, CSV_COLUMNS,
    ConditionalMeanReport, MartingaleRecord, MartingaleReport,
    DesignSpec, TargetSpec, RunSpec, ScenarioConfig, DEFAULT_N_LIST,
)

__all__ = [
    "Kernel", "GridSpec", "SpectralReport",
    "Box", "Design", "Prediction",
    "KernelSpan", "GaussianBump", "MollifierBump", "ContinuousNonsmooth", "TestFunction",
    "QuadratureSpec", "SpectralNorm",
    "CurveRecord", "CSV_COLUMNS",
    "ConditionalMeanReport", "MartingaleRecord", "MartingaleReport",
    "DesignSpec", "TargetSpec", "RunSpec", "ScenarioConfig", "DEFAULT_N_LIST",
]
