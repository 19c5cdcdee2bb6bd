from typing import List, Literal, Optional

import numpy as np
from fastapi import APIRouter, Body
from pydantic import BaseModel, Field

from models import Kernel, Box, Design, Prediction
from kriging import solver
from kriging.errors import KriglabError
from utils.helpers import http_error

router = APIRouter()


class PredictionRequest(BaseModel):
    """Kernel, ordered design points and target; the design box is their bounding box."""
    kernel: Kernel
    points: List[List[float]] = Field(default_factory=list)
    x: List[float]
    precision: Literal["double", "extended"] = "double"
    truncation_tol: Optional[float] = Field(None, ge=0, lt=1)
    dps: Optional[int] = Field(None, ge=30)


def _design(points: List[List[float]], x: List[float]) -> Design:
    corners = np.asarray(points + [x], dtype=float)
    box = Box(lower=corners.min(axis=0).tolist(), upper=corners.max(axis=0).tolist())
    return Design(points=points, box=box)


@router.post("", response_model=Prediction)
def create_prediction(body: PredictionRequest = Body(...)):
    """
    Kriging weights, kriging variance and Lebesgue constant at x.
    Sync handler: the solve is CPU-bound and runs in FastAPI's threadpool.
    """
    try:
        if any(len(p) != len(body.x) for p in body.points):
            raise ValueError("design points and x must have the same dimension")
        design = _design(body.points, body.x)
        if body.precision == "extended":
            return solver.extended_prediction(body.kernel, design, body.x, body.dps)
        system = solver.build_system(body.kernel, design, body.truncation_tol)
        return solver.kriging_weights(system, body.x)
    except (KriglabError, ValueError) as e:
        raise http_error(e)
