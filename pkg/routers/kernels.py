from typing import List, Optional

from fastapi import APIRouter, Body
from pydantic import BaseModel, Field

from models import Kernel, GridSpec, SpectralReport
from kriging import kernels
from kriging.errors import KriglabError
from utils.helpers import http_error

router = APIRouter()

# Handlers are sync: every route is CPU-bound numerics served from FastAPI's threadpool.


class EvalRequest(BaseModel):
    kernel: Kernel
    x: List[float]
    y: List[float]


class SpectralCheckRequest(BaseModel):
    kernel: Kernel
    r: int = Field(ge=0)
    grid: Optional[GridSpec] = None


class MinPolyOrderRequest(BaseModel):
    kernel: Kernel
    r_max: int = Field(50, ge=0)
    grid: Optional[GridSpec] = None


@router.post("/eval")
def eval_kernel(body: EvalRequest = Body(...)):
    try:
        return {"value": kernels.kernel_eval(body.kernel, body.x, body.y)}
    except (KriglabError, ValueError) as e:
        raise http_error(e)


@router.post("/spectral-check", response_model=SpectralReport)
def spectral_check(body: SpectralCheckRequest = Body(...)):
    """Grid check of S(u)(1 + |u|^r) >= C > 0."""
    try:
        return kernels.check_polynomial_minorant(body.kernel, body.r, body.grid)
    except (KriglabError, ValueError) as e:
        raise http_error(e)


@router.post("/min-poly-order")
def min_poly_order(body: MinPolyOrderRequest = Body(...)) -> dict:
    try:
        order: Optional[int] = kernels.min_poly_order(body.kernel, body.r_max, body.grid)
    except (KriglabError, ValueError) as e:
        raise http_error(e)
    return {"min_poly_order": order, "r_max": body.r_max}
