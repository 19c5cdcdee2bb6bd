from .kernels import router as kernels_router
from .predictions import router as predictions_router
from .experiments import router as experiments_router
