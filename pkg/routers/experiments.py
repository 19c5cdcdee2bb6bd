from fastapi import APIRouter, Body, HTTPException

from models import ScenarioConfig
from kriging import experiments
from kriging.errors import KriglabError
from utils.helpers import finite_or_none, http_error

router = APIRouter()


@router.post("/curve")
def run_curve(config: ScenarioConfig = Body(...)):
    """
    Run a scenario along its nested design prefixes and return the curve rows.
    CSV designs and outputs are file-based and only available from the CLI.
    Sync handler: the scenario is CPU-bound and runs in FastAPI's threadpool.
    """
    if config.run.out or config.design.generator == "csv":
        raise HTTPException(status_code=400, detail="file-based designs and outputs are CLI-only")
    try:
        records = experiments.run_scenario(config)
    except (KriglabError, ValueError) as e:
        raise http_error(e)
    return [finite_or_none(r.model_dump()) for r in records]
