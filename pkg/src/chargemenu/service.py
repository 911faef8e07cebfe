"""HTTP wrapper around the batch pipeline.

POST /solve takes a raw scenario document plus the run flags and returns
the same report files the command line would write, as strings keyed by
file name.  POST /validate runs ingestion + validation only.  The CLI's
``--server`` flag is a thin client for this app.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .cli import render_run
from .model import ScenarioFormatError, scenario_from_dict, validate_scenario
from .welfare import SolverError

__all__ = ["SolveRequest", "SolveResponse", "ValidateRequest", "ValidateResponse",
           "create_app", "app"]


class SolveRequest(BaseModel):
    scenario: dict
    mode: str = "welfare"
    network: bool = False
    solar: bool = False
    audit: bool = False
    equilibrium: bool = False
    tol: float = Field(default=1e-7, gt=0)


class SolveResponse(BaseModel):
    files: dict[str, str]
    warnings: list[str] = Field(default_factory=list)


class ValidateRequest(BaseModel):
    scenario: dict


class ValidateResponse(BaseModel):
    errors: list[str]
    warnings: list[str]


def create_app() -> FastAPI:
    app = FastAPI(title="chargemenu")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        try:
            scenario = scenario_from_dict(req.scenario)
        except ScenarioFormatError as exc:
            return ValidateResponse(errors=[str(exc)], warnings=[])
        report = validate_scenario(scenario)
        return ValidateResponse(
            errors=[issue.message for issue in report.errors],
            warnings=[issue.message for issue in report.warnings],
        )

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest):
        try:
            scenario = scenario_from_dict(req.scenario)
        except ScenarioFormatError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        report = validate_scenario(scenario)
        if report.errors:
            raise HTTPException(
                status_code=422,
                detail="; ".join(issue.message for issue in report.errors),
            )
        try:
            files, warnings = render_run(
                scenario,
                mode=req.mode,
                use_network=req.network,
                use_solar=req.solar,
                audit_menu=req.audit,
                benchmark=req.equilibrium,
                tol=req.tol,
            )
        except SolverError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SolveResponse(
            files=files,
            warnings=[issue.message for issue in report.warnings] + warnings,
        )

    return app


app = create_app()
