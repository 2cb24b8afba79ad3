"""
Scenario workflows: load -> plan -> verify -> report, and the max-load search.

Library errors are caught inside the nodes, stored in the state and re-raised
by the public entry points after the graph finishes, so reports that must be
written on failure (the plan summary) still are.
"""
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, TypedDict, Union

import numpy as np
from langgraph.graph import END, StateGraph

from ..config.settings import Settings, get_settings
from ..core.totp import (
    MaxLoadResult,
    TotpProblem,
    TotpSolution,
    TrajectoryCheck,
    check_trajectory,
    max_load_search,
    solve_totp,
)
from ..exceptions import GraspPlanningError, NotConverged, StaticallyInfeasible
from ..services.document_loader import DocumentLoader, Scenario
from ..services.report_writer import ReportWriter

logger = logging.getLogger(__name__)


class ScenarioState(TypedDict, total=False):
    """State passed between workflow nodes"""
    # Input
    scenario_ref: str
    output_dir: str
    overrides: Dict[str, Any]
    trajectory_path: Optional[str]

    # Loaded documents
    scenario: Optional[Scenario]
    problem: Optional[TotpProblem]
    fixed_x: Optional[np.ndarray]

    # Results
    solution: Optional[TotpSolution]
    check: Optional[TrajectoryCheck]
    max_load: Optional[MaxLoadResult]
    summary: Dict[str, Any]
    output_files: List[str]

    # Workflow metadata
    error: Optional[GraspPlanningError]
    current_step: str
    execution_log: List[str]


class ScenarioWorkflow:
    """Runs scenario documents through the planner and writes the reports"""

    def __init__(self, settings: Optional[Settings] = None, loader: Optional[DocumentLoader] = None):
        self.settings = settings or get_settings()
        self.loader = loader or DocumentLoader()
        self.plan_graph = self._build_plan_workflow()
        self.max_load_graph = self._build_max_load_workflow()

    def _build_plan_workflow(self):
        workflow = StateGraph(ScenarioState)

        workflow.add_node("load_scenario", self._load_scenario_node)
        workflow.add_node("plan_motion", self._plan_motion_node)
        workflow.add_node("verify", self._verify_node)
        workflow.add_node("write_plan_report", self._write_plan_report_node)

        workflow.set_entry_point("load_scenario")
        workflow.add_conditional_edges(
            "load_scenario",
            self._should_continue,
            {"continue": "plan_motion", "end": END},
        )
        workflow.add_conditional_edges(
            "plan_motion",
            self._should_verify,
            {"continue": "verify", "report": "write_plan_report", "end": END},
        )
        workflow.add_edge("verify", "write_plan_report")
        workflow.add_edge("write_plan_report", END)

        return workflow.compile()

    def _build_max_load_workflow(self):
        workflow = StateGraph(ScenarioState)

        workflow.add_node("load_scenario", self._load_scenario_node)
        workflow.add_node("load_trajectory", self._load_trajectory_node)
        workflow.add_node("search_max_load", self._search_max_load_node)
        workflow.add_node("write_max_load_report", self._write_max_load_report_node)

        workflow.set_entry_point("load_scenario")
        workflow.add_conditional_edges(
            "load_scenario",
            self._should_continue,
            {"continue": "load_trajectory", "end": END},
        )
        workflow.add_conditional_edges(
            "load_trajectory",
            self._should_continue,
            {"continue": "search_max_load", "end": END},
        )
        workflow.add_conditional_edges(
            "search_max_load",
            self._should_continue,
            {"continue": "write_max_load_report", "end": END},
        )
        workflow.add_edge("write_max_load_report", END)

        return workflow.compile()

    # Routing

    @staticmethod
    def _should_continue(state: ScenarioState) -> str:
        return "end" if state.get("error") else "continue"

    @staticmethod
    def _should_verify(state: ScenarioState) -> str:
        error = state.get("error")
        if error is None:
            return "continue"
        return "report" if isinstance(error, StaticallyInfeasible) else "end"

    @staticmethod
    def _log(state: ScenarioState, message: str) -> List[str]:
        return state.get("execution_log", []) + [f"[{datetime.now()}] {message}"]

    # Nodes

    def _load_scenario_node(self, state: ScenarioState) -> Dict[str, Any]:
        logger.info(f"Loading scenario {state['scenario_ref']}")
        try:
            scenario = self.loader.load_scenario(state["scenario_ref"])
            overrides = {**scenario.solver_overrides, **state.get("overrides", {})}
            problem = TotpProblem.from_settings(
                scenario.path, scenario.chain, scenario.object, scenario.gripper,
                scenario.limits, self.settings, **overrides,
            )
        except GraspPlanningError as e:
            logger.error(f"Scenario loading failed: {e}")
            return {"error": e, "current_step": "load_scenario",
                    "execution_log": self._log(state, f"Scenario loading failed: {e}")}
        return {
            "scenario": scenario,
            "problem": problem,
            "current_step": "load_scenario",
            "execution_log": self._log(state, f"Loaded {scenario.source}"),
        }

    def _plan_motion_node(self, state: ScenarioState) -> Dict[str, Any]:
        try:
            solution = solve_totp(state["problem"])
        except GraspPlanningError as e:
            logger.error(f"Planning failed: {e}")
            return {"error": e, "current_step": "plan_motion",
                    "execution_log": self._log(state, f"Planning failed: {e}")}
        return {
            "solution": solution,
            "current_step": "plan_motion",
            "execution_log": self._log(state, f"Planned in {solution.iterations} iterations"),
        }

    def _verify_node(self, state: ScenarioState) -> Dict[str, Any]:
        """Re-check the final trajectory by direct multiplication"""
        check = check_trajectory(state["problem"], state["solution"].x)
        if not check.feasible:
            logger.warning(
                f"Final trajectory violates {check.active_row_label} at knot {check.active_knot} "
                f"by {-check.min_margin:.3g}"
            )
        return {
            "check": check,
            "current_step": "verify",
            "execution_log": self._log(state, f"Verified, min margin {check.min_margin:.6g}"),
        }

    def _write_plan_report_node(self, state: ScenarioState) -> Dict[str, Any]:
        writer = ReportWriter(state["output_dir"], self.settings.output.significant_digits)
        solution = state.get("solution")
        files = []
        if solution is not None:
            files.append(str(writer.write_trajectory(state["problem"], solution)))
        summary = writer.plan_summary(solution, isinstance(state.get("error"), StaticallyInfeasible))
        files.append(str(writer.write_json(summary, "summary.json")))
        return {
            "summary": summary,
            "output_files": files,
            "current_step": "write_plan_report",
            "execution_log": self._log(state, f"Wrote {', '.join(files)}"),
        }

    def _load_trajectory_node(self, state: ScenarioState) -> Dict[str, Any]:
        try:
            fixed_x = self.loader.load_trajectory(state["trajectory_path"], state["problem"].n_knots)
        except GraspPlanningError as e:
            return {"error": e, "current_step": "load_trajectory",
                    "execution_log": self._log(state, f"Trajectory rejected: {e}")}
        return {"fixed_x": fixed_x, "current_step": "load_trajectory",
                "execution_log": self._log(state, f"Loaded {fixed_x.size} knots")}

    def _search_max_load_node(self, state: ScenarioState) -> Dict[str, Any]:
        try:
            result = max_load_search(state["problem"], state["fixed_x"])
        except GraspPlanningError as e:
            return {"error": e, "current_step": "search_max_load",
                    "execution_log": self._log(state, f"Max-load search failed: {e}")}
        return {"max_load": result, "current_step": "search_max_load",
                "execution_log": self._log(state, f"Max load {result.max_load_kg:.6g} kg")}

    def _write_max_load_report_node(self, state: ScenarioState) -> Dict[str, Any]:
        writer = ReportWriter(state["output_dir"], self.settings.output.significant_digits)
        summary = writer.max_load_summary(state["max_load"])
        path = writer.write_json(summary, "max_load.json")
        return {"summary": summary, "output_files": [str(path)], "current_step": "write_max_load_report",
                "execution_log": self._log(state, f"Wrote {path}")}

    # Entry points

    @staticmethod
    def _initial_state(scenario_ref: Union[str, Path], output_dir: Union[str, Path],
                       overrides: Optional[Dict[str, Any]] = None,
                       trajectory_path: Optional[Union[str, Path]] = None) -> ScenarioState:
        return ScenarioState(
            scenario_ref=str(scenario_ref),
            output_dir=str(output_dir),
            overrides=dict(overrides or {}),
            trajectory_path=None if trajectory_path is None else str(trajectory_path),
            error=None,
            current_step="start",
            execution_log=[],
            output_files=[],
        )

    def run_plan(self, scenario_ref: Union[str, Path], output_dir: Union[str, Path],
                 overrides: Optional[Dict[str, Any]] = None) -> ScenarioState:
        """
        Plan a scenario and write trajectory.csv and summary.json.

        Raises:
            GraspPlanningError: the first library error, after any report was written
            NotConverged: if the planner stopped without converging (summary written)
        """
        final_state = self.plan_graph.invoke(self._initial_state(scenario_ref, output_dir, overrides))
        if final_state.get("error") is not None:
            raise final_state["error"]
        solution = final_state["solution"]
        if not solution.converged:
            raise NotConverged(
                f"planner stopped after {solution.iterations} iterations without converging "
                f"(total time {solution.total_time:.6g} s)"
            )
        return final_state

    def run_max_load(self, scenario_ref: Union[str, Path], trajectory_path: Union[str, Path],
                     output_dir: Union[str, Path]) -> ScenarioState:
        """Max-load search along a planned trajectory; writes max_load.json"""
        final_state = self.max_load_graph.invoke(
            self._initial_state(scenario_ref, output_dir, trajectory_path=trajectory_path)
        )
        if final_state.get("error") is not None:
            raise final_state["error"]
        return final_state
