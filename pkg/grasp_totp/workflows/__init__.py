"""
Workflows Package - LangGraph Orchestration

plan:    load_scenario -> plan_motion -> verify -> write_plan_report
maxload: load_scenario -> load_trajectory -> search_max_load -> write_max_load_report
"""

from .scenario_workflow import ScenarioState, ScenarioWorkflow

__all__ = [
    "ScenarioState",
    "ScenarioWorkflow",
]
