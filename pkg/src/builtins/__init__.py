"""
Builtin Models

Example systems shipped as system files, with their default output, pattern,
vertex labels and scenarios. `resolve_system` accepts a builtin id or a path.
"""

from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field

from src.models.scenario import SwitchScenario
from src.models.system import OutputMap, ProlongationPattern, SystemDefinition
from src.system.dsl import load_system
from src.utils.errors import ScenarioError, SystemDefinitionError

BUILTIN_DIR = Path(__file__).resolve().parent
SYSTEM_DIR = BUILTIN_DIR / "systems"
SCENARIO_DIR = BUILTIN_DIR / "scenarios"

# Mode labels of the melds of the flying platform under (2,2,2,0,0,0)
RIGID_BODY_LABELS = {
    "A{}|O{}": "FM",
    "A{1}|O{5}": "DF#2",
    "A{1}|O{6}": "DF#3",
    "A{2}|O{4}": "DF#4",
    "A{2}|O{6}": "DF#5",
    "A{2}|O{5}": "DF#6",
    "A{3}|O{5}": "DF#7",
    "A{3}|O{4}": "DF#8",
    "A{3}|O{6}": "DF#9",
    "A{1,2}|O{4,6}": "QM#10",
    "A{2,3}|O{4,6}": "QM#11",
    "A{1,3}|O{4,6}": "QM#12",
    "A{1,2}|O{4,5}": "QM#13",
    "A{1,3}|O{4,5}": "QM#14",
    "A{2,3}|O{4,5}": "QM#15",
    "A{1,2}|O{5,6}": "QM#16",
    "A{1,3}|O{5,6}": "QM#17",
    "A{2,3}|O{5,6}": "QM#18",
}

# Exclusion expressions per vertex; the determinant of each meld vanishes
# exactly where its expression does.
RIGID_BODY_EXCLUSIONS = {
    "A{1}|O{5}": "-f3_d0*cos(phi) - f2_d0*sin(phi)",
    "A{1}|O{6}": "f2_d0*cos(phi) - f3_d0*sin(phi)",
    "A{2}|O{4}": "f3_d0",
    "A{2}|O{6}": "f3_d0*sin(theta) + f1_d0*cos(phi)*cos(theta)",
    "A{2}|O{5}": "f1_d0*sin(phi)",
    "A{3}|O{5}": "f1_d0*cos(phi)",
    "A{3}|O{4}": "f2_d0",
    "A{3}|O{6}": "f2_d0*sin(theta) + f1_d0*cos(theta)*sin(phi)",
    "A{1,2}|O{4,6}": "f3_d0*(f2_d0*cos(phi) - f3_d0*sin(phi))",
    "A{2,3}|O{4,6}": "f1_d0*(f2_d0*cos(phi) - f3_d0*sin(phi))",
    "A{1,3}|O{4,6}": "f2_d0*(f2_d0*cos(phi) - f3_d0*sin(phi))",
    "A{1,2}|O{4,5}": "f3_d0*(f3_d0*cos(phi) + f2_d0*sin(phi))",
    "A{1,3}|O{4,5}": "-f2_d0*(f3_d0*cos(phi) + f2_d0*sin(phi))",
    "A{2,3}|O{4,5}": "f1_d0*(f3_d0*cos(phi) + f2_d0*sin(phi))",
    "A{1,2}|O{5,6}": (
        "f3_d0*(f1_d0*cos(theta) + f3_d0*cos(phi)*sin(theta) + f2_d0*sin(phi)*sin(theta))"
    ),
    "A{1,3}|O{5,6}": (
        "f2_d0*(f1_d0*cos(theta) + f3_d0*cos(phi)*sin(theta) + f2_d0*sin(phi)*sin(theta))"
    ),
    "A{2,3}|O{5,6}": (
        "f1_d0*(f1_d0*cos(theta) + f3_d0*cos(phi)*sin(theta) + f2_d0*sin(phi)*sin(theta))"
    ),
}


class BuiltinModel(BaseModel):
    """One shipped example: system file, default output and pattern, labels, scenarios."""

    id: str
    filename: str
    output: Optional[str] = None
    pattern: Optional[ProlongationPattern] = Field(
        default=None, description="Default pattern for `graph`"
    )
    labels: dict[str, str] = Field(default_factory=dict)
    scenarios: list[str] = Field(default_factory=list)

    @property
    def path(self) -> Path:
        return SYSTEM_DIR / self.filename

    def system(self) -> SystemDefinition:
        return _load(self.id)

    def output_map(self) -> OutputMap:
        return self.system().output_map(self.output)

    def text(self) -> str:
        return self.path.read_text(encoding="utf-8")


BUILTINS: dict[str, BuiltinModel] = {
    m.id: m
    for m in [
        BuiltinModel(id="motivating_rect", filename="motivating_rect.sys", output="y"),
        BuiltinModel(
            id="motivating_square",
            filename="motivating_square.sys",
            output="y",
            pattern=ProlongationPattern(orders=(0, 1, 0)),
            scenarios=["motivating_direct", "motivating_unified", "motivating_loss_two"],
        ),
        BuiltinModel(id="example1", filename="example1.sys", output="y"),
        BuiltinModel(
            id="rigid_body",
            filename="rigid_body.sys",
            output="pose",
            pattern=ProlongationPattern(orders=(2, 2, 2, 0, 0, 0)),
            labels=RIGID_BODY_LABELS,
            scenarios=["rigidbody_fm_df_qm"],
        ),
        BuiltinModel(
            id="mecanum",
            filename="mecanum.sys",
            output="pose",
            pattern=ProlongationPattern(orders=(1, 0, 1)),
            labels={"A{}|O{}": "omni", "A{3}|O{3}": "unicycle"},
        ),
    ]
}


@lru_cache(maxsize=None)
def _load(builtin_id: str) -> SystemDefinition:
    return load_system(BUILTINS[builtin_id].path)


def get_builtin(builtin_id: str) -> BuiltinModel:
    """
    Raises:
        SystemDefinitionError: For an unknown id
    """
    try:
        return BUILTINS[builtin_id]
    except KeyError as e:
        raise SystemDefinitionError(
            f"Unknown builtin '{builtin_id}'; available: {', '.join(BUILTINS)}"
        ) from e


def builtin_for(system: SystemDefinition) -> Optional[BuiltinModel]:
    return BUILTINS.get(system.name)


def resolve_system(ref: str) -> SystemDefinition:
    """Builtin id, or path to a system file."""
    if ref in BUILTINS:
        return BUILTINS[ref].system()
    return load_system(ref)


def scenario_ids() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))


def load_scenario(ref: str) -> SwitchScenario:
    """
    Builtin scenario id, or path to a scenario file.

    Raises:
        ScenarioError: If neither exists or validation fails
    """
    path = SCENARIO_DIR / f"{ref}.json"
    if path.exists():
        return SwitchScenario.from_text(path.read_text(encoding="utf-8"), source=path.name)
    if Path(ref).exists():
        return SwitchScenario.load(ref)
    raise ScenarioError(f"Unknown scenario '{ref}'; builtins: {', '.join(scenario_ids())}")
