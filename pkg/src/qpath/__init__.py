"""Hybrid quantum-classical grid path planning toolkit."""

from .errors import (
    BlockedError,
    DeadEndError,
    DegenerateDimsError,
    EndpointBlockedError,
    IoError,
    NoPathError,
    OutOfBoundsError,
    ParseError,
    QPathError,
    SameWireError,
    UnreadableImageError,
    ValidationError,
    ZeroVectorError,
)
from .grid import (
    ACTION_OFFSETS,
    Cell,
    MotionSchedule,
    Obstacle,
    ObstacleKind,
    OccupancyWorld,
    move_cost,
    next_state,
    occupied,
    octile,
    step_obstacles,
    turn_feature,
)
from .mapio import ingest_map_image, load_image
from .metrics import (
    MetricsRow,
    path_length,
    run_batch,
    smoothness,
    write_report,
)
from .planner import (
    Mission,
    MissionEngine,
    MissionLog,
    Path,
    PlannerConfig,
    execute_mission,
    plan_astar,
    plan_hybrid,
    qval,
    total_cost,
)
from .qrl import (
    QTables,
    TrainConfig,
    apply_update,
    init_tables,
    load_tables,
    quantum_delta,
    save_tables,
    select_action,
    smooth_neighbors,
    train,
)
from .qsim import (
    CircuitParams,
    StateVector,
    amplitude_encode,
    apply_cnot,
    apply_rot,
    apply_ry,
    expect_z,
    run_turn_critic,
)
from .scenario import (
    Hyperparams,
    ImageGrid,
    InlineGrid,
    ScenarioSpec,
    build_world,
    load_scenario,
    save_scenario,
)
from .spatial import SpatialIndex, neighbors_within

__version__ = "0.1.0"
