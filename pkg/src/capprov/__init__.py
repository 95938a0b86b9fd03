"""Deadline-aware capacity provisioning: offline optimum, valley-filling and
generalized online controllers, workload modeling, and cost/energy accounting."""

from .costs import (
    CostReport,
    EnergyReport,
    MachineMetrics,
    PowerParams,
    check_competitive_bound,
    cost_report,
    energy_from_metrics,
    total_cost,
)
from .estimation import EstimationParams, estimate_job_time, length_in_slots
from .experiment import (
    ExperimentConfig,
    SyntheticSpec,
    run_experiment,
    run_follow_baseline,
    run_no_provisioning,
    sweep_deadline,
    sweep_lookahead,
    synth_workload,
)
from .gcp import UnassignedVector, gcp_opt_step, run_gcp, update_unassigned
from .jobprep import (
    ClusterModel,
    JobPiece,
    classify_kmeans,
    decompose_nonpreemptive,
    decompose_preemptive,
)
from .lp import LpProblem, LpSolution, linearize_abs_objective, solve_lp
from .offline import disaggregate_edf, solve_offline
from .schedule import CapacitySchedule, CostParams, DeadlineMissError, assert_feasible
from .vfw import VfwState, detect_valley, lopt_step, run_vfw, vopt_step
from .workload import (
    DeadlineDecomposedLoad,
    Job,
    WorkloadCurve,
    build_curves,
    delayed_curve,
    generalized_deadline_curve,
    ingest_trace,
    uniform_decomposition,
)

__version__ = "0.1.0"
