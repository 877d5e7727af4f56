"""Online mixture of student-t process experts with an SMC sampler."""
from .config import PriorConfig
from .errors import InputError, NumericalError, TPMoEError
from .gating import (
    ClusterInputStats,
    NIWPrior,
    crp_assignment_probabilities,
    input_log_density,
    sample_alpha,
    update_input_stats,
)
from .kernels import CovMatrix, KernelParams, build_cov, rbf_kernel, solve_and_logdet
from .predict import PredictiveResult, gate_weights, predict
from .samplers import (
    SliceConfig,
    ess_update_theta_h,
    gibbs_k0_squared,
    gibbs_sigma2,
    slice_sample_nu,
)
from .smc import (
    ClusterState,
    Particle,
    ParticleEnsemble,
    effective_sample_size,
    init_first_observation,
    resample,
    step,
)
from .stream import (
    Dataset,
    RunConfig,
    StepRecord,
    TPMoE,
    emit_results,
    load_csv,
    run_stream,
    standardize,
)
from .tp import (
    StudentTPredictive,
    TPParams,
    minibatch_log_likelihood,
    tp_log_marginal,
    tp_predict,
)

__version__ = "0.1.0"
