"""Norm-ball linear minimization oracles and the optimizers built on them.

The library has five layers: dense linear algebra primitives (`linalg`), norms and
their lmos (`norms`), the update rules and schedules (`optim`), a small MLP with
manual backpropagation (`models`), and experiment harnesses plus problems
(`experiments`, `problems`). The `cli` module exposes the same machinery as the
`lmopt` command.
"""

from .linalg import (
    SvdResult,
    derive_seed,
    newton_schulz_orthogonalize,
    rng_gaussian,
    rng_permutation,
    rng_rademacher,
    semi_orthogonal_init,
    svd_reduced,
)
from .models import (
    Activation,
    Domain,
    InitScheme,
    LayerSpec,
    Loss,
    MlpModel,
    backward,
    build_config,
    forward,
    init_model,
    load_model,
    loss_and_grad,
    save_model,
)
from .norms import (
    LayerNorms,
    ModelNormSpec,
    NormKind,
    NormSpec,
    VecNorm,
    composite_norm,
    dual_norm,
    fw_gap,
    lmo,
    lmo_coefficient,
    model_lmo,
    op_norm,
    sharp_op,
    vec_norm,
)
from .optim import (
    Algo,
    AlphaKind,
    GammaKind,
    OptimizerState,
    ScheduleSpec,
    almond_step,
    alpha_at,
    gamma_at,
    momentum_update,
    muon_step,
    scg_step,
    scion_light_update,
    ssd_step,
    theory_gamma,
    uscg_step,
    uscg_wd_step,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
