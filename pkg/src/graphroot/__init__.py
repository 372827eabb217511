"""Graph root distributions: exchangeable random graphs as distributions
on a Krein space."""

__version__ = "0.1.0"

from .krein import (  # noqa: E402
    DiscreteGRD,
    KreinVector,
    OrthogonalPair,
    canonicalize,
    gram_matrix,
    krein_inner,
    truncate_grd,
    truncate_prob,
)
from .models import (  # noqa: E402
    DCBMSpec,
    MMBMSpec,
    SBMSpec,
    StepGraphon,
    Theta,
    graphon_eval,
    graphon_l2_distance,
    grd_from_sbm,
    grd_sampler_from_dcbm,
    grd_sampler_from_mmbm,
    spectral_factorize,
)
from .embedding import choose_dims, embed, estimate_density, fit_decay_profile, signed_eigendecompose  # noqa: E402
from .sampling import AdjacencyMatrix, SamplingConfig, sample_adjacency, sample_from_graphon, sample_nodes  # noqa: E402
from .transport import (  # noqa: E402
    check_cut_bound,
    cut_norm_step,
    orthogonal_wasserstein,
    sinkhorn_wasserstein,
    wasserstein,
)
