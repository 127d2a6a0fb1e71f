"""Digital trade estimation from revenue and consumption data."""

from ._core import (
    BoostedEnsemble,
    Dataset,
    Error,
    HyperParams,
    UsageError,
    __version__,
    cagr,
    decoupling_index,
    eci_pci,
    eigenvector_centrality,
    feature_names,
    fit_ensemble,
    greedy_allocate,
    harmonize,
    load_dataset,
    lorenz,
    mtilde,
    ols_robust,
    permutation_importance,
    run_pipeline,
    shannon_entropy,
    share_interval,
    solve_transport,
    stage_names,
    synth_world,
    top_share,
    validate,
    write_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
