from ._g2cal import *  # noqa: F401,F403

from ._g2cal import (  # noqa: F401
    G2ppParams,
    MarketCurve,
    reference_params,
    extend_reference,
    sample_params,
    build_indirect,
    build_direct,
    cov_matrix,
    classical_calibrate,
    load_checkpoint,
)
