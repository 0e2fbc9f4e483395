"""Limited-angle CT reconstruction toolkit.

Forward/adjoint projection operators, analytic (FBP) and iterative
(CGLS, TV-ADMM) baselines, a small reverse-mode autodiff engine, and the
model-guided unrolled network with its training loop.
"""

from .analytic import RAM_LAK, FilterSpec, apply_ramp, fbp, fbp_fan
from .data import (
    PhantomSpec,
    Sample,
    build_dataset,
    load_dataset,
    make_sample,
    psnr,
    random_phantom,
    read_lact,
    shepp_logan,
    ssim,
    write_lact,
)
from .errors import (
    DivergedError,
    FormatError,
    InvalidArgumentError,
    LactError,
    TapeError,
    UndefinedMetricError,
)
from .geometry import (
    FanGeometry,
    ImageGrid,
    ParallelGeometry,
    ViewSelection,
    make_fan,
    make_limited,
    make_parallel,
)
from .iterative import GradField, TvParams, cgls, div, grad, shrink, tv_admm
from .projector import (
    Image,
    LimitedSinogram,
    Sinogram,
    backproject,
    pad_dual,
    project,
    restrict,
)

__version__ = "0.1.0"
