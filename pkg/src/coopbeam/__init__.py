"""Link-level simulator and theory engine for cooperative 3D beamforming
from two antenna arrays."""

from .geometry import (
    SPEED_OF_LIGHT,
    AnglePair,
    ArrayGeometry,
    angles_between,
    direction_cosines,
    planar_array,
    steering_bank,
    steering_derivative,
    steering_vector,
)
from .channel import (
    ChannelRealization,
    LinkBudget,
    ReceivedPower,
    RicianFactor,
    combined_channel,
    db2pow,
    path_loss_db,
    pow2db,
    received_power,
    rician_sample,
)
from .precoding import (
    ConstraintSet,
    InfeasibleConstraints,
    InversionReport,
    Precoder,
    conventional_zf,
    mpdr,
    regularized_inverse,
    zfp,
    zfp_bank,
    zfp_d,
    zfp_general,
)
from .capacity import (
    Constellation,
    SinrMoments,
    VolumeSpec,
    capacity_closed_form,
    capacity_for_moments,
    capacity_quadrature,
    capacity_zero_mean,
    ei,
    ei_scaled,
    sinr_cdf,
    sinr_density,
    sinr_moments,
    square_qam,
    vse,
)
from .deployment import (
    Scenario,
    ScenarioConfig,
    cell_free_scenario,
    draw_scenario,
    perturb_positions,
    scenario_from_json,
    scenario_to_json,
    small_cell_scenario,
)
from .simulation import (
    MetricsRecord,
    PrecoderSet,
    SimOptions,
    build_precoders,
    instantaneous_sinr,
    run_ber_trials,
    run_se_trials,
    sweep,
)

__version__ = "0.1.0"
