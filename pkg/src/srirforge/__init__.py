"""srirforge: geometric-acoustics SRIR simulation and SELD dataset tooling.

Simulates multichannel spatial room impulse responses for shoebox rooms with
the image source method, calibrates virtual rooms against measured
reverberation, synthesizes annotated spatial sound-event mixtures, and scores
predictions with joint localization-detection metrics.
"""

from .annotations import FRAME_SECONDS, FrameAnnotations
from .bank import (
    BankEntry,
    BankIntegrityError,
    RoomSpec,
    SrirBank,
    TrajectoryOutsideRoomError,
    build_and_save_bank,
    build_bank,
    circular_room_preset,
    load_bank,
    load_room_spec,
    save_bank,
    save_room_spec,
)
from .calibration import (
    CalibrationResult,
    EnergyDecayCurve,
    InfeasibleRoomError,
    InsufficientDecayError,
    calibrate_room,
    dc_block,
    energy_decay_curve,
    estimate_rt60,
    inverse_sabine,
)
from .geometry import (
    CapsuleSpec,
    CircularTrajectory,
    Direction,
    LinearTrajectory,
    MicArray,
    TrajectorySample,
    angular_distance,
    cart_to_sph,
    project_doa_circular,
    project_doa_linear,
    sample_trajectory,
    sph_to_cart,
    tetrahedral_array,
)
from .ism import (
    ImageSource,
    Rir,
    ShoeboxRoom,
    Srir,
    directivity_gain,
    enumerate_images,
    image_amplitude,
    render_rir,
    render_srir,
)
from .metrics import (
    EmptyReferenceError,
    FrameEvent,
    SeldScores,
    compute_scores,
    match_frame,
    report,
    scores_from_csv,
)
from .mixer import (
    DatasetConfig,
    DynamicMotion,
    EventClip,
    EventTimeline,
    MixtureConfig,
    ScheduledEvent,
    SchedulingError,
    StaticMotion,
    generate_dataset,
    ingest_corpus,
    regenerate_mixture,
    render_mixture,
    schedule_events,
    spatialize_moving,
    spatialize_static,
)

__version__ = "0.1.0"
