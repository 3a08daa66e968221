"""Hyperspectral band selection for metamer-robust road-user separation.

Typical flow::

    from hsiband import load_cube, load_patchset, select_bands, SelectionConfig
    cube = load_cube("scene.hdr")
    patches = load_patchset("patches.csv")
    result = select_bands(cube, patches, SelectionConfig(n_select=3))
"""

from hsiband.bandstats import (
    CorrelationMatrix,
    CsnrProfile,
    CsnrTable,
    correlation_matrix,
    csnr,
    csnr_high_probability,
    csnr_table,
    michelson_contrast,
)
from hsiband.composite import ChannelMapping, CompositeImage, reconstruct_composite
from hsiband.cube_io import (
    LabeledPatch,
    PatchSet,
    SpectralCube,
    WavelengthAxis,
    extract_patch_samples,
    load_cube,
    load_patchset,
    save_cube,
    save_patchset,
    wavelength_to_channel,
)
from hsiband.errors import HsiError, SelectionError, ValidationError
from hsiband.evalmetrics import (
    aggregate_report,
    delta_e,
    euclidean_d2,
    evaluate_pairs,
    hotelling_t2,
    patch_stats,
    sam_angle,
    srgb_to_lab,
)
from hsiband.infotheory import (
    ClassVector,
    DiscretizedBand,
    jmim_rank,
    joint_pair_mi,
    mutual_information,
    quantize_band,
)
from hsiband.selector import SelectionConfig, SelectionResult, run_selection, select_bands
from hsiband.synthgen import build_sensor_model, default_scene_spec, generate_scene, make_metamer_pair

__version__ = "0.1.0"
