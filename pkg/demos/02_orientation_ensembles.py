"""
Orientation ensembles in a cubic host
=====================================

A defect whose principal axis lies along a body diagonal comes in four
inequivalent orientations. A field along one of them splits the ensemble
into an aligned class and three equivalent tilted frames; a generic
field direction lifts every degeneracy.
"""

import numpy as np

from codmr import (
    CUBIC_ROTATIONS,
    DefectFrame,
    GTensor,
    LabFrameConfig,
    MagneticField,
    ZfsParams,
    cluster_frequencies,
    ensemble_resonances,
    orientation_preset,
)

print("proper rotations of the cube:", len(CUBIC_ROTATIONS))
for family in ("axes100", "axes111", "axes110"):
    s = orientation_preset(family)
    print(family, [f.label for f in s.frames])

# A low-symmetry seed produces the full 24-member orbit
seed = DefectFrame.from_axes([0.31, 0.52, 0.79], [1.0, -0.2, 0.05])
print("full orbit of a generic frame:", len(orientation_preset("full_orbit", seed)))

zfs, g, lab = ZfsParams(987.0, 22.0), GTensor(), LabFrameConfig()
ensemble = orientation_preset("axes111")


def zero_branch(b_lab):
    lines = ensemble_resonances(zfs, g, ensemble, b_lab, lab)
    return cluster_frequencies([ln.f_mhz for ln in lines if ln.involves_zero], 2.0)


# The lab frame has z along [110]; express the [111] direction in lab axes
along_111 = MagneticField.from_vector(lab.crystal_to_lab(np.ones(3) / np.sqrt(3)) * 10e-3, "lab")
generic = MagneticField.from_vector(np.array([0.3, 0.5, 0.81]) / np.linalg.norm([0.3, 0.5, 0.81]) * 10e-3, "lab")

for name, b in (("B || [111]", along_111), ("generic", generic)):
    f = zero_branch(b)
    print(f"{name:11s} {len(f)} peaks:", " ".join(f"{x:.1f}" for x in f))
