"""
DFT codebooks for planar arrays
===============================

Builds the Kronecker DFT codebook of an 8x8 half-wavelength array, checks
that it is orthonormal, and looks at where the beams point.
"""

import numpy as np

from beamsim.codebook import (
    AngularSector,
    ArrayGeometry,
    beam_gain,
    beams_covering_sector,
    build_dft_codebook,
    main_lobe_directions,
)

geom = ArrayGeometry.square(8)
cb = build_dft_codebook(geom)
print(f"{len(cb)} beams of {geom.n_elements} weights each")

# The beams form a unitary basis, so the Gram matrix is the identity.
gram = cb.beams.conj() @ cb.beams.T
print("max |G - I| =", np.abs(gram - np.eye(len(cb))).max())

# Gain toward broadside for the (0, 0) beam is the full array gain, N^2.
print("broadside gain of beam 0:", beam_gain(cb.beams[0], geom, 0.0, 0.0))

# Main lobes spread unevenly: dense near broadside, sparse toward end-fire.
lobes = main_lobe_directions(geom)
row = [cb.beam_index(p, 0) for p in range(8)]
print("azimuth of the elevation-0 row of beams:", np.round(lobes[row, 0], 1))

# Only beams looking into a sector of interest are trained.
sector = AngularSector(-86.0, 86.0, -26.0, -2.0)
print(f"{len(beams_covering_sector(cb, geom, sector))} beams cover {sector}")
