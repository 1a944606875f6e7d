"""qframekit: desk-scale simulator for a framed polarization-BB84 QKD link.

Subsystems:

- :mod:`qframekit.jones`      exact polarization device models
- :mod:`qframekit.channel`    drifting birefringent fibre + feedback stabilizer
- :mod:`qframekit.photonics`  faint-pulse source, detectors, detection statistics
- :mod:`qframekit.framing`    control-frame/quantum-data protocol and sifting
- :mod:`qframekit.decoy`      decoy-state bounds and secret-key-rate analytics
- :mod:`qframekit.ldpc`       one-way LDPC error correction (float + fixed point)
- :mod:`qframekit.cli`        command-line front end
"""

__version__ = "0.1.0"
