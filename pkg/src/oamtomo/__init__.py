"""Simulation and analysis toolkit for projection-based tomography of
orbital-angular-momentum photonic qubits.

Subpackages cover field synthesis (``modes``), qubit/qudit state algebra
(``qubit``), the two-path projection interferometer and photon counting
(``apparatus``), phase-reference image analysis (``phasecam``),
calibration and tomography orchestration (``tomo``), the four-mode
network extension (``qudit``) and a config-driven CLI (``cli``).
"""

__version__ = "0.1.0"
