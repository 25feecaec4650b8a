"""Multi-frame quality enhancement for compressed video: reference frame
proposal, an amplitude/phase FFT loss, and the IQE backbone, on top of a
small numpy autograd engine."""

__version__ = "0.1.0"
