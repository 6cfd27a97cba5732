//! Nonlinear layer (in progress).
