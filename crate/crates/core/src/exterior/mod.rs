//! Exterior-domain solver (in progress).
