//! The spatial-temporal interaction network.
