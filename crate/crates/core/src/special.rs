//! Special functions.

/// Error function, accurate to a few ulps over the whole real line.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function `1 - erf(x)` without cancellation for large `x`.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}
