//! Text formatting shared by every exported artifact.

/// Scientific notation with 17 significant digits; parses back to the same
/// `f64` bit pattern.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON array of floats in [`fmt17`] form.
pub fn json_floats(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| fmt17(x)).collect();
    format!("[{}]", parts.join(", "))
}
