//! Deterministic number formatting for CSV outputs (17 significant digits).

pub fn sci(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.0000000000000000e0"
        return "0.0000000000000000e0".to_string();
    }
    format!("{:.16e}", x)
}
