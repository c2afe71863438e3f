/// Six-decimal fixed-point rendering used by every tabular export.
///
/// `core::fmt` rounds the exact binary value half-to-even, so ties that are
/// exactly representable (e.g. `0.0000005` is not, `2.5e-1` is) resolve to the
/// even digit. Negative zero is printed as `0.000000`.
pub fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}
